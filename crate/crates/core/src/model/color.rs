use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

/// A single field value of a token color.
#[derive(Debug, Clone, PartialEq)]
pub enum ColorValue {
    Number(f64),
    Symbol(Arc<str>),
}

impl ColorValue {
    pub fn as_number(&self) -> Option<f64> {
        match self {
            ColorValue::Number(n) => Some(*n),
            ColorValue::Symbol(_) => None,
        }
    }

    pub fn as_symbol(&self) -> Option<&str> {
        match self {
            ColorValue::Symbol(s) => Some(s),
            ColorValue::Number(_) => None,
        }
    }
}

impl From<f64> for ColorValue {
    fn from(n: f64) -> Self {
        ColorValue::Number(n)
    }
}

impl From<&str> for ColorValue {
    fn from(s: &str) -> Self {
        ColorValue::Symbol(s.into())
    }
}

impl fmt::Display for ColorValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColorValue::Number(n) => write!(f, "{n}"),
            ColorValue::Symbol(s) => write!(f, "'{}'", s.replace('\\', "\\\\").replace('\'', "\\'")),
        }
    }
}

/// Record of named fields carried by a token.
///
/// Colors are immutable values. The field map sits behind an `Arc`, so copying a
/// color from an input token to an output token is a reference-count bump.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TokenColor(Arc<BTreeMap<Arc<str>, ColorValue>>);

impl TokenColor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_fields<K, V, I>(fields: I) -> Self
    where
        K: Into<Arc<str>>,
        V: Into<ColorValue>,
        I: IntoIterator<Item = (K, V)>,
    {
        TokenColor(Arc::new(
            fields
                .into_iter()
                .map(|(k, v)| (k.into(), v.into()))
                .collect(),
        ))
    }

    pub(crate) fn from_map(map: BTreeMap<Arc<str>, ColorValue>) -> Self {
        TokenColor(Arc::new(map))
    }

    /// Returns a copy of this color with `field` set to `value`.
    pub fn with(mut self, field: impl Into<Arc<str>>, value: impl Into<ColorValue>) -> Self {
        Arc::make_mut(&mut self.0).insert(field.into(), value.into());
        self
    }

    pub fn get(&self, field: &str) -> Option<&ColorValue> {
        self.0.get(field)
    }

    pub fn fields(&self) -> impl Iterator<Item = (&str, &ColorValue)> {
        self.0.iter().map(|(k, v)| (k.as_ref(), v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for TokenColor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, v)) in self.fields().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}: {v}")?;
        }
        f.write_str("}")
    }
}
