//! Path-tracking accessors over a `serde_json::Value` tree.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde_json::{Map, Number, Value};

use super::ParseError;
use crate::model::{ColorExpr, ColorValue, DelaySpec, TokenColor};

pub(crate) fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

pub(crate) fn index(path: &str, i: usize) -> String {
    format!("{path}[{i}]")
}

fn invalid(path: &str, message: impl Into<String>) -> ParseError {
    ParseError::InvalidValue {
        path: path.to_string(),
        message: message.into(),
    }
}

/// Object view that rejects keys outside an allow-list.
pub(crate) struct Obj<'a> {
    map: &'a Map<String, Value>,
    pub path: String,
}

impl<'a> Obj<'a> {
    pub fn new(value: &'a Value, path: &str, allowed: &[&str]) -> Result<Self, ParseError> {
        let map = value.as_object().ok_or_else(|| invalid(path, "expected an object"))?;
        if let Some(k) = map.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(ParseError::UnknownKey { path: join(path, k) });
        }
        Ok(Obj {
            map,
            path: path.to_string(),
        })
    }

    pub fn at(&self, key: &str) -> String {
        join(&self.path, key)
    }

    pub fn opt(&self, key: &str) -> Option<&'a Value> {
        self.map.get(key)
    }

    pub fn req(&self, key: &str) -> Result<&'a Value, ParseError> {
        self.map
            .get(key)
            .ok_or_else(|| ParseError::MissingKey { path: self.at(key) })
    }

    pub fn str(&self, key: &str) -> Result<&'a str, ParseError> {
        as_str(self.req(key)?, &self.at(key))
    }

    pub fn opt_str(&self, key: &str) -> Result<Option<&'a str>, ParseError> {
        self.opt(key).map(|v| as_str(v, &self.at(key))).transpose()
    }

    pub fn f64(&self, key: &str) -> Result<f64, ParseError> {
        as_f64(self.req(key)?, &self.at(key))
    }

    pub fn opt_u32(&self, key: &str) -> Result<Option<u32>, ParseError> {
        self.opt(key)
            .map(|v| {
                v.as_u64()
                    .and_then(|n| u32::try_from(n).ok())
                    .ok_or_else(|| invalid(&self.at(key), "expected a non-negative integer"))
            })
            .transpose()
    }

    pub fn opt_bool(&self, key: &str) -> Result<Option<bool>, ParseError> {
        self.opt(key)
            .map(|v| v.as_bool().ok_or_else(|| invalid(&self.at(key), "expected a boolean")))
            .transpose()
    }

    pub fn array(&self, key: &str) -> Result<&'a Vec<Value>, ParseError> {
        as_array(self.req(key)?, &self.at(key))
    }

    pub fn opt_array(&self, key: &str) -> Result<Option<&'a Vec<Value>>, ParseError> {
        self.opt(key).map(|v| as_array(v, &self.at(key))).transpose()
    }
}

pub(crate) fn as_str<'a>(v: &'a Value, path: &str) -> Result<&'a str, ParseError> {
    v.as_str().ok_or_else(|| invalid(path, "expected a string"))
}

pub(crate) fn as_f64(v: &Value, path: &str) -> Result<f64, ParseError> {
    v.as_f64().ok_or_else(|| invalid(path, "expected a number"))
}

pub(crate) fn as_array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>, ParseError> {
    v.as_array().ok_or_else(|| invalid(path, "expected an array"))
}

/// Identifier for declared entities: ASCII letters, digits, `_` and `-`.
pub(crate) fn check_name(s: &str, path: &str) -> Result<(), ParseError> {
    if !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
        Ok(())
    } else {
        Err(invalid(path, format!("`{s}` is not a valid name (letters, digits, `_`, `-`)")))
    }
}

pub(crate) fn expr(v: &Value, path: &str) -> Result<ColorExpr, ParseError> {
    match v {
        Value::Number(n) => n
            .as_f64()
            .map(ColorExpr::Number)
            .ok_or_else(|| invalid(path, "number out of range")),
        Value::String(s) => ColorExpr::parse(s).map_err(|e| invalid(path, e.to_string())),
        _ => Err(invalid(path, "expected a number or an expression string")),
    }
}

pub(crate) fn expr_value(e: &ColorExpr) -> Value {
    match e {
        ColorExpr::Number(n) => number(*n),
        other => Value::String(other.to_string()),
    }
}

pub(crate) fn number(n: f64) -> Value {
    Number::from_f64(n).map_or_else(|| Value::String(n.to_string()), Value::Number)
}

pub(crate) fn color(v: &Value, path: &str) -> Result<TokenColor, ParseError> {
    let map = v.as_object().ok_or_else(|| invalid(path, "expected a color record"))?;
    let mut fields: BTreeMap<Arc<str>, ColorValue> = BTreeMap::new();
    for (k, val) in map {
        let p = join(path, k);
        if !crate::model::is_identifier(k) {
            return Err(invalid(&p, "field name is not an identifier"));
        }
        let cv = match val {
            Value::Number(n) => ColorValue::Number(n.as_f64().ok_or_else(|| invalid(&p, "number out of range"))?),
            Value::String(s) => ColorValue::Symbol(s.as_str().into()),
            _ => return Err(invalid(&p, "color fields hold numbers or symbols")),
        };
        fields.insert(k.as_str().into(), cv);
    }
    Ok(TokenColor::from_fields(fields))
}

pub(crate) fn color_value(c: &TokenColor) -> Value {
    Value::Object(
        c.fields()
            .map(|(k, v)| {
                let jv = match v {
                    ColorValue::Number(n) => number(*n),
                    ColorValue::Symbol(s) => Value::String(s.to_string()),
                };
                (k.to_string(), jv)
            })
            .collect(),
    )
}

pub(crate) fn delay(v: &Value, path: &str) -> Result<DelaySpec, ParseError> {
    let head = Obj::new(
        v,
        path,
        &["dist", "value", "low", "high", "mean", "sd", "truncate_at_zero"],
    )?;
    let dist = head.str("dist")?;
    let allowed: &[&str] = match dist {
        "deterministic" => &["dist", "value"],
        "uniform" => &["dist", "low", "high"],
        "exponential" => &["dist", "mean"],
        "normal" => &["dist", "mean", "sd", "truncate_at_zero"],
        other => return Err(invalid(&head.at("dist"), format!("unknown distribution `{other}`"))),
    };
    let o = Obj::new(v, path, allowed)?;
    let p = |key: &str| -> Result<ColorExpr, ParseError> { expr(o.req(key)?, &o.at(key)) };
    Ok(match dist {
        "deterministic" => DelaySpec::Deterministic { value: p("value")? },
        "uniform" => DelaySpec::Uniform {
            low: p("low")?,
            high: p("high")?,
        },
        "exponential" => DelaySpec::Exponential { mean: p("mean")? },
        _ => DelaySpec::Normal {
            mean: p("mean")?,
            sd: p("sd")?,
            truncate_at_zero: o.opt_bool("truncate_at_zero")?.unwrap_or(true),
        },
    })
}

pub(crate) fn delay_value(d: &DelaySpec) -> Value {
    let mut m = Map::new();
    let mut put = |k: &str, v: Value| {
        m.insert(k.to_string(), v);
    };
    match d {
        DelaySpec::Deterministic { value } => {
            put("dist", "deterministic".into());
            put("value", expr_value(value));
        }
        DelaySpec::Uniform { low, high } => {
            put("dist", "uniform".into());
            put("low", expr_value(low));
            put("high", expr_value(high));
        }
        DelaySpec::Exponential { mean } => {
            put("dist", "exponential".into());
            put("mean", expr_value(mean));
        }
        DelaySpec::Normal { mean, sd, truncate_at_zero } => {
            put("dist", "normal".into());
            put("mean", expr_value(mean));
            put("sd", expr_value(sd));
            put("truncate_at_zero", Value::Bool(*truncate_at_zero));
        }
    }
    Value::Object(m)
}
