//! Arc expressions: how a transition computes output colors from bound input tokens.
//!
//! Textual syntax:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := number | 'symbol' | ident | ident '.' ident
//!         | '(' expr ')' | '-' factor | '{' [field ':' expr (',' field ':' expr)*] '}'
//! ```
//!
//! A bare identifier names a binding and evaluates to the whole color of the bound
//! token; `x.size` reads one field of it.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use super::color::{ColorValue, TokenColor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColorExpr {
    Number(f64),
    Symbol(Arc<str>),
    /// Whole color of a bound input token.
    Binding(String),
    Field {
        binding: String,
        field: String,
    },
    Binary {
        op: BinOp,
        lhs: Box<ColorExpr>,
        rhs: Box<ColorExpr>,
    },
    Record(BTreeMap<Arc<str>, ColorExpr>),
}

/// Result of evaluating an expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Number(f64),
    Symbol(Arc<str>),
    Record(TokenColor),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unknown binding `{0}`")]
    UnknownBinding(String),
    #[error("binding `{binding}` has no field `{field}`")]
    MissingField { binding: String, field: String },
    #[error("arithmetic on a symbol value")]
    SymbolArithmetic,
    #[error("division by zero")]
    DivisionByZero,
    #[error("expected a scalar, found a record")]
    NotScalar,
    #[error("expected a number")]
    NotNumber,
    #[error("expected a record")]
    NotRecord,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("expression syntax error at offset {offset}: {message}")]
pub struct ExprSyntaxError {
    pub offset: usize,
    pub message: String,
}

/// Static shape of an expression's result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Scalar,
    Record,
}

impl ColorExpr {
    pub fn number(n: f64) -> Self {
        ColorExpr::Number(n)
    }

    pub fn symbol(s: &str) -> Self {
        ColorExpr::Symbol(s.into())
    }

    pub fn binding(name: &str) -> Self {
        ColorExpr::Binding(name.to_string())
    }

    pub fn field(binding: &str, field: &str) -> Self {
        ColorExpr::Field {
            binding: binding.to_string(),
            field: field.to_string(),
        }
    }

    pub fn binary(op: BinOp, lhs: ColorExpr, rhs: ColorExpr) -> Self {
        ColorExpr::Binary {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    pub fn record<K: Into<Arc<str>>>(fields: impl IntoIterator<Item = (K, ColorExpr)>) -> Self {
        ColorExpr::Record(fields.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }

    /// Constant record expression reproducing `color`.
    pub fn constant(color: &TokenColor) -> Self {
        ColorExpr::Record(
            color
                .fields()
                .map(|(k, v)| {
                    let e = match v {
                        ColorValue::Number(n) => ColorExpr::Number(*n),
                        ColorValue::Symbol(s) => ColorExpr::Symbol(s.clone()),
                    };
                    (Arc::from(k), e)
                })
                .collect(),
        )
    }

    pub fn parse(text: &str) -> Result<Self, ExprSyntaxError> {
        let tokens = lex(text)?;
        let mut p = Parser { tokens, pos: 0, len: text.len() };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(e)
    }

    pub fn shape(&self) -> Shape {
        match self {
            ColorExpr::Binding(_) | ColorExpr::Record(_) => Shape::Record,
            _ => Shape::Scalar,
        }
    }

    /// Every binding name referenced, in order of appearance (with repeats).
    pub fn bindings(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_bindings(&mut out);
        out
    }

    fn collect_bindings<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            ColorExpr::Binding(b) | ColorExpr::Field { binding: b, .. } => out.push(b),
            ColorExpr::Binary { lhs, rhs, .. } => {
                lhs.collect_bindings(out);
                rhs.collect_bindings(out);
            }
            ColorExpr::Record(fields) => fields.values().for_each(|e| e.collect_bindings(out)),
            ColorExpr::Number(_) | ColorExpr::Symbol(_) => {}
        }
    }

    pub fn divides_by_literal_zero(&self) -> bool {
        match self {
            ColorExpr::Binary { op, lhs, rhs } => {
                (*op == BinOp::Div && matches!(**rhs, ColorExpr::Number(z) if z == 0.0))
                    || lhs.divides_by_literal_zero()
                    || rhs.divides_by_literal_zero()
            }
            ColorExpr::Record(fields) => fields.values().any(ColorExpr::divides_by_literal_zero),
            _ => false,
        }
    }

    /// Structural type errors that can be found without evaluating: records nested in
    /// records, records or symbol literals used as arithmetic operands.
    pub fn type_errors(&self) -> Vec<String> {
        let mut errs = Vec::new();
        self.check_types(&mut errs);
        errs
    }

    fn check_types(&self, errs: &mut Vec<String>) {
        match self {
            ColorExpr::Binary { op, lhs, rhs } => {
                for side in [lhs, rhs] {
                    match **side {
                        ColorExpr::Symbol(_) => {
                            errs.push(format!("symbol literal used as operand of `{}`", op.symbol()))
                        }
                        ColorExpr::Binding(_) | ColorExpr::Record(_) => {
                            errs.push(format!("record used as operand of `{}`", op.symbol()))
                        }
                        _ => {}
                    }
                    side.check_types(errs);
                }
            }
            ColorExpr::Record(fields) => {
                for (k, v) in fields {
                    if v.shape() == Shape::Record {
                        errs.push(format!("field `{k}` holds a record; colors are flat"));
                    }
                    v.check_types(errs);
                }
            }
            _ => {}
        }
    }

    /// Evaluates against a binding lookup.
    pub fn eval<'c, F>(&self, lookup: &F) -> Result<Value, EvalError>
    where
        F: Fn(&str) -> Option<&'c TokenColor>,
    {
        match self {
            ColorExpr::Number(n) => Ok(Value::Number(*n)),
            ColorExpr::Symbol(s) => Ok(Value::Symbol(s.clone())),
            ColorExpr::Binding(b) => lookup(b)
                .cloned()
                .map(Value::Record)
                .ok_or_else(|| EvalError::UnknownBinding(b.clone())),
            ColorExpr::Field { binding, field } => {
                let color = lookup(binding).ok_or_else(|| EvalError::UnknownBinding(binding.clone()))?;
                match color.get(field) {
                    Some(ColorValue::Number(n)) => Ok(Value::Number(*n)),
                    Some(ColorValue::Symbol(s)) => Ok(Value::Symbol(s.clone())),
                    None => Err(EvalError::MissingField {
                        binding: binding.clone(),
                        field: field.clone(),
                    }),
                }
            }
            ColorExpr::Binary { op, lhs, rhs } => {
                let a = lhs.eval_number(lookup)?;
                let b = rhs.eval_number(lookup)?;
                Ok(Value::Number(match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(EvalError::DivisionByZero);
                        }
                        a / b
                    }
                }))
            }
            ColorExpr::Record(fields) => {
                let mut map = BTreeMap::new();
                for (k, v) in fields {
                    let value = match v.eval(lookup)? {
                        Value::Number(n) => ColorValue::Number(n),
                        Value::Symbol(s) => ColorValue::Symbol(s),
                        Value::Record(_) => return Err(EvalError::NotScalar),
                    };
                    map.insert(k.clone(), value);
                }
                Ok(Value::Record(TokenColor::from_map(map)))
            }
        }
    }

    pub fn eval_number<'c, F>(&self, lookup: &F) -> Result<f64, EvalError>
    where
        F: Fn(&str) -> Option<&'c TokenColor>,
    {
        match self.eval(lookup)? {
            Value::Number(n) => Ok(n),
            Value::Symbol(_) => Err(EvalError::SymbolArithmetic),
            Value::Record(_) => Err(EvalError::NotNumber),
        }
    }

    pub fn eval_color<'c, F>(&self, lookup: &F) -> Result<TokenColor, EvalError>
    where
        F: Fn(&str) -> Option<&'c TokenColor>,
    {
        match self.eval(lookup)? {
            Value::Record(c) => Ok(c),
            _ => Err(EvalError::NotRecord),
        }
    }

    /// Value of a binding-free numeric expression, if it is one.
    pub fn constant_number(&self) -> Option<f64> {
        if !self.bindings().is_empty() {
            return None;
        }
        self.eval_number(&|_| None).ok()
    }

    fn write_operand(&self, f: &mut fmt::Formatter<'_>, parens: bool) -> fmt::Result {
        if parens {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

fn precedence(e: &ColorExpr) -> u8 {
    match e {
        ColorExpr::Binary { op, .. } => op.precedence(),
        _ => 3,
    }
}

impl fmt::Display for ColorExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColorExpr::Number(n) => write!(f, "{n}"),
            ColorExpr::Symbol(s) => write!(f, "{}", ColorValue::Symbol(s.clone())),
            ColorExpr::Binding(b) => f.write_str(b),
            ColorExpr::Field { binding, field } => write!(f, "{binding}.{field}"),
            ColorExpr::Binary { op, lhs, rhs } => {
                let p = op.precedence();
                lhs.write_operand(f, precedence(lhs) < p)?;
                write!(f, " {} ", op.symbol())?;
                rhs.write_operand(f, precedence(rhs) <= p)
            }
            ColorExpr::Record(fields) => {
                f.write_str("{")?;
                for (i, (k, v)) in fields.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{k}: {v}")?;
                }
                f.write_str("}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Str(String),
    Ident(String),
    Punct(char),
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// Checks that `s` is usable as a binding or field name inside expressions.
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if is_ident_start(c)) && chars.all(is_ident_char)
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, ExprSyntaxError> {
    let bytes: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |offset: usize, message: &str| ExprSyntaxError {
        offset,
        message: message.to_string(),
    };
    while i < bytes.len() {
        let (off, c) = bytes[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == '.' && bytes.get(i + 1).is_some_and(|(_, d)| d.is_ascii_digit())) {
            let start = i;
            while i < bytes.len() && (bytes[i].1.is_ascii_digit() || bytes[i].1 == '.') {
                i += 1;
            }
            if i < bytes.len() && matches!(bytes[i].1, 'e' | 'E') {
                let mut j = i + 1;
                if j < bytes.len() && matches!(bytes[j].1, '+' | '-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].1.is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].1.is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let end = bytes.get(i).map_or(text.len(), |(o, _)| *o);
            let lit = &text[off..end];
            let n: f64 = lit.parse().map_err(|_| err(bytes[start].0, "malformed number"))?;
            out.push((off, Tok::Num(n)));
        } else if is_ident_start(c) {
            let start = off;
            while i < bytes.len() && is_ident_char(bytes[i].1) {
                i += 1;
            }
            let end = bytes.get(i).map_or(text.len(), |(o, _)| *o);
            out.push((start, Tok::Ident(text[start..end].to_string())));
        } else if c == '\'' || c == '"' {
            let quote = c;
            let mut s = String::new();
            i += 1;
            loop {
                match bytes.get(i) {
                    None => return Err(err(off, "unterminated symbol literal")),
                    Some((_, '\\')) => {
                        match bytes.get(i + 1) {
                            Some((_, e)) => s.push(*e),
                            None => return Err(err(off, "unterminated symbol literal")),
                        }
                        i += 2;
                    }
                    Some((_, ch)) if *ch == quote => {
                        i += 1;
                        break;
                    }
                    Some((_, ch)) => {
                        s.push(*ch);
                        i += 1;
                    }
                }
            }
            out.push((off, Tok::Str(s)));
        } else if "+-*/(){}:,.".contains(c) {
            out.push((off, Tok::Punct(c)));
            i += 1;
        } else {
            return Err(err(off, &format!("unexpected character `{c}`")));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(usize, Tok)>,
    pos: usize,
    len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.len, |(o, _)| *o)
    }

    fn error(&self, message: &str) -> ExprSyntaxError {
        ExprSyntaxError {
            offset: self.offset(),
            message: message.to_string(),
        }
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Punct(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ExprSyntaxError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(&format!("expected `{c}`")))
        }
    }

    fn expr(&mut self) -> Result<ColorExpr, ExprSyntaxError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Punct('+')) => BinOp::Add,
                Some(Tok::Punct('-')) => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = ColorExpr::binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<ColorExpr, ExprSyntaxError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Punct('*')) => BinOp::Mul,
                Some(Tok::Punct('/')) => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = ColorExpr::binary(op, lhs, rhs);
        }
    }

    fn factor(&mut self) -> Result<ColorExpr, ExprSyntaxError> {
        let tok = self.peek().cloned().ok_or_else(|| self.error("unexpected end of expression"))?;
        self.pos += 1;
        match tok {
            Tok::Num(n) => Ok(ColorExpr::Number(n)),
            Tok::Str(s) => Ok(ColorExpr::Symbol(s.into())),
            Tok::Ident(name) => {
                if self.eat('.') {
                    match self.peek().cloned() {
                        Some(Tok::Ident(field)) => {
                            self.pos += 1;
                            Ok(ColorExpr::Field { binding: name, field })
                        }
                        _ => Err(self.error("expected field name after `.`")),
                    }
                } else {
                    Ok(ColorExpr::Binding(name))
                }
            }
            Tok::Punct('-') => match self.peek() {
                Some(Tok::Num(n)) => {
                    let n = *n;
                    self.pos += 1;
                    Ok(ColorExpr::Number(-n))
                }
                _ => {
                    let inner = self.factor()?;
                    Ok(ColorExpr::binary(BinOp::Sub, ColorExpr::Number(0.0), inner))
                }
            },
            Tok::Punct('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Punct('{') => {
                let mut fields = BTreeMap::new();
                if self.eat('}') {
                    return Ok(ColorExpr::Record(fields));
                }
                loop {
                    let key_offset = self.offset();
                    let key = match self.peek().cloned() {
                        Some(Tok::Ident(k)) | Some(Tok::Str(k)) => k,
                        _ => return Err(self.error("expected field name")),
                    };
                    self.pos += 1;
                    self.expect(':')?;
                    let value = self.expr()?;
                    if fields.insert(Arc::from(key.as_str()), value).is_some() {
                        return Err(ExprSyntaxError {
                            offset: key_offset,
                            message: format!("duplicate field `{key}`"),
                        });
                    }
                    if self.eat(',') {
                        continue;
                    }
                    self.expect('}')?;
                    return Ok(ColorExpr::Record(fields));
                }
            }
            Tok::Punct(c) => {
                self.pos -= 1;
                Err(self.error(&format!("unexpected `{c}`")))
            }
        }
    }
}
