//! Action-call grammar shared by the planner output and the skill dispatcher.
//!
//! ```text
//! call    := ident "(" [arg ("," arg)*] [","] ")"
//! arg     := [ident "="] literal
//! literal := string | integer | decimal
//! ```

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Literal {
    Int(i64),
    Float(f64),
    Str(String),
}

impl Literal {
    pub fn as_str(&self) -> Option<&str> {
        match self {
            Literal::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Literal::Int(i) => Some(*i as f64),
            Literal::Float(f) => Some(*f),
            Literal::Str(_) => None,
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Int(i) => write!(f, "{i}"),
            Literal::Float(x) => write!(f, "{x:?}"),
            Literal::Str(s) => {
                f.write_str("\"")?;
                for c in s.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        '\t' => f.write_str("\\t")?,
                        '\r' => f.write_str("\\r")?,
                        c => write!(f, "{c}")?,
                    }
                }
                f.write_str("\"")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arg {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
    pub value: Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillCall {
    pub name: String,
    pub args: Vec<Arg>,
}

impl SkillCall {
    pub fn new(name: impl Into<String>) -> Self {
        SkillCall { name: name.into(), args: Vec::new() }
    }

    pub fn positional(mut self, value: Literal) -> Self {
        self.args.push(Arg { key: None, value });
        self
    }

    pub fn keyword(mut self, key: impl Into<String>, value: Literal) -> Self {
        self.args.push(Arg { key: Some(key.into()), value });
        self
    }

    /// Keyword argument by name, falling back to the positional slot `pos`.
    pub fn arg(&self, key: &str, pos: usize) -> Option<&Literal> {
        self.args
            .iter()
            .find(|a| a.key.as_deref() == Some(key))
            .or_else(|| self.args.get(pos).filter(|a| a.key.is_none()))
            .map(|a| &a.value)
    }
}

impl fmt::Display for SkillCall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.name)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            if let Some(k) = &a.key {
                write!(f, "{k}=")?;
            }
            write!(f, "{}", a.value)?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CallError {
    #[error("syntax error at byte {pos}: {msg}")]
    SyntaxError { pos: usize, msg: String },
    #[error("more than one action call")]
    MultipleCalls,
}

pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c == '_' || c.is_ascii_lowercase())
        && chars.all(|c| c == '_' || c.is_ascii_lowercase() || c.is_ascii_digit())
}

/// Parses the interior of an action code block. Empty input (or `''`, `""`, `[]`) means no action.
pub fn parse_action_call(code: &str) -> Result<Option<SkillCall>, CallError> {
    let trimmed = code.trim();
    if matches!(trimmed, "" | "''" | "\"\"" | "[]") {
        return Ok(None);
    }
    let mut p = Parser { src: code, pos: code.len() - code.trim_start().len() };
    let call = p.call()?;
    p.skip_ws();
    if p.eat(';') {
        p.skip_ws();
    }
    if p.pos == p.src.len() {
        return Ok(Some(call));
    }
    let rest = &p.src[p.pos..];
    let ident_len = rest.find(|c: char| !(c == '_' || c.is_ascii_alphanumeric())).unwrap_or(rest.len());
    if ident_len > 0 && rest[ident_len..].trim_start().starts_with('(') {
        return Err(CallError::MultipleCalls);
    }
    Err(p.error("unexpected trailing input"))
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> CallError {
        CallError::SyntaxError { pos: self.pos, msg: msg.to_string() }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.bump();
        }
    }

    fn ident(&mut self) -> Result<String, CallError> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c == '_' || c.is_ascii_alphanumeric()) {
            self.bump();
        }
        let s = &self.src[start..self.pos];
        if is_identifier(s) {
            Ok(s.to_string())
        } else {
            self.pos = start;
            Err(self.error("expected identifier [a-z_][a-z0-9_]*"))
        }
    }

    fn call(&mut self) -> Result<SkillCall, CallError> {
        let name = self.ident()?;
        self.skip_ws();
        if !self.eat('(') {
            return Err(self.error("expected `(`"));
        }
        let mut call = SkillCall::new(name);
        loop {
            self.skip_ws();
            if self.eat(')') {
                return Ok(call);
            }
            call.args.push(self.arg()?);
            self.skip_ws();
            if self.eat(',') {
                continue;
            }
            if self.eat(')') {
                return Ok(call);
            }
            return Err(self.error("expected `,` or `)`"));
        }
    }

    fn arg(&mut self) -> Result<Arg, CallError> {
        let start = self.pos;
        if self.peek().is_some_and(|c| c == '_' || c.is_ascii_lowercase()) {
            let key = self.ident()?;
            self.skip_ws();
            if !self.eat('=') {
                self.pos = start;
                return Err(self.error("bare identifiers are not literals"));
            }
            self.skip_ws();
            return Ok(Arg { key: Some(key), value: self.literal()? });
        }
        Ok(Arg { key: None, value: self.literal()? })
    }

    fn literal(&mut self) -> Result<Literal, CallError> {
        match self.peek() {
            Some(q @ ('"' | '\'')) => self.string(q),
            Some(c) if c == '-' || c == '+' || c == '.' || c.is_ascii_digit() => self.number(),
            _ => Err(self.error("expected a string or number literal")),
        }
    }

    fn string(&mut self, quote: char) -> Result<Literal, CallError> {
        self.bump();
        let mut out = String::new();
        loop {
            match self.bump() {
                None => return Err(self.error("unterminated string")),
                Some(c) if c == quote => return Ok(Literal::Str(out)),
                Some('\\') => {
                    let c = match self.bump() {
                        Some('n') => '\n',
                        Some('t') => '\t',
                        Some('r') => '\r',
                        Some(c @ ('"' | '\'' | '\\')) => c,
                        _ => return Err(self.error("bad escape")),
                    };
                    out.push(c);
                }
                Some(c) => out.push(c),
            }
        }
    }

    fn number(&mut self) -> Result<Literal, CallError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            let s = p.pos;
            while p.peek().is_some_and(|c| c.is_ascii_digit()) {
                p.bump();
            }
            p.pos > s
        };
        if !self.eat('-') {
            self.eat('+');
        }
        let int_part = digits(self);
        let mut is_float = false;
        if self.eat('.') {
            is_float = true;
            let frac = digits(self);
            if !int_part && !frac {
                return Err(self.error("malformed number"));
            }
        } else if !int_part {
            return Err(self.error("malformed number"));
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            is_float = true;
            self.bump();
            if !self.eat('-') {
                self.eat('+');
            }
            if !digits(self) {
                return Err(self.error("malformed exponent"));
            }
        }
        let text = &self.src[start..self.pos];
        let bad = |p: &Self| CallError::SyntaxError { pos: start, msg: format!("bad number `{}`", &p.src[start..p.pos]) };
        if is_float {
            text.parse::<f64>().map(Literal::Float).map_err(|_| bad(self))
        } else {
            text.parse::<i64>().map(Literal::Int).map_err(|_| bad(self))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn positional_string() {
        let c = parse_action_call("turn_right(\"small\")").unwrap().unwrap();
        assert_eq!(c, SkillCall::new("turn_right").positional(Literal::Str("small".into())));
    }

    #[test]
    fn empty_forms_mean_none() {
        for s in ["", "   \n", "''", "\"\"", "[]"] {
            assert_eq!(parse_action_call(s), Ok(None), "{s:?}");
        }
    }

    #[test]
    fn multiple_calls_rejected() {
        assert_eq!(parse_action_call("go(); stop()"), Err(CallError::MultipleCalls));
        assert_eq!(parse_action_call("go()\nstop()"), Err(CallError::MultipleCalls));
        assert!(parse_action_call("go();").unwrap().is_some());
    }

    #[test]
    fn keywords_numbers_and_errors() {
        let c = parse_action_call("move_towards(target='wooden_table', speed=-1.5e-1, n=3)").unwrap().unwrap();
        assert_eq!(c.arg("target", 0), Some(&Literal::Str("wooden_table".into())));
        assert_eq!(c.arg("speed", 9), Some(&Literal::Float(-0.15)));
        assert_eq!(c.arg("n", 9), Some(&Literal::Int(3)));
        assert!(matches!(parse_action_call("Go()"), Err(CallError::SyntaxError { pos: 0, .. })));
        assert!(matches!(parse_action_call("go(x)"), Err(CallError::SyntaxError { pos: 3, .. })));
        assert!(matches!(parse_action_call("go(\"a)"), Err(CallError::SyntaxError { .. })));
        assert!(matches!(parse_action_call("go() extra"), Err(CallError::SyntaxError { pos: 5, .. })));
    }

    fn literal() -> impl Strategy<Value = Literal> {
        prop_oneof![
            any::<i64>().prop_map(Literal::Int),
            any::<f64>().prop_filter("finite", |f| f.is_finite()).prop_map(Literal::Float),
            "[ -~\n\t\"\\\\é]{0,12}".prop_map(Literal::Str),
        ]
    }

    proptest! {
        #[test]
        fn format_parse_round_trip(
            name in "[a-z_][a-z0-9_]{0,10}",
            args in prop::collection::vec((prop::option::of("[a-z_][a-z0-9_]{0,6}"), literal()), 0..5),
        ) {
            let mut call = SkillCall::new(name);
            for (key, value) in args {
                call.args.push(Arg { key, value });
            }
            let text = call.to_string();
            prop_assert_eq!(parse_action_call(&text).unwrap(), Some(call));
        }
    }
}
