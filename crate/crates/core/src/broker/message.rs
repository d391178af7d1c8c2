//! Session envelopes and their flat text record.
//!
//! ```text
//! protocol_id=00ff.. sender_role=B target_role=S label=login payload=s"alice",i42,r3.5,btrue,u
//! ```

use std::fmt;

use thiserror::Error;

use crate::scribble::Sort;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Str(String),
    Int(i64),
    Real(f64),
    Bool(bool),
    Unit,
}

impl Value {
    pub fn sort(&self) -> Sort {
        match self {
            Value::Str(_) => Sort::Str,
            Value::Int(_) => Sort::Int,
            Value::Real(_) => Sort::Real,
            Value::Bool(_) => Sort::Bool,
            Value::Unit => Sort::Unit,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_real(&self) -> Option<f64> {
        match self {
            Value::Real(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(v) => Some(*v),
            _ => None,
        }
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Str(s.to_string())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Str(s)
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Real(v)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Str(s) => {
                f.write_str("s\"")?;
                for c in s.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        '\r' => f.write_str("\\r")?,
                        '\t' => f.write_str("\\t")?,
                        c => write!(f, "{c}")?,
                    }
                }
                f.write_str("\"")
            }
            Value::Int(v) => write!(f, "i{v}"),
            Value::Real(v) => write!(f, "r{v:?}"),
            Value::Bool(v) => write!(f, "b{v}"),
            Value::Unit => f.write_str("u"),
        }
    }
}

/// The wire-level envelope. `target_role` doubles as the routing key.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionMessage {
    pub protocol_id: String,
    pub sender_role: String,
    pub target_role: String,
    pub label: String,
    pub payload: Vec<Value>,
}

impl SessionMessage {
    pub fn new(
        protocol_id: impl Into<String>,
        sender_role: impl Into<String>,
        target_role: impl Into<String>,
        label: impl Into<String>,
        payload: Vec<Value>,
    ) -> Self {
        SessionMessage {
            protocol_id: protocol_id.into(),
            sender_role: sender_role.into(),
            target_role: target_role.into(),
            label: label.into(),
            payload,
        }
    }

    pub fn payload_sorts(&self) -> Vec<Sort> {
        self.payload.iter().map(Value::sort).collect()
    }

    /// Newline-terminated text record.
    pub fn to_record(&self) -> String {
        let payload: Vec<String> = self.payload.iter().map(|v| v.to_string()).collect();
        format!(
            "protocol_id={} sender_role={} target_role={} label={} payload={}\n",
            self.protocol_id,
            self.sender_role,
            self.target_role,
            self.label,
            payload.join(",")
        )
    }

    /// Parses one record; a trailing newline is optional.
    pub fn from_record(line: &str) -> Result<Self, RecordError> {
        let line = line.strip_suffix('\n').unwrap_or(line);
        let mut rest = line;
        let mut fields = Vec::new();
        for key in ["protocol_id", "sender_role", "target_role", "label"] {
            let prefix = format!("{key}=");
            rest = rest
                .strip_prefix(&prefix)
                .ok_or(RecordError::MissingField(key))?;
            let end = rest.find(' ').ok_or(RecordError::MissingField("payload"))?;
            fields.push(rest[..end].to_string());
            rest = &rest[end + 1..];
        }
        let payload_text = rest
            .strip_prefix("payload=")
            .ok_or(RecordError::MissingField("payload"))?;
        let payload = parse_payload(payload_text)?;
        let mut it = fields.into_iter();
        Ok(SessionMessage {
            protocol_id: it.next().unwrap(),
            sender_role: it.next().unwrap(),
            target_role: it.next().unwrap(),
            label: it.next().unwrap(),
            payload,
        })
    }
}

impl fmt::Display for SessionMessage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.to_record().trim_end())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RecordError {
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("bad payload literal at offset {offset}: {reason}")]
    BadLiteral { offset: usize, reason: String },
}

fn parse_payload(text: &str) -> Result<Vec<Value>, RecordError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let bad = |offset: usize, reason: &str| RecordError::BadLiteral {
        offset,
        reason: reason.to_string(),
    };
    while i < chars.len() {
        let start = i;
        match chars[i] {
            's' => {
                if chars.get(i + 1) != Some(&'"') {
                    return Err(bad(i, "expected `\"` after `s`"));
                }
                i += 2;
                let mut s = String::new();
                loop {
                    match chars.get(i) {
                        None => return Err(bad(start, "unterminated string")),
                        Some('"') => {
                            i += 1;
                            break;
                        }
                        Some('\\') => {
                            let c = match chars.get(i + 1) {
                                Some('n') => '\n',
                                Some('r') => '\r',
                                Some('t') => '\t',
                                Some('"') => '"',
                                Some('\\') => '\\',
                                _ => return Err(bad(i, "bad escape")),
                            };
                            s.push(c);
                            i += 2;
                        }
                        Some(c) => {
                            s.push(*c);
                            i += 1;
                        }
                    }
                }
                out.push(Value::Str(s));
            }
            'u' => {
                i += 1;
                out.push(Value::Unit);
            }
            tag @ ('i' | 'r' | 'b') => {
                i += 1;
                let begin = i;
                while i < chars.len() && chars[i] != ',' {
                    i += 1;
                }
                let lit: String = chars[begin..i].iter().collect();
                let v = match tag {
                    'i' => lit
                        .parse()
                        .map(Value::Int)
                        .map_err(|_| bad(start, "bad int")),
                    'r' => lit
                        .parse()
                        .map(Value::Real)
                        .map_err(|_| bad(start, "bad real")),
                    _ => lit
                        .parse()
                        .map(Value::Bool)
                        .map_err(|_| bad(start, "bad bool")),
                }?;
                out.push(v);
            }
            _ => return Err(bad(i, "unknown literal tag")),
        }
        if i < chars.len() {
            if chars[i] != ',' {
                return Err(bad(i, "expected `,`"));
            }
            i += 1;
            if i == chars.len() {
                return Err(bad(i, "trailing `,`"));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_round_trip() {
        let m = SessionMessage::new(
            "0123456789abcdef0123456789abcdef",
            "B",
            "S",
            "login",
            vec![
                Value::from("al\"ice, bob\\"),
                Value::Int(-42),
                Value::Real(3.5),
                Value::Bool(true),
                Value::Unit,
            ],
        );
        let rec = m.to_record();
        assert!(rec.ends_with('\n'));
        assert_eq!(SessionMessage::from_record(&rec).unwrap(), m);
    }

    #[test]
    fn empty_payload_and_label() {
        let m = SessionMessage::new("p", "S", "B", "", vec![]);
        assert_eq!(
            m.to_record(),
            "protocol_id=p sender_role=S target_role=B label= payload=\n"
        );
        assert_eq!(SessionMessage::from_record(&m.to_record()).unwrap(), m);
    }

    #[test]
    fn rejects_garbage() {
        assert!(SessionMessage::from_record("hello").is_err());
        assert!(SessionMessage::from_record(
            "protocol_id=p sender_role=S target_role=B label=x payload=q1"
        )
        .is_err());
    }
}
