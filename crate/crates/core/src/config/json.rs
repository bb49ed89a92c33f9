//! Small helpers for walking a `serde_json::Value` while collecting every
//! violation instead of stopping at the first.

use serde_json::{Map, Value};

use super::{Violation, ViolationKind};

pub(crate) fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_owned()
    } else {
        format!("{path}.{key}")
    }
}

pub(crate) fn index(path: &str, i: usize) -> String {
    format!("{path}[{i}]")
}

pub(crate) fn type_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "bool",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

#[derive(Debug, Default)]
pub(crate) struct Walker {
    pub errors: Vec<Violation>,
}

impl Walker {
    pub fn push(&mut self, path: impl Into<String>, kind: ViolationKind) {
        self.errors.push(Violation {
            path: path.into(),
            kind,
        });
    }

    fn wrong_type(&mut self, path: &str, expected: &'static str, v: &Value) {
        self.push(
            path,
            ViolationKind::WrongType {
                expected,
                found: type_name(v),
            },
        );
    }

    pub fn parse(&mut self, text: &str) -> Option<Value> {
        if text.trim().is_empty() {
            return Some(Value::Object(Map::new()));
        }
        match serde_json::from_str(text) {
            Ok(v) => Some(v),
            Err(e) => {
                self.push("", ViolationKind::Syntax(e.to_string()));
                None
            }
        }
    }

    pub fn object<'a>(&mut self, v: &'a Value, path: &str) -> Option<&'a Map<String, Value>> {
        match v {
            Value::Object(m) => Some(m),
            other => {
                self.wrong_type(path, "object", other);
                None
            }
        }
    }

    pub fn array<'a>(&mut self, v: &'a Value, path: &str) -> Option<&'a Vec<Value>> {
        match v {
            Value::Array(a) => Some(a),
            other => {
                self.wrong_type(path, "array", other);
                None
            }
        }
    }

    pub fn field<'a>(
        &mut self,
        obj: &'a Map<String, Value>,
        path: &str,
        key: &str,
    ) -> Option<&'a Value> {
        let v = obj.get(key);
        if v.is_none() {
            self.push(join(path, key), ViolationKind::Missing);
        }
        v
    }

    pub fn number(&mut self, v: &Value, path: &str) -> Option<f64> {
        match v.as_f64() {
            Some(x) if x.is_finite() => Some(x),
            _ => {
                self.wrong_type(path, "number", v);
                None
            }
        }
    }

    pub fn f64_field(&mut self, obj: &Map<String, Value>, path: &str, key: &str) -> Option<f64> {
        let v = self.field(obj, path, key)?;
        self.number(v, &join(path, key))
    }

    pub fn opt_f64(&mut self, obj: &Map<String, Value>, path: &str, key: &str) -> Option<f64> {
        let v = obj.get(key)?;
        self.number(v, &join(path, key))
    }

    pub fn positive(&mut self, obj: &Map<String, Value>, path: &str, key: &str) -> Option<f64> {
        let x = self.f64_field(obj, path, key)?;
        self.check_positive(x, &join(path, key))
    }

    pub fn check_positive(&mut self, x: f64, path: &str) -> Option<f64> {
        if x > 0.0 {
            Some(x)
        } else {
            self.push(path, ViolationKind::NotPositive(x));
            None
        }
    }

    pub fn u64_field(&mut self, obj: &Map<String, Value>, path: &str, key: &str) -> Option<u64> {
        let v = self.field(obj, path, key)?;
        match v.as_u64() {
            Some(x) => Some(x),
            None => {
                self.wrong_type(&join(path, key), "unsigned integer", v);
                None
            }
        }
    }

    pub fn opt_u64(&mut self, obj: &Map<String, Value>, path: &str, key: &str) -> Option<u64> {
        obj.get(key)?;
        self.u64_field(obj, path, key)
    }

    pub fn str_field<'a>(
        &mut self,
        obj: &'a Map<String, Value>,
        path: &str,
        key: &str,
    ) -> Option<&'a str> {
        let v = self.field(obj, path, key)?;
        match v.as_str() {
            Some(s) => Some(s),
            None => {
                self.wrong_type(&join(path, key), "string", v);
                None
            }
        }
    }

    pub fn opt_str<'a>(
        &mut self,
        obj: &'a Map<String, Value>,
        path: &str,
        key: &str,
    ) -> Option<&'a str> {
        obj.get(key)?;
        self.str_field(obj, path, key)
    }

    /// `[x, y]` pair of finite numbers.
    pub fn point(&mut self, v: &Value, path: &str) -> Option<(f64, f64)> {
        let a = self.array(v, path)?;
        if a.len() != 2 {
            self.push(
                path,
                ViolationKind::Invalid(format!("expected [x, y], got {} values", a.len())),
            );
            return None;
        }
        let x = self.number(&a[0], &index(path, 0));
        let y = self.number(&a[1], &index(path, 1));
        Some((x?, y?))
    }
}
