//! Flat `key = value` configs checked against a typed schema.
//!
//! Blank lines and `#` comments are ignored. Lists are comma separated.
//! Unknown keys, duplicate keys and ill-typed values are errors that name
//! the offending field.

use std::collections::BTreeMap;
use std::fmt;

use shiftconv::report::{config_hash, fmt_f64};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    UInt,
    Int,
    Float,
    Bool,
    UIntList,
    IntList,
    FloatList,
}

impl Kind {
    fn describe(self) -> &'static str {
        match self {
            Kind::UInt => "a non-negative integer",
            Kind::Int => "an integer",
            Kind::Float => "a finite number",
            Kind::Bool => "true or false",
            Kind::UIntList => "a comma-separated list of non-negative integers",
            Kind::IntList => "a comma-separated list of integers",
            Kind::FloatList => "a comma-separated list of finite numbers",
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Field {
    pub name: &'static str,
    pub kind: Kind,
    /// `None` makes the field required.
    pub default: Option<&'static str>,
}

pub const fn field(name: &'static str, kind: Kind, default: &'static str) -> Field {
    Field { name, kind, default: Some(default) }
}

pub const fn required(name: &'static str, kind: Kind) -> Field {
    Field { name, kind, default: None }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    UInt(u64),
    Int(i64),
    Float(f64),
    Bool(bool),
    UIntList(Vec<u64>),
    IntList(Vec<i64>),
    FloatList(Vec<f64>),
}

impl Value {
    fn canonical(&self) -> String {
        fn join<T>(v: &[T], f: impl Fn(&T) -> String) -> String {
            v.iter().map(f).collect::<Vec<_>>().join(",")
        }
        match self {
            Value::UInt(v) => v.to_string(),
            Value::Int(v) => v.to_string(),
            Value::Float(v) => fmt_f64(*v),
            Value::Bool(v) => v.to_string(),
            Value::UIntList(v) => join(v, |x| x.to_string()),
            Value::IntList(v) => join(v, |x| x.to_string()),
            Value::FloatList(v) => join(v, |x| fmt_f64(*x)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub field: Option<String>,
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    pub fn field(name: &str, message: impl Into<String>) -> Self {
        ConfigError { field: Some(name.to_string()), line: None, message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error")?;
        if let Some(name) = &self.field {
            write!(f, " in field `{name}`")?;
        }
        if let Some(l) = self.line {
            write!(f, " (line {l})")?;
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for ConfigError {}

fn parse_value(raw: &str, kind: Kind) -> Option<Value> {
    fn list<T: std::str::FromStr>(raw: &str) -> Option<Vec<T>> {
        if raw.trim().is_empty() {
            return Some(Vec::new());
        }
        raw.split(',').map(|s| s.trim().parse().ok()).collect()
    }
    let finite = |v: &Vec<f64>| v.iter().all(|x| x.is_finite());
    match kind {
        Kind::UInt => raw.parse().ok().map(Value::UInt),
        Kind::Int => raw.parse().ok().map(Value::Int),
        Kind::Float => raw.parse::<f64>().ok().filter(|v| v.is_finite()).map(Value::Float),
        Kind::Bool => raw.parse().ok().map(Value::Bool),
        Kind::UIntList => list(raw).map(Value::UIntList),
        Kind::IntList => list(raw).map(Value::IntList),
        Kind::FloatList => list(raw).filter(finite).map(Value::FloatList),
    }
}

/// A parsed config with every schema field resolved.
#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    values: BTreeMap<&'static str, Value>,
}

impl Config {
    pub fn parse(text: &str, schema: &[Field]) -> Result<Self, ConfigError> {
        let mut raw: BTreeMap<&'static str, (usize, String)> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ConfigError {
                    field: None,
                    line: Some(line_no),
                    message: format!("expected `key = value`, got `{line}`"),
                });
            };
            let k = k.trim();
            let Some(f) = schema.iter().find(|f| f.name == k) else {
                return Err(ConfigError {
                    field: Some(k.to_string()),
                    line: Some(line_no),
                    message: "unknown key for this subcommand".into(),
                });
            };
            if raw.insert(f.name, (line_no, v.trim().to_string())).is_some() {
                return Err(ConfigError {
                    field: Some(k.to_string()),
                    line: Some(line_no),
                    message: "key given more than once".into(),
                });
            }
        }
        let mut values = BTreeMap::new();
        for f in schema {
            let (line, text) = match (raw.remove(f.name), f.default) {
                (Some((l, t)), _) => (Some(l), t),
                (None, Some(d)) => (None, d.to_string()),
                (None, None) => return Err(ConfigError::field(f.name, "required key is missing")),
            };
            let v = parse_value(&text, f.kind).ok_or_else(|| ConfigError {
                field: Some(f.name.to_string()),
                line,
                message: format!("expected {}, got `{text}`", f.kind.describe()),
            })?;
            values.insert(f.name, v);
        }
        Ok(Config { values })
    }

    /// `key=value` lines in key order with normalized values.
    pub fn canonical(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k}={}\n", v.canonical())).collect()
    }

    pub fn hash(&self) -> String {
        config_hash(&self.canonical())
    }

    fn get(&self, name: &str) -> &Value {
        self.values
            .get(name)
            .unwrap_or_else(|| panic!("`{name}` is not in this subcommand's schema"))
    }

    pub fn uint(&self, name: &str) -> u64 {
        match self.get(name) {
            Value::UInt(v) => *v,
            v => panic!("`{name}` is {v:?}, not an unsigned integer"),
        }
    }

    pub fn int(&self, name: &str) -> i64 {
        match self.get(name) {
            Value::Int(v) => *v,
            v => panic!("`{name}` is {v:?}, not an integer"),
        }
    }

    pub fn float(&self, name: &str) -> f64 {
        match self.get(name) {
            Value::Float(v) => *v,
            v => panic!("`{name}` is {v:?}, not a number"),
        }
    }

    pub fn flag(&self, name: &str) -> bool {
        match self.get(name) {
            Value::Bool(v) => *v,
            v => panic!("`{name}` is {v:?}, not a bool"),
        }
    }

    pub fn uints(&self, name: &str) -> &[u64] {
        match self.get(name) {
            Value::UIntList(v) => v,
            v => panic!("`{name}` is {v:?}, not a list of unsigned integers"),
        }
    }

    pub fn ints(&self, name: &str) -> &[i64] {
        match self.get(name) {
            Value::IntList(v) => v,
            v => panic!("`{name}` is {v:?}, not a list of integers"),
        }
    }

    pub fn floats(&self, name: &str) -> &[f64] {
        match self.get(name) {
            Value::FloatList(v) => v,
            v => panic!("`{name}` is {v:?}, not a list of numbers"),
        }
    }

    /// Non-empty list, or an error naming the field.
    pub fn nonempty_uints(&self, name: &str) -> Result<&[u64], ConfigError> {
        let v = self.uints(name);
        if v.is_empty() {
            return Err(ConfigError::field(name, "list must not be empty"));
        }
        Ok(v)
    }

    pub fn nonempty_floats(&self, name: &str) -> Result<&[f64], ConfigError> {
        let v = self.floats(name);
        if v.is_empty() {
            return Err(ConfigError::field(name, "list must not be empty"));
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCHEMA: &[Field] = &[
        required("x", Kind::Float),
        field("primes", Kind::UIntList, "3,5"),
        field("verbose_table", Kind::Bool, "false"),
        field("shift", Kind::Int, "-2"),
    ];

    #[test]
    fn parses_with_defaults_and_comments() {
        let c = Config::parse("# test\nx = 2.5  # trailing\n\nprimes = 7, 11\n", SCHEMA).unwrap();
        assert_eq!(c.float("x"), 2.5);
        assert_eq!(c.uints("primes"), &[7, 11]);
        assert!(!c.flag("verbose_table"));
        assert_eq!(c.int("shift"), -2);
        assert_eq!(c.canonical(), "primes=7,11\nshift=-2\nverbose_table=false\nx=2.5\n");
    }

    #[test]
    fn errors_name_the_field() {
        let e = Config::parse("x = abc", SCHEMA).unwrap_err();
        assert_eq!(e.field.as_deref(), Some("x"));
        assert_eq!(e.line, Some(1));
        let e = Config::parse("x = 1\nprimes = 3, five", SCHEMA).unwrap_err();
        assert_eq!(e.field.as_deref(), Some("primes"));
        let e = Config::parse("y = 1", SCHEMA).unwrap_err();
        assert_eq!(e.field.as_deref(), Some("y"));
        let e = Config::parse("", SCHEMA).unwrap_err();
        assert_eq!(e.field.as_deref(), Some("x"));
        let e = Config::parse("x = 1\nx = 2", SCHEMA).unwrap_err();
        assert_eq!(e.line, Some(2));
        assert!(Config::parse("x = inf", SCHEMA).is_err());
        assert!(Config::parse("just words", SCHEMA).unwrap_err().to_string().contains("line 1"));
    }

    #[test]
    fn canonical_ignores_layout() {
        let a = Config::parse("x=1.0\nprimes=3,5", SCHEMA).unwrap();
        let b = Config::parse("# c\nprimes = 3 , 5\n x = 1", SCHEMA).unwrap();
        assert_eq!(a.hash(), b.hash());
    }
}
