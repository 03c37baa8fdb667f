//! Scenario documents: a single JSON object per run, with error messages
//! anchored to the line of the offending key.

use std::fmt;
use std::path::{Path, PathBuf};

use nhqm::prelude::{Params, C64};
use serde_json::{Map, Value};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub file: String,
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.file, self.line, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone)]
pub struct Config {
    file: String,
    dir: PathBuf,
    text: String,
    root: Map<String, Value>,
}

/// A view of one JSON object inside the document, remembering where it sits.
#[derive(Debug, Clone, Copy)]
pub struct Section<'a> {
    cfg: &'a Config,
    name: &'a str,
    obj: &'a Map<String, Value>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let file = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            file: file.clone(),
            line: 0,
            message: format!("cannot read config: {e}"),
        })?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&file, dir, text)
    }

    pub fn parse(file: &str, dir: PathBuf, text: String) -> Result<Self, ConfigError> {
        let value: Value = serde_json::from_str(&text).map_err(|e| ConfigError {
            file: file.to_string(),
            line: e.line(),
            message: format!("invalid JSON: {e}"),
        })?;
        match value {
            Value::Object(root) => Ok(Self { file: file.to_string(), dir, text, root }),
            _ => Err(ConfigError { file: file.to_string(), line: 1, message: "config must be a JSON object".into() }),
        }
    }

    pub fn root(&self) -> Section<'_> {
        Section { cfg: self, name: "", obj: &self.root }
    }

    /// A copy with `parameters.<key>` replaced by `value`.
    pub fn with_parameter(&self, key: &str, value: f64) -> Self {
        let mut out = self.clone();
        let params = out
            .root
            .entry("parameters")
            .or_insert_with(|| Value::Object(Map::new()));
        if let Value::Object(p) = params {
            p.insert(key.to_string(), Value::from(value));
        }
        out
    }

    /// Paths in the document are relative to the config file.
    pub fn resolve(&self, p: &str) -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.dir.join(p)
        }
    }

    /// 1-based line of the first `"key":` in the source text, or 1.
    fn line_of(&self, key: &str) -> usize {
        if key.is_empty() {
            return 1;
        }
        let needle = format!("\"{key}\"");
        let mut from = 0;
        while let Some(pos) = self.text[from..].find(&needle) {
            let at = from + pos;
            let rest = self.text[at + needle.len()..].trim_start();
            if rest.starts_with(':') {
                return self.text[..at].matches('\n').count() + 1;
            }
            from = at + needle.len();
        }
        1
    }

    pub fn error(&self, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError { file: self.file.clone(), line: self.line_of(key), message: message.into() }
    }
}

fn describe(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "an object",
    }
}

impl<'a> Section<'a> {
    fn qualified(&self, key: &str) -> String {
        if self.name.is_empty() {
            format!("`{key}`")
        } else {
            format!("`{}.{key}`", self.name)
        }
    }

    pub fn get(&self, key: &str) -> Option<&'a Value> {
        self.obj.get(key).filter(|v| !v.is_null())
    }

    pub fn keys(&self) -> impl Iterator<Item = &'a String> {
        self.obj.keys()
    }

    pub fn missing(&self, key: &str) -> ConfigError {
        self.cfg.error(self.name, format!("missing required key {}", self.qualified(key)))
    }

    pub fn invalid(&self, key: &str, what: impl fmt::Display) -> ConfigError {
        self.cfg.error(key, format!("{} {what}", self.qualified(key)))
    }

    pub fn section(&self, key: &'a str) -> Result<Option<Section<'a>>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Object(obj)) => Ok(Some(Section { cfg: self.cfg, name: key, obj })),
            Some(v) => Err(self.invalid(key, format!("must be an object, got {}", describe(v)))),
        }
    }

    pub fn require_section(&self, key: &'a str) -> Result<Section<'a>, ConfigError> {
        self.section(key)?.ok_or_else(|| self.missing(key))
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Number(n)) => match n.as_f64() {
                Some(x) if x.is_finite() => Ok(Some(x)),
                _ => Err(self.invalid(key, "must be a finite number")),
            },
            Some(v) => Err(self.invalid(key, format!("must be a number, got {}", describe(v)))),
        }
    }

    pub fn require_f64(&self, key: &str) -> Result<f64, ConfigError> {
        self.f64(key)?.ok_or_else(|| self.missing(key))
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.f64(key)?.unwrap_or(default))
    }

    pub fn positive(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.f64(key)? {
            Some(x) if x <= 0.0 => Err(self.invalid(key, format!("must be positive, got {x}"))),
            other => Ok(other),
        }
    }

    pub fn usize(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Number(n)) => n
                .as_u64()
                .map(|x| Some(x as usize))
                .ok_or_else(|| self.invalid(key, "must be a non-negative integer")),
            Some(v) => Err(self.invalid(key, format!("must be an integer, got {}", describe(v)))),
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        Ok(self.usize(key)?.unwrap_or(default))
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(Value::Bool(b)) => Ok(*b),
            Some(v) => Err(self.invalid(key, format!("must be true or false, got {}", describe(v)))),
        }
    }

    pub fn str(&self, key: &str) -> Result<Option<&'a str>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(v) => Err(self.invalid(key, format!("must be a string, got {}", describe(v)))),
        }
    }

    pub fn require_str(&self, key: &str) -> Result<&'a str, ConfigError> {
        self.str(key)?.ok_or_else(|| self.missing(key))
    }

    /// A number (real) or an `[re, im]` pair.
    pub fn complex(&self, key: &str) -> Result<Option<C64>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => complex_value(v).map(Some).ok_or_else(|| self.invalid(key, "must be a number or an [re, im] pair")),
        }
    }

    pub fn complex_list(&self, key: &str) -> Result<Option<Vec<C64>>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Array(items)) => items
                .iter()
                .map(complex_value)
                .collect::<Option<Vec<_>>>()
                .map(Some)
                .ok_or_else(|| self.invalid(key, "must be a list of numbers or [re, im] pairs")),
            Some(v) => Err(self.invalid(key, format!("must be a list, got {}", describe(v)))),
        }
    }

    pub fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| v.as_f64().filter(|x| x.is_finite()))
                .collect::<Option<Vec<_>>>()
                .map(Some)
                .ok_or_else(|| self.invalid(key, "must be a list of finite numbers")),
            Some(v) => Err(self.invalid(key, format!("must be a list, got {}", describe(v)))),
        }
    }

    pub fn require_f64_list(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        self.f64_list(key)?.ok_or_else(|| self.missing(key))
    }

    pub fn points(&self, key: &str) -> Result<Option<Vec<Vec<f64>>>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Array(items)) => items
                .iter()
                .map(|p| {
                    p.as_array()?
                        .iter()
                        .map(|v| v.as_f64().filter(|x| x.is_finite()))
                        .collect::<Option<Vec<_>>>()
                })
                .collect::<Option<Vec<_>>>()
                .map(Some)
                .ok_or_else(|| self.invalid(key, "must be a list of coordinate lists")),
            Some(v) => Err(self.invalid(key, format!("must be a list, got {}", describe(v)))),
        }
    }

    /// All entries of this object as finite numbers.
    pub fn params(&self) -> Result<Params, ConfigError> {
        let mut out = Params::new();
        for key in self.obj.keys() {
            out.insert(key.clone(), self.require_f64(key)?);
        }
        Ok(out)
    }
}

fn complex_value(v: &Value) -> Option<C64> {
    match v {
        Value::Number(n) => n.as_f64().filter(|x| x.is_finite()).map(|x| C64::new(x, 0.0)),
        Value::Array(a) if a.len() == 2 => {
            let re = a[0].as_f64().filter(|x| x.is_finite())?;
            let im = a[1].as_f64().filter(|x| x.is_finite())?;
            Some(C64::new(re, im))
        }
        _ => None,
    }
}
