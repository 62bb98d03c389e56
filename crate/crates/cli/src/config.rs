use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub const MANIFEST: &str = "manifest.json";

/// A problem with the invocation or its inputs (exit status 1).
#[derive(Debug)]
pub struct Invalid(pub String);

impl fmt::Display for Invalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

pub fn invalid(msg: impl Into<String>) -> anyhow::Error {
    Invalid(msg.into()).into()
}

/// 1 for validation problems, 2 for everything else.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    use textorder::Error as E;
    if err.downcast_ref::<Invalid>().is_some() {
        return 1;
    }
    match err.downcast_ref::<E>() {
        Some(
            E::Parse { .. }
            | E::Format { .. }
            | E::EmptyCorpus { .. }
            | E::MissingDate { .. }
            | E::Precondition(_)
            | E::Config(_)
            | E::LengthMismatch { .. }
            | E::NotPermutation(_)
            | E::RatingOutOfRange { .. }
            | E::Json(_),
        ) => 1,
        _ => 2,
    }
}

/// Flag values that were given on the command line, keyed by dotted path
/// into the resolved config.
#[derive(Default)]
pub struct Overrides(Vec<(&'static str, Value)>);

impl Overrides {
    pub fn set<T: Serialize>(&mut self, path: &'static str, v: Option<T>) -> &mut Self {
        if let Some(v) = v {
            self.0.push((path, serde_json::to_value(v).expect("flag values serialize")));
        }
        self
    }

    pub fn flag(&mut self, path: &'static str, on: bool) -> &mut Self {
        if on {
            self.0.push((path, Value::Bool(true)));
        }
        self
    }
}

fn set_path(root: &mut Map<String, Value>, path: &str, v: Value) {
    let mut parts = path.split('.').peekable();
    let mut cur = root;
    while let Some(key) = parts.next() {
        if parts.peek().is_none() {
            cur.insert(key.to_string(), v);
            return;
        }
        let slot = cur
            .entry(key.to_string())
            .or_insert_with(|| Value::Object(Map::new()));
        if !slot.is_object() {
            *slot = Value::Object(Map::new());
        }
        cur = slot.as_object_mut().expect("just made an object");
    }
}

pub fn read_json(path: &Path) -> anyhow::Result<Value> {
    if !path.exists() {
        return Err(invalid(format!("{} does not exist", path.display())));
    }
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

/// Defaults, then the config file, then flags.
pub fn resolve<T: DeserializeOwned>(config: Option<&Path>, overrides: Overrides) -> anyhow::Result<T> {
    let mut root = match config {
        Some(path) => match read_json(path)? {
            Value::Object(m) => m,
            _ => return Err(invalid(format!("{} must hold a JSON object", path.display()))),
        },
        None => Map::new(),
    };
    for (path, v) in overrides.0 {
        set_path(&mut root, path, v);
    }
    serde_json::from_value(Value::Object(root)).map_err(|e| invalid(format!("configuration: {e}")))
}

pub fn require_file(path: &Path) -> anyhow::Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(invalid(format!("input file {} does not exist", path.display())))
    }
}

/// Written to `<out>/manifest.json` after every successful run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    /// Fully resolved configuration, sufficient to rerun the command.
    pub config: Value,
    /// Files written, relative to the output directory.
    pub outputs: Vec<PathBuf>,
}

impl Manifest {
    pub fn new(command: &str, seed: u64, config: Value, out: &Path, files: &[PathBuf]) -> Self {
        let mut outputs: Vec<PathBuf> = files
            .iter()
            .map(|f| f.strip_prefix(out).unwrap_or(f).to_path_buf())
            .collect();
        outputs.sort();
        outputs.dedup();
        Manifest {
            tool: "textorder".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            config,
            outputs,
        }
    }

    pub fn write(&self, out: &Path) -> anyhow::Result<()> {
        let path = out.join(MANIFEST);
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        serde_json::from_value(read_json(path)?).map_err(|e| invalid(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, Deserialize, PartialEq)]
    #[serde(default, deny_unknown_fields)]
    struct Demo {
        a: u32,
        inner: Inner,
    }

    #[derive(Debug, Deserialize, PartialEq, Default)]
    #[serde(default, deny_unknown_fields)]
    struct Inner {
        b: f64,
        c: bool,
    }

    impl Default for Demo {
        fn default() -> Self {
            Demo { a: 7, inner: Inner { b: 1.0, c: false } }
        }
    }

    #[test]
    fn flags_beat_file_beats_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"a": 3, "inner": {"b": 2.5}}"#).unwrap();
        let d: Demo = resolve(None, Overrides::default()).unwrap();
        assert_eq!(d, Demo::default());
        let d: Demo = resolve(Some(&path), Overrides::default()).unwrap();
        assert_eq!((d.a, d.inner.b), (3, 2.5));
        let mut o = Overrides::default();
        o.set("inner.b", Some(9.0)).set("a", None::<u32>).flag("inner.c", true);
        let d: Demo = resolve(Some(&path), o).unwrap();
        assert_eq!(d, Demo { a: 3, inner: Inner { b: 9.0, c: true } });
    }

    #[test]
    fn unknown_config_keys_are_invalid() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"zzz": 1}"#).unwrap();
        let err = resolve::<Demo>(Some(&path), Overrides::default()).unwrap_err();
        assert_eq!(exit_code(&err), 1);
    }
}
