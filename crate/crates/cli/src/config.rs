//! JSON run configs with dot-path `--key=value` overrides.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// Default worker count when a config does not set one.
pub const WORKERS_ENV: &str = "WOSNO_WORKERS";

/// Settings shared by every subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSettings {
    pub seed: u64,
    /// Falls back to `WOSNO_WORKERS`, then to the number of cores.
    pub workers: Option<usize>,
    pub output_dir: PathBuf,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            seed: 0,
            workers: None,
            output_dir: PathBuf::from("."),
        }
    }
}

impl RunSettings {
    pub fn resolve_workers(&self) -> Result<usize> {
        let n = match self.workers {
            Some(n) => n,
            None => match std::env::var(WORKERS_ENV) {
                Ok(v) => v.trim().parse().map_err(|_| {
                    CliError::Config(format!("{WORKERS_ENV}={v:?} is not a worker count"))
                })?,
                Err(_) => std::thread::available_parallelism().map_or(1, |n| n.get()),
            },
        };
        if n == 0 {
            return Err(CliError::Config("workers must be >= 1".into()));
        }
        Ok(n)
    }

    /// `name` inside the output directory, creating the directory.
    pub fn output_path(&self, name: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.output_dir).map_err(|e| CliError::io(&self.output_dir, e))?;
        Ok(self.output_dir.join(name))
    }
}

/// Every subcommand config carries [`RunSettings`] under `run`.
pub trait HasRun {
    fn run(&self) -> &RunSettings;
}

/// One `--a.b.c=value` override. Values parse as JSON when they can and as
/// strings otherwise, so `--image=a.pgm` needs no quoting.
#[derive(Debug, Clone, PartialEq)]
pub struct Override {
    pub path: Vec<String>,
    pub value: Value,
}

impl Override {
    pub fn parse(arg: &str) -> Result<Self> {
        let body = arg
            .strip_prefix("--")
            .ok_or_else(|| CliError::Usage(format!("expected --key=value, got {arg:?}")))?;
        let (key, raw) = body
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("override {arg:?} has no '='")))?;
        let path: Vec<String> = key.split('.').map(str::to_string).collect();
        if path.iter().any(String::is_empty) {
            return Err(CliError::Usage(format!(
                "override {arg:?} has an empty key segment"
            )));
        }
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        Ok(Self { path, value })
    }

    pub fn apply(&self, root: &mut Value) -> Result<()> {
        let mut node = root;
        for (depth, key) in self.path.iter().enumerate() {
            let last = depth + 1 == self.path.len();
            node = match node {
                Value::Object(map) => {
                    if last {
                        map.insert(key.clone(), self.value.clone());
                        return Ok(());
                    }
                    map.entry(key.clone())
                        .or_insert_with(|| Value::Object(Map::new()))
                }
                Value::Array(items) => {
                    let i: usize = key.parse().map_err(|_| self.not_a_container(depth))?;
                    let len = items.len();
                    let slot = items.get_mut(i).ok_or_else(|| {
                        CliError::Config(format!("{}: index {i} out of range ({len})", self.key()))
                    })?;
                    if last {
                        *slot = self.value.clone();
                        return Ok(());
                    }
                    slot
                }
                _ => return Err(self.not_a_container(depth)),
            };
        }
        Ok(())
    }

    fn key(&self) -> String {
        self.path.join(".")
    }

    fn not_a_container(&self, depth: usize) -> CliError {
        CliError::Config(format!(
            "override {}: `{}` is not an object",
            self.key(),
            self.path[..depth].join(".")
        ))
    }
}

/// Parses `text` (or `{}`) into `T` after applying `overrides`. Errors name
/// the offending field; syntax errors also carry line and column.
pub fn load<T: DeserializeOwned>(
    text: Option<&str>,
    origin: &str,
    overrides: &[Override],
) -> Result<T> {
    let text = text.unwrap_or("{}");
    let diagnose = |e: serde_path_to_error::Error<serde_json::Error>| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            CliError::Config(format!("{origin}: {inner}"))
        } else {
            CliError::Config(format!("{origin}: at `{path}`: {inner}"))
        }
    };
    if overrides.is_empty() {
        let de = &mut serde_json::Deserializer::from_str(text);
        return serde_path_to_error::deserialize(de).map_err(diagnose);
    }
    let mut value: Value =
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("{origin}: {e}")))?;
    if !value.is_object() {
        return Err(CliError::Config(format!(
            "{origin}: top level must be an object"
        )));
    }
    for o in overrides {
        o.apply(&mut value)?;
    }
    serde_path_to_error::deserialize(value).map_err(diagnose)
}

pub fn load_file<T: DeserializeOwned>(path: Option<&Path>, overrides: &[Override]) -> Result<T> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            load(Some(&text), &p.display().to_string(), overrides)
        }
        None => load(None, "config", overrides),
    }
}

/// SHA-256 of the canonical JSON form (sorted keys) of `cfg`, ignoring the
/// settings that cannot change results: worker count and output directory.
pub fn config_hash<T: Serialize>(cfg: &T) -> String {
    let mut value = serde_json::to_value(cfg).expect("configs serialize");
    if let Some(run) = value.get_mut("run").and_then(Value::as_object_mut) {
        run.remove("workers");
        run.remove("output_dir");
    }
    let digest = Sha256::digest(value.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Provenance recorded at the top of every artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub version: String,
    pub seed: u64,
    pub workers: usize,
    pub config_hash: String,
}

impl Provenance {
    pub fn new<T: Serialize + HasRun>(cfg: &T, workers: usize) -> Self {
        Self {
            version: wosno::VERSION.to_string(),
            seed: cfg.run().seed,
            workers,
            config_hash: config_hash(cfg),
        }
    }

    /// `wosno <version> seed=<seed> workers=<n> config=<sha256>`
    pub fn text(&self) -> String {
        format!(
            "wosno {} seed={} workers={} config={}",
            self.version, self.seed, self.workers, self.config_hash
        )
    }

    /// [`Provenance::text`] as a `#` comment line, without the newline.
    pub fn comment_line(&self) -> String {
        format!("# {}", self.text())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, Serialize, Deserialize, PartialEq)]
    #[serde(deny_unknown_fields)]
    struct Demo {
        #[serde(default)]
        run: RunSettings,
        inner: Inner,
    }

    #[derive(Debug, Serialize, Deserialize, PartialEq)]
    #[serde(deny_unknown_fields)]
    struct Inner {
        count: usize,
        #[serde(default)]
        name: String,
        #[serde(default)]
        list: Vec<f64>,
    }

    impl HasRun for Demo {
        fn run(&self) -> &RunSettings {
            &self.run
        }
    }

    fn o(s: &str) -> Override {
        Override::parse(s).unwrap()
    }

    #[test]
    fn override_values_parse_as_json_then_string() {
        assert_eq!(o("--a.b=3").value, Value::from(3));
        assert_eq!(o("--a=true").value, Value::from(true));
        assert_eq!(o("--path=img.pgm").value, Value::from("img.pgm"));
        assert_eq!(o("--a=[1,2]").value, serde_json::json!([1, 2]));
        assert_eq!(o("--a.b.c=1").path, ["a", "b", "c"]);
    }

    #[test]
    fn malformed_overrides_are_usage_errors() {
        for bad in ["a=1", "--a", "--a..b=1", "--=1"] {
            assert!(
                matches!(Override::parse(bad), Err(CliError::Usage(_))),
                "{bad}"
            );
        }
    }

    #[test]
    fn overrides_create_nested_objects_and_index_arrays() {
        let d: Demo = load(
            Some(r#"{"inner": {"count": 1, "list": [1, 2]}}"#),
            "t",
            &[
                o("--inner.count=5"),
                o("--inner.name=x"),
                o("--inner.list.1=9"),
                o("--run.seed=7"),
            ],
        )
        .unwrap();
        assert_eq!(d.inner.count, 5);
        assert_eq!(d.inner.name, "x");
        assert_eq!(d.inner.list, [1.0, 9.0]);
        assert_eq!(d.run.seed, 7);
        let d: Demo = load(None, "t", &[o("--inner.count=2")]).unwrap();
        assert_eq!(d.inner.count, 2);
    }

    #[test]
    fn errors_name_the_field() {
        let e = load::<Demo>(Some("{\"inner\": {\"count\": \"x\"}}"), "cfg.json", &[]).unwrap_err();
        let msg = e.to_string();
        assert!(
            msg.contains("inner.count") && msg.contains("line 1"),
            "{msg}"
        );
        let e = load::<Demo>(None, "cfg", &[]).unwrap_err().to_string();
        assert!(e.contains("missing field `inner`"), "{e}");
        let e = load::<Demo>(None, "cfg", &[o("--inner.count=1"), o("--inner.bogus=1")])
            .unwrap_err()
            .to_string();
        assert!(e.contains("bogus"), "{e}");
        let e = load::<Demo>(Some("{\n  \"inner\": \n}"), "cfg.json", &[])
            .unwrap_err()
            .to_string();
        assert!(e.contains("line 3"), "{e}");
    }

    #[test]
    fn override_through_scalar_is_rejected() {
        let e = load::<Demo>(
            Some(r#"{"inner": {"count": 1}}"#),
            "t",
            &[o("--inner.count.x=1")],
        )
        .unwrap_err();
        assert!(matches!(e, CliError::Config(_)));
        let e = load::<Demo>(
            Some(r#"{"inner": {"count": 1, "list": [0]}}"#),
            "t",
            &[o("--inner.list.3=1")],
        )
        .unwrap_err();
        assert!(e.to_string().contains("out of range"));
    }

    #[test]
    fn hash_ignores_workers_and_output_dir() {
        let base: Demo = load(None, "t", &[o("--inner.count=1")]).unwrap();
        let other: Demo = load(
            None,
            "t",
            &[
                o("--inner.count=1"),
                o("--run.workers=8"),
                o("--run.output_dir=elsewhere"),
            ],
        )
        .unwrap();
        assert_eq!(config_hash(&base), config_hash(&other));
        let seeded: Demo = load(None, "t", &[o("--inner.count=1"), o("--run.seed=1")]).unwrap();
        assert_ne!(config_hash(&base), config_hash(&seeded));
        assert_eq!(config_hash(&base).len(), 64);
    }

    #[test]
    fn provenance_line_format() {
        let d: Demo = load(None, "t", &[o("--inner.count=1"), o("--run.seed=42")]).unwrap();
        let p = Provenance::new(&d, 3);
        let line = p.comment_line();
        assert!(line.starts_with(&format!(
            "# wosno {} seed=42 workers=3 config=",
            wosno::VERSION
        )));
        assert!(!line.contains('\n'));
    }

    #[test]
    fn explicit_workers_win() {
        let run = RunSettings {
            workers: Some(3),
            ..RunSettings::default()
        };
        assert_eq!(run.resolve_workers().unwrap(), 3);
        let zero = RunSettings {
            workers: Some(0),
            ..RunSettings::default()
        };
        assert!(zero.resolve_workers().is_err());
    }
}
