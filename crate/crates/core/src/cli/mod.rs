//! Batch command surface: JSON configs in, CSV tables and JSON summaries out.
//!
//! A run with `--out results/run1` writes `results/run1.json` (summary, always),
//! `results/run1.csv` (when the command produces a table) or, on failure,
//! `results/run1.error.json`. Every file is written to a temporary sibling and
//! renamed into place.

mod check;
mod commands;

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::geometry::{Domain, DomainSpec, Point, StableIndex};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Kernel,
    Wos,
    Martin,
    Cond,
    Gauge,
    Represent,
    Check,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Kernel => "kernel",
            Command::Wos => "wos",
            Command::Martin => "martin",
            Command::Cond => "cond",
            Command::Gauge => "gauge",
            Command::Represent => "represent",
            Command::Check => "check",
        }
    }
}

/// Common config fields; the remaining keys are command parameters.
#[derive(Clone, Debug, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub command: Option<Command>,
    #[serde(default)]
    pub domain: Option<DomainSpec>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(flatten)]
    pub params: Map<String, Value>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| Error::Config("`seed` is required (there is no default seed)".into()))
    }

    pub fn domain(&self) -> Result<Domain> {
        let spec = self.domain.clone().ok_or_else(|| Error::Config("`domain` is required".into()))?;
        Domain::from_spec(spec)
    }

    pub fn index(&self, n: usize) -> Result<StableIndex> {
        let a = self.alpha.ok_or_else(|| Error::Config("`alpha` is required".into()))?;
        StableIndex::new(n, a)
    }

    pub(crate) fn params<T: serde::de::DeserializeOwned>(&self) -> Result<T> {
        serde_json::from_value(Value::Object(self.params.clone())).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Outputs of one run before they are written.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifacts {
    pub summary: Value,
    pub table: Option<Table>,
    /// Set by `check` when an invariant fails; the report is still written.
    pub failed: bool,
}

/// A CSV table; floats are written with 17 significant digits.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    F(f64),
    I(u64),
    S(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::I(v as u64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::I(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::S(v.to_string())
    }
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Table { header: header.iter().map(|s| s.as_ref().to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|c| match c {
                Cell::F(v) => format_float(*v),
                Cell::I(v) => v.to_string(),
                Cell::S(s) => s.clone(),
            }))?;
        }
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }
}

pub fn format_float(v: f64) -> String {
    let mut s = String::new();
    write!(s, "{v:.16e}").unwrap();
    s
}

/// Column names `prefix_0 .. prefix_{n-1}`.
pub(crate) fn coord_header(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}_{i}")).collect()
}

pub(crate) fn coord_cells(p: &Point) -> Vec<Cell> {
    p.coords().iter().map(|v| Cell::F(*v)).collect()
}

/// Exit status for an error: 2 for input problems, 3 for numerical failures.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_validation() || matches!(e, Error::Io(_)) {
        EXIT_VALIDATION
    } else {
        EXIT_NUMERIC
    }
}

/// Runs `command` in process and returns its artifacts.
pub fn run(command: Command, config: &RunConfig) -> Result<Artifacts> {
    if let Some(c) = config.command {
        if c != command {
            return Err(Error::Config(format!("config is for `{}` but `{}` was invoked", c.name(), command.name())));
        }
    }
    let seed = config.seed()?;
    let mut a = match command {
        Command::Kernel => commands::kernel(config)?,
        Command::Wos => commands::wos(config, seed)?,
        Command::Martin => commands::martin(config, seed)?,
        Command::Cond => commands::cond(config, seed)?,
        Command::Gauge => commands::gauge(config, seed)?,
        Command::Represent => commands::represent(config, seed)?,
        Command::Check => check::check(config, seed)?,
    };
    if let Value::Object(m) = &mut a.summary {
        m.insert("command".into(), json!(command.name()));
        m.insert("seed".into(), json!(seed));
        m.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    }
    Ok(a)
}

/// `<out>.<ext>`, keeping any dots already in the file name.
pub fn artifact_path(out: &Path, ext: &str) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Writes the artifacts of a run, or its error report, and returns the exit status.
pub fn dispatch(command: Command, config_text: &str, out: &Path) -> i32 {
    let result = RunConfig::from_json(config_text).and_then(|c| run(command, &c));
    let written = match &result {
        Ok(a) => write_artifacts(a, out),
        Err(e) => {
            let report = json!({
                "command": command.name(),
                "error": e.to_string(),
                "diagnostic": format!("{e:?}"),
                "exit_code": exit_code(e),
            });
            write_atomic(&artifact_path(out, "error.json"), &to_json_bytes(&report))
        }
    };
    match (result, written) {
        (_, Err(e)) => {
            eprintln!("error: cannot write output: {e}");
            EXIT_VALIDATION
        }
        (Ok(a), Ok(())) => {
            if a.failed {
                EXIT_NUMERIC
            } else {
                EXIT_OK
            }
        }
        (Err(e), Ok(())) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// [`dispatch`] inside a dedicated pool of `threads` workers.
pub fn dispatch_with_threads(command: Command, config_text: &str, out: &Path, threads: usize) -> i32 {
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(|| dispatch(command, config_text, out)),
        Err(e) => {
            eprintln!("error: cannot start {threads} worker threads: {e}");
            EXIT_VALIDATION
        }
    }
}

fn to_json_bytes(v: &Value) -> Vec<u8> {
    let mut b = serde_json::to_vec_pretty(v).expect("serializable summary");
    b.push(b'\n');
    b
}

fn write_artifacts(a: &Artifacts, out: &Path) -> Result<()> {
    if let Some(t) = &a.table {
        write_atomic(&artifact_path(out, "csv"), &t.to_csv()?)?;
    }
    write_atomic(&artifact_path(out, "json"), &to_json_bytes(&a.summary))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> RunConfig {
        RunConfig::from_json(text).unwrap()
    }

    #[test]
    fn martin_at_center_is_one() {
        let c = cfg(r#"{"command":"kernel","domain":{"type":"ball","center":[0,0],"radius":1},"alpha":1,"seed":1,
            "query":"martin","x":[0,0],"w":[1,0]}"#);
        let a = run(Command::Kernel, &c).unwrap();
        let t = a.table.unwrap();
        assert_eq!(t.rows[0].last(), Some(&Cell::F(1.0)));
        assert_eq!(format_float(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn constant_boundary_data_gives_exact_one() {
        let c = cfg(r#"{"domain":{"type":"box","min":[0,0],"max":[1,1]},"alpha":1.2,"seed":7,
            "x":[0.3,0.6],"phi":"one","samples":2000}"#);
        let t = run(Command::Wos, &c).unwrap().table.unwrap();
        assert_eq!(t.rows[0][..2], [Cell::F(1.0), Cell::F(0.0)]);
    }

    #[test]
    fn validation_failures_exit_with_two() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("bad");
        let text = r#"{"domain":{"type":"ball","center":[0,0],"radius":1},"alpha":2,"seed":1,"query":"green","x":[0,0],"w":[0.5,0]}"#;
        assert_eq!(dispatch(Command::Kernel, text, &out), EXIT_VALIDATION);
        let report: Value = serde_json::from_slice(&std::fs::read(artifact_path(&out, "error.json")).unwrap()).unwrap();
        assert!(report["error"].as_str().unwrap().contains("(0, 2)"), "{report}");
        let no_seed = r#"{"domain":{"type":"ball","center":[0,0],"radius":1},"alpha":1,"query":"green","x":[0,0],"w":[0.5,0]}"#;
        assert_eq!(dispatch(Command::Kernel, no_seed, &out), EXIT_VALIDATION);
        let wrong = r#"{"command":"wos","domain":{"type":"ball","center":[0,0],"radius":1},"alpha":1,"seed":3}"#;
        assert_eq!(dispatch(Command::Kernel, wrong, &out), EXIT_VALIDATION);
    }

    #[test]
    fn non_gaugeable_request_exits_with_three() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("g");
        let text = r#"{"domain":{"type":"ball","center":[0,0],"radius":1},"alpha":1,"seed":1,
            "q":{"type":"constant","c":50},"resolution":4}"#;
        assert_eq!(dispatch(Command::Gauge, text, &out), EXIT_NUMERIC);
        assert!(artifact_path(&out, "error.json").exists());
    }

    #[test]
    fn artifacts_are_written_atomically_next_to_out() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("k.v1");
        let text = r#"{"domain":{"type":"ball","center":[0],"radius":1},"alpha":0.5,"seed":1,"query":"poisson","x":[0],"w":[2]}"#;
        assert_eq!(dispatch(Command::Kernel, text, &out), EXIT_OK);
        let names: Vec<String> =
            std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
        let mut names = names;
        names.sort();
        assert_eq!(names, ["k.v1.csv", "k.v1.json"]);
    }
}
