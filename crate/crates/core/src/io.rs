//! File formats: dataset CSV, scenario config, replication records,
//! summary tables, screening results and run manifests.
//!
//! Reals are written in shortest round-trip form, so re-reading a written
//! file reproduces every value bit for bit.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::evaluate::{EvalSummary, ReplicationRecord};
use crate::screening::{Method, ScreenResult, SurvivalDataset};
use crate::simgen::{CensoringCase, Model, SimScenario, DEFAULT_CALIBRATION_SAMPLES};

/// Formats a real so that `str::parse::<f64>` gives back the same bits.
pub fn fmt_real(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn csv_reader(bytes: &[u8]) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes)
}

fn parse_err(line: u64, column: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        reason: reason.into(),
    }
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    parse_err(line, 0, e.to_string())
}

fn parse_f64(field: &str, line: u64, column: usize) -> Result<f64> {
    field
        .parse::<f64>()
        .map_err(|_| parse_err(line, column, format!("'{field}' is not a number")))
}

/// Parses a dataset from CSV bytes with header `time,status,z1,...,zp`.
pub fn parse_dataset(bytes: &[u8]) -> Result<SurvivalDataset> {
    let mut rdr = csv_reader(bytes);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(r) => r.map_err(csv_err)?,
        None => return Err(parse_err(1, 1, "empty file")),
    };
    let width = header.len();
    if width < 2
        || !header[0].eq_ignore_ascii_case("time")
        || !header[1].eq_ignore_ascii_case("status")
    {
        return Err(parse_err(1, 1, "header must start with 'time,status'"));
    }
    let p = width - 2;
    let mut times = Vec::new();
    let mut status = Vec::new();
    let mut z = Vec::new();
    for rec in records {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != width {
            return Err(parse_err(
                line,
                rec.len().min(width) + 1,
                format!("expected {width} fields, found {}", rec.len()),
            ));
        }
        let t = parse_f64(&rec[0], line, 1)?;
        if !t.is_finite() || t < 0.0 {
            return Err(Error::Validation(format!(
                "line {line}, column 1: time must be finite and non-negative, got '{}'",
                &rec[0]
            )));
        }
        times.push(t);
        status.push(match &rec[1] {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::Validation(format!(
                    "line {line}, column 2: status must be 0 or 1, got '{other}'"
                )))
            }
        });
        for (j, field) in rec.iter().enumerate().skip(2) {
            let v = parse_f64(field, line, j + 1)?;
            if !v.is_finite() {
                return Err(Error::Validation(format!(
                    "line {line}, column {}: covariate is not finite",
                    j + 1
                )));
            }
            z.push(v);
        }
    }
    let n = times.len();
    let z = Array2::from_shape_vec((n, p), z).expect("row widths checked");
    SurvivalDataset::new(times, status, z)
}

/// Reads a dataset file, returning it with the SHA-256 of its bytes.
pub fn read_dataset_with_digest(path: &Path) -> Result<(SurvivalDataset, String)> {
    let bytes = fs::read(path)?;
    Ok((parse_dataset(&bytes)?, sha256_hex(&bytes)))
}

pub fn read_dataset(path: &Path) -> Result<SurvivalDataset> {
    read_dataset_with_digest(path).map(|(d, _)| d)
}

pub fn dataset_to_csv(data: &SurvivalDataset) -> String {
    let mut out = String::from("time,status");
    for k in 1..=data.p() {
        out.push_str(&format!(",z{k}"));
    }
    out.push('\n');
    let z = data.covariates();
    for i in 0..data.n() {
        out.push_str(&fmt_real(data.times()[i]));
        out.push_str(if data.status()[i] { ",1" } else { ",0" });
        for v in z.row(i) {
            out.push(',');
            out.push_str(&fmt_real(*v));
        }
        out.push('\n');
    }
    out
}

pub fn write_dataset(path: &Path, data: &SurvivalDataset) -> Result<()> {
    fs::write(path, dataset_to_csv(data))?;
    Ok(())
}

/// Flat key-value scenario file (TOML syntax).
///
/// ```toml
/// model = "cox"            # cox | nonlinear | transformation
/// n = 200
/// p = 2000
/// censoring = "random"     # random | informative
/// target_cr = 0.2
/// rho = 0.8                # optional, model default otherwise
/// seed = 1
/// replications = 50
/// method = "hsic"          # optional: hsic | dc
/// log_time = false         # optional
/// calibration_samples = 100000  # optional
/// ```
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    model: String,
    n: Option<usize>,
    p: usize,
    censoring: String,
    target_cr: f64,
    rho: Option<f64>,
    seed: u64,
    replications: Option<usize>,
    method: Option<String>,
    log_time: Option<bool>,
    calibration_samples: Option<usize>,
}

/// A scenario as loaded from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: SimScenario,
    pub replications: usize,
    pub method: Method,
}

pub fn parse_scenario(text: &str) -> Result<ScenarioConfig> {
    let f: ScenarioFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let model: Model = f.model.parse()?;
    let censoring: CensoringCase = f.censoring.parse()?;
    let mut scenario = SimScenario::new(model, f.p, censoring, f.target_cr, f.seed);
    if let Some(n) = f.n {
        scenario.n = n;
    }
    if let Some(rho) = f.rho {
        scenario.rho = rho;
    }
    scenario.log_time = f.log_time.unwrap_or(false);
    scenario.n_cal = f.calibration_samples.unwrap_or(DEFAULT_CALIBRATION_SAMPLES);
    scenario.validate()?;
    let method = match f.method {
        Some(m) => m.parse()?,
        None => Method::Hsic,
    };
    let replications = f.replications.unwrap_or(1);
    if replications == 0 {
        return Err(Error::Config("replications must be at least 1".into()));
    }
    Ok(ScenarioConfig {
        scenario,
        replications,
        method,
    })
}

pub fn scenario_to_string(cfg: &ScenarioConfig) -> String {
    let s = &cfg.scenario;
    format!(
        "model = \"{}\"\nn = {}\np = {}\ncensoring = \"{}\"\ntarget_cr = {}\nrho = {}\nseed = {}\n\
         replications = {}\nmethod = \"{}\"\nlog_time = {}\ncalibration_samples = {}\n",
        s.model,
        s.n,
        s.p,
        s.censoring,
        fmt_real(s.target_cr),
        fmt_real(s.rho),
        s.seed,
        cfg.replications,
        cfg.method,
        s.log_time,
        s.n_cal
    )
}

const RECORD_HEADER: &str = "scenario_id,method,rep,n,p,s,realized_cr,active_ranks";

/// One row per replication. `active_ranks` lists `covariate:rank` pairs
/// (both 1-based) separated by spaces.
pub fn records_to_csv(records: &[ReplicationRecord]) -> String {
    let mut out = String::from(RECORD_HEADER);
    out.push('\n');
    for r in records {
        let ranks: Vec<String> = r
            .active_ranks
            .iter()
            .map(|(k, pos)| format!("{}:{}", k + 1, pos))
            .collect();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.scenario_id,
            r.method,
            r.rep,
            r.n,
            r.p,
            r.s,
            fmt_real(r.realized_cr),
            ranks.join(" ")
        ));
    }
    out
}

fn parse_usize(field: &str, line: u64, column: usize) -> Result<usize> {
    field
        .parse::<usize>()
        .map_err(|_| parse_err(line, column, format!("'{field}' is not a non-negative integer")))
}

pub fn parse_records(bytes: &[u8]) -> Result<Vec<ReplicationRecord>> {
    let mut rdr = csv_reader(bytes);
    let mut rows = rdr.records();
    let header = match rows.next() {
        Some(r) => r.map_err(csv_err)?,
        None => return Err(parse_err(1, 1, "empty records file")),
    };
    let expected: Vec<&str> = RECORD_HEADER.split(',').collect();
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(parse_err(1, 1, format!("header must be '{RECORD_HEADER}'")));
    }
    let mut out = Vec::new();
    for rec in rows {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != expected.len() {
            return Err(parse_err(
                line,
                rec.len().min(expected.len()) + 1,
                format!("expected {} fields, found {}", expected.len(), rec.len()),
            ));
        }
        let method: Method = rec[1]
            .parse()
            .map_err(|_| parse_err(line, 2, format!("unknown method '{}'", &rec[1])))?;
        let p = parse_usize(&rec[4], line, 5)?;
        let mut active_ranks = Vec::new();
        for pair in rec[7].split_whitespace() {
            let (k, pos) = pair
                .split_once(':')
                .ok_or_else(|| parse_err(line, 8, format!("bad pair '{pair}'")))?;
            let k = parse_usize(k, line, 8)?;
            let pos = parse_usize(pos, line, 8)?;
            if k == 0 || k > p || pos == 0 || pos > p {
                return Err(parse_err(line, 8, format!("pair '{pair}' outside 1..={p}")));
            }
            active_ranks.push((k - 1, pos));
        }
        if active_ranks.is_empty() {
            return Err(parse_err(line, 8, "no active covariates"));
        }
        let s = parse_usize(&rec[5], line, 6)?;
        if s != active_ranks.iter().map(|r| r.1).max().unwrap_or(0) {
            return Err(parse_err(line, 6, "S disagrees with the active ranks"));
        }
        out.push(ReplicationRecord {
            scenario_id: rec[0].to_string(),
            method,
            rep: parse_usize(&rec[2], line, 3)?,
            n: parse_usize(&rec[3], line, 4)?,
            p,
            s,
            realized_cr: parse_f64(&rec[6], line, 7)?,
            active_ranks,
        });
    }
    if out.is_empty() {
        return Err(Error::EmptyRecords);
    }
    Ok(out)
}

/// Summary table: median and IQR of `S`, `P_e` per active covariate and
/// `P_a`. `P_e` columns cover the union of active sets; cells for
/// covariates outside a row's active set are empty.
pub fn summary_to_csv(summaries: &[EvalSummary]) -> String {
    let active: BTreeSet<usize> = summaries
        .iter()
        .flat_map(|s| s.p_e.keys().copied())
        .collect();
    let mut out = String::from("scenario_id,method,replications,d_n,med,iqr,q1,q3");
    for k in &active {
        out.push_str(&format!(",pe_z{}", k + 1));
    }
    out.push_str(",pa\n");
    for s in summaries {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}",
            s.scenario_id,
            s.method,
            s.replications,
            s.d_n,
            fmt_real(s.s_median),
            fmt_real(s.s_iqr),
            fmt_real(s.s_q1),
            fmt_real(s.s_q3)
        ));
        for k in &active {
            out.push(',');
            if let Some(v) = s.p_e.get(k) {
                out.push_str(&format!("{v:.3}"));
            }
        }
        out.push_str(&format!(",{:.3}\n", s.p_a));
    }
    out
}

/// Screening output sorted by rank: `covariate,utility,rank,selected`.
pub fn screen_result_to_csv(result: &ScreenResult) -> String {
    let mut out = String::from("covariate,utility,rank,selected\n");
    for (r, &k) in result.ranking.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            k + 1,
            fmt_real(result.omega[k]),
            r + 1,
            u8::from(r < result.d_n)
        ));
    }
    out
}

/// Ordered `key = value` metadata written next to every result file. The
/// `created_unix` line is the only field that differs between re-runs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunManifest {
    entries: Vec<(String, String)>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        let mut m = RunManifest::default();
        m.set("tool", env!("CARGO_PKG_NAME"));
        m.set("tool_version", env!("CARGO_PKG_VERSION"));
        m.set("command", command);
        m
    }

    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Renders the manifest without a timestamp.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(&format!("{k} = \"{}\"\n", v.replace('\\', "\\\\").replace('"', "\\\"")));
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let created = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let mut f = fs::File::create(path)?;
        f.write_all(self.render().as_bytes())?;
        writeln!(f, "created_unix = \"{created}\"")?;
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut m = RunManifest::default();
        for (k, v) in table {
            let v = match v {
                toml::Value::String(s) => s,
                other => other.to_string(),
            };
            m.entries.push((k, v));
        }
        Ok(m)
    }
}
