use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use robustprice::domain::{RATE_ABS_TOL, SLOPE_REL_TOL};
use robustprice::maximin::LP_GAP_TOL;
use robustprice::robust_eval::{DOMINANCE_TOL, WEIGHT_SUM_TOL};
use robustprice::PricingError;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const OUT_DIR_ENV: &str = "ROBUSTPRICE_OUT_DIR";

/// Fixed-point decimal with 12 significant digits; empty for missing values.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let exponent = x.abs().log10().floor() as i32;
    let decimals = (11 - exponent).max(0) as usize;
    format!("{x:.decimals$}")
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

pub fn output_dir(flag: Option<&Path>) -> PathBuf {
    match flag {
        Some(p) => p.to_path_buf(),
        None => std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(".")),
    }
}

/// Everything needed to rerun a study, plus how far it got.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub study: String,
    pub version: String,
    pub config: serde_json::Value,
    pub columns: Vec<String>,
    pub cells: usize,
    pub rows_written: usize,
    pub tolerances: BTreeMap<String, f64>,
}

impl Manifest {
    pub fn new(study: &str, config: serde_json::Value, columns: &[&str], cells: usize) -> Self {
        let tolerances = [
            ("dominance", DOMINANCE_TOL),
            ("lp_gap", LP_GAP_TOL),
            ("rate_abs", RATE_ABS_TOL),
            ("slope_rel", SLOPE_REL_TOL),
            ("weight_sum", WEIGHT_SUM_TOL),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        Self {
            study: study.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            cells,
            rows_written: 0,
            tolerances,
        }
    }

    fn same_run(&self, other: &Manifest) -> bool {
        self.study == other.study
            && self.version == other.version
            && self.config == other.config
            && self.columns == other.columns
            && self.cells == other.cells
    }
}

/// Streams one CSV row per study cell, in cell order, and keeps the manifest's
/// row count current so an interrupted run resumes where it stopped.
///
/// Per-row wall-clock times go to a separate `<study>.runtime.csv` so that the
/// main table stays byte-identical across runs.
pub struct StudyWriter {
    manifest: Manifest,
    manifest_path: PathBuf,
    rows: csv::Writer<File>,
    runtime: csv::Writer<File>,
}

impl StudyWriter {
    pub fn open(dir: &Path, manifest: Manifest) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let csv_path = dir.join(format!("{}.csv", manifest.study));
        let runtime_path = dir.join(format!("{}.runtime.csv", manifest.study));
        let manifest_path = dir.join(format!("{}.manifest.json", manifest.study));

        let previous = fs::read_to_string(&manifest_path).ok().and_then(|s| serde_json::from_str::<Manifest>(&s).ok());
        let resume = previous
            .filter(|prev| prev.same_run(&manifest) && prev.rows_written <= manifest.cells)
            .map(|prev| prev.rows_written)
            .filter(|&done| line_count(&csv_path) > done && line_count(&runtime_path) > done);

        let mut manifest = manifest;
        let (rows, runtime) = match resume {
            Some(done) => {
                log::info!("resuming {} after {done} of {} rows", manifest.study, manifest.cells);
                truncate_lines(&csv_path, done + 1)?;
                truncate_lines(&runtime_path, done + 1)?;
                manifest.rows_written = done;
                (append_writer(&csv_path)?, append_writer(&runtime_path)?)
            }
            None => {
                let mut rows = create_writer(&csv_path)?;
                rows.write_record(&manifest.columns).map_err(|e| CliError::csv(&csv_path, e))?;
                let mut runtime = create_writer(&runtime_path)?;
                runtime.write_record(["row", "seconds"]).map_err(|e| CliError::csv(&runtime_path, e))?;
                (rows, runtime)
            }
        };
        let mut writer = Self { manifest, manifest_path, rows, runtime };
        writer.checkpoint()?;
        Ok(writer)
    }

    pub fn rows_written(&self) -> usize {
        self.manifest.rows_written
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    fn write_row(&mut self, fields: &[String], seconds: f64) -> Result<(), CliError> {
        if fields.len() != self.manifest.columns.len() {
            return Err(CliError::Input(format!(
                "row has {} fields, expected {}",
                fields.len(),
                self.manifest.columns.len()
            )));
        }
        let row = self.manifest.rows_written;
        self.rows.write_record(fields).map_err(|e| CliError::csv(&self.manifest_path, e))?;
        self.runtime
            .write_record([row.to_string(), format!("{seconds:.6}")])
            .map_err(|e| CliError::csv(&self.manifest_path, e))?;
        self.manifest.rows_written += 1;
        Ok(())
    }

    fn checkpoint(&mut self) -> Result<(), CliError> {
        self.rows.flush().map_err(|e| CliError::io(&self.manifest_path, e))?;
        self.runtime.flush().map_err(|e| CliError::io(&self.manifest_path, e))?;
        let tmp = self.manifest_path.with_extension("json.tmp");
        let text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        fs::write(&tmp, text + "\n").map_err(|e| CliError::io(&tmp, e))?;
        fs::rename(&tmp, &self.manifest_path).map_err(|e| CliError::io(&self.manifest_path, e))
    }

    /// Evaluates the cells not yet written, in parallel batches, writing rows
    /// in cell order through this single writer.
    pub fn run<C, F>(&mut self, cells: &[C], eval: F) -> Result<(), CliError>
    where
        C: Sync,
        F: Fn(&C) -> Result<Vec<String>, PricingError> + Sync,
    {
        let batch = 2 * rayon::current_num_threads().max(1);
        let start = self.manifest.rows_written.min(cells.len());
        for block in cells[start..].chunks(batch) {
            let results: Vec<_> = block
                .par_iter()
                .map(|cell| {
                    let t = Instant::now();
                    let row = eval(cell);
                    (row, t.elapsed().as_secs_f64())
                })
                .collect();
            for (row, seconds) in results {
                match row {
                    Ok(fields) => self.write_row(&fields, seconds)?,
                    Err(e) => {
                        self.checkpoint()?;
                        return Err(e.into());
                    }
                }
            }
            self.checkpoint()?;
        }
        Ok(())
    }
}

fn create_writer(path: &Path) -> Result<csv::Writer<File>, CliError> {
    csv::Writer::from_path(path).map_err(|e| CliError::csv(path, e))
}

fn append_writer(path: &Path) -> Result<csv::Writer<File>, CliError> {
    let file = OpenOptions::new().append(true).open(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::WriterBuilder::new().has_headers(false).from_writer(file))
}

fn line_count(path: &Path) -> usize {
    File::open(path).map(|f| BufReader::new(f).lines().count()).unwrap_or(0)
}

/// Keeps the first `n` complete lines, dropping any partial tail.
fn truncate_lines(path: &Path, n: usize) -> Result<(), CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut keep = 0;
    for (i, (pos, _)) in text.match_indices('\n').enumerate() {
        if i == n {
            break;
        }
        keep = pos + 1;
    }
    fs::write(path, &text[..keep]).map_err(|e| CliError::io(path, e))
}
