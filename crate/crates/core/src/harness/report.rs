use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::benchmark::{CellResult, CellStatus, ResultTable};
use super::search::Hyperparams;
use crate::cells::CellKind;
use crate::error::{Error, Result};
use crate::optim::TrainerKind;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
    Markdown,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "markdown" | "md" => Ok(Format::Markdown),
            other => Err(Error::config(format!("unknown format {other:?}"))),
        }
    }
}

/// Flat CSV row; hyperparameters are packed as `name=value;...`.
#[derive(Serialize, Deserialize)]
struct CsvRow {
    architecture: CellKind,
    trainer: TrainerKind,
    status: CellStatus,
    test_mse: Option<f64>,
    normalised_mse: Option<f64>,
    val_mse: Option<f64>,
    hyperparameters: String,
    forward_passes: u64,
    budget: u64,
    note: Option<String>,
}

const CSV_HEADER: &str = "architecture,trainer,status,test_mse,normalised_mse,val_mse,hyperparameters,forward_passes,budget,note";

pub fn emit_results<W: Write>(table: &ResultTable, format: Format, mut out: W) -> Result<()> {
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, table)?;
            out.write_all(b"\n")?;
        }
        Format::Csv => {
            if table.cells.is_empty() {
                writeln!(out, "{CSV_HEADER}")?;
                return Ok(());
            }
            let mut w = csv::Writer::from_writer(out);
            for c in &table.cells {
                w.serialize(CsvRow {
                    architecture: c.architecture,
                    trainer: c.trainer,
                    status: c.status,
                    test_mse: c.test_mse,
                    normalised_mse: c.normalised_mse,
                    val_mse: c.val_mse,
                    hyperparameters: c.hyperparameters.to_string(),
                    forward_passes: c.forward_passes,
                    budget: c.budget,
                    note: c.note.clone(),
                })?;
            }
            w.flush()?;
        }
        Format::Markdown => out.write_all(render_markdown(table).as_bytes())?,
    }
    Ok(())
}

pub fn read_results_json<R: Read>(reader: R) -> Result<ResultTable> {
    Ok(serde_json::from_reader(reader)?)
}

pub fn read_results_csv<R: Read>(reader: R) -> Result<ResultTable> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut cells = Vec::new();
    for row in rdr.deserialize() {
        let row: CsvRow = row?;
        cells.push(CellResult {
            architecture: row.architecture,
            trainer: row.trainer,
            status: row.status,
            test_mse: row.test_mse,
            normalised_mse: row.normalised_mse,
            val_mse: row.val_mse,
            hyperparameters: row.hyperparameters.parse::<Hyperparams>()?,
            forward_passes: row.forward_passes,
            budget: row.budget,
            note: row.note,
            wall_time_secs: 0.0,
        });
    }
    Ok(ResultTable { cells })
}

/// Architectures as rows, trainers as columns. Shows normalised MSEs when
/// every finite cell has one, raw test MSEs otherwise.
pub fn render_markdown(table: &ResultTable) -> String {
    let mut archs: Vec<CellKind> = Vec::new();
    let mut trainers: Vec<TrainerKind> = Vec::new();
    for c in &table.cells {
        if !archs.contains(&c.architecture) {
            archs.push(c.architecture);
        }
        if !trainers.contains(&c.trainer) {
            trainers.push(c.trainer);
        }
    }
    archs.sort();
    trainers.sort();
    let normalised = table.cells.iter().all(|c| c.test_mse.is_none() || c.normalised_mse.is_some());
    let mut s = String::new();
    let _ = write!(s, "| {} |", if normalised { "Normalised MSE" } else { "Test MSE" });
    for t in &trainers {
        let _ = write!(s, " {} |", t.label());
    }
    s.push_str("\n|---|");
    for _ in &trainers {
        s.push_str("---:|");
    }
    s.push('\n');
    let mut notes: Vec<String> = Vec::new();
    for a in &archs {
        let _ = write!(s, "| {} |", a.label());
        for t in &trainers {
            let text = match table.get(*a, *t) {
                None => "".to_string(),
                Some(c) => match c.status {
                    CellStatus::NotImplemented => "n/a".to_string(),
                    CellStatus::Diverged => {
                        notes.push(format!("{} + {}: {}", a.label(), t.label(), c.note.as_deref().unwrap_or("diverged")));
                        format!("div.[^{}]", notes.len())
                    }
                    CellStatus::Ok => {
                        let v = if normalised { c.normalised_mse } else { c.test_mse };
                        v.map(|v| format!("{v:.3}")).unwrap_or_default()
                    }
                },
            };
            let _ = write!(s, " {text} |");
        }
        s.push('\n');
    }
    if !notes.is_empty() {
        s.push('\n');
        for (i, n) in notes.iter().enumerate() {
            let _ = writeln!(s, "[^{}]: {n}", i + 1);
        }
    }
    s
}
