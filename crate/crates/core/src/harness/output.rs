use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResultFormat {
    /// First line `# <config json>`, then a header and one row per record.
    Csv,
    /// A single object `{"config": ..., "records": [...]}`.
    Json,
}

impl ResultFormat {
    /// Picks the format from the file extension; anything but `.json` is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => ResultFormat::Json,
            _ => ResultFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsFile<C, R> {
    pub config: C,
    pub records: Vec<R>,
}

fn csv_err(path: &Path, source: csv::Error) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes the records with the config that produced them. Output is a pure
/// function of its inputs, so equal runs give byte-identical files.
pub fn emit_results<C: Serialize, R: Serialize>(
    path: &Path,
    format: ResultFormat,
    config: &C,
    records: &[R],
) -> Result<()> {
    if records.is_empty() {
        return Err(Error::invalid("refusing to write an empty result set"));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    match format {
        ResultFormat::Json => {
            serde_json::to_writer_pretty(
                &mut out,
                &serde_json::json!({ "config": config, "records": records }),
            )?;
            out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        ResultFormat::Csv => {
            writeln!(out, "# {}", serde_json::to_string(config)?)
                .map_err(|e| Error::io(path, e))?;
            let mut w = csv::Writer::from_writer(&mut out);
            for r in records {
                w.serialize(r).map_err(|e| csv_err(path, e))?;
            }
            w.flush().map_err(|e| Error::io(path, e))?;
        }
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Reads a CSV written by [`emit_results`].
pub fn read_results_csv<C: DeserializeOwned, R: DeserializeOwned>(
    path: &Path,
) -> Result<ResultsFile<C, R>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut first = String::new();
    BufReader::new(file)
        .read_line(&mut first)
        .map_err(|e| Error::io(path, e))?;
    let json = first
        .strip_prefix("# ")
        .ok_or_else(|| Error::invalid(format!("{}: missing config line", path.display())))?;
    let config = serde_json::from_str(json.trim_end())?;
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let records = rdr
        .deserialize()
        .collect::<std::result::Result<Vec<R>, _>>()
        .map_err(|e| csv_err(path, e))?;
    Ok(ResultsFile { config, records })
}

pub fn read_results_json<C: DeserializeOwned, R: DeserializeOwned>(
    path: &Path,
) -> Result<ResultsFile<C, R>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::AttackKind;
    use crate::defense::DefenseKind;
    use crate::harness::{FullyOnlineRunRecord, FullyOnlineSweep};

    fn records() -> Vec<FullyOnlineRunRecord> {
        let base = FullyOnlineRunRecord {
            dataset: "toy".into(),
            defense: DefenseKind::Slab,
            retention: 0.5,
            tau: Some(0.123456789012345),
            attack: AttackKind::Greedy,
            budget_fraction: 0.1,
            horizon: 10,
            poison_count: 1,
            seed: 3,
            online_error: Some(1.0 / 3.0),
            offline_optimal_error: None,
            skipped: Some(0),
            error: None,
        };
        let mut failed = base.clone();
        failed.online_error = None;
        failed.error = Some("infeasible, \"quoted\"".into());
        vec![base, failed]
    }

    #[test]
    fn csv_and_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = FullyOnlineSweep::default();
        for (name, fmt) in [("r.csv", ResultFormat::Csv), ("r.json", ResultFormat::Json)] {
            let p = dir.path().join(name);
            assert_eq!(ResultFormat::from_path(&p), fmt);
            emit_results(&p, fmt, &cfg, &records()).unwrap();
            let back: ResultsFile<FullyOnlineSweep, FullyOnlineRunRecord> = match fmt {
                ResultFormat::Csv => read_results_csv(&p).unwrap(),
                ResultFormat::Json => read_results_json(&p).unwrap(),
            };
            assert_eq!(back.config, cfg);
            assert_eq!(back.records, records());
        }
    }

    #[test]
    fn empty_and_unwritable() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = FullyOnlineSweep::default();
        let none: Vec<FullyOnlineRunRecord> = Vec::new();
        assert!(emit_results(&dir.path().join("e.csv"), ResultFormat::Csv, &cfg, &none).is_err());
        let bad = dir.path().join("missing").join("r.csv");
        let err = emit_results(&bad, ResultFormat::Csv, &cfg, &records()).unwrap_err();
        assert!(err.to_string().contains("missing"), "{err}");
    }
}
