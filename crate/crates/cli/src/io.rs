use std::fs;
use std::path::{Path, PathBuf};

use cvkit::types::MatrixRepr;
use cvkit::{ComplexMatrix, SampleBatch, C64};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Loads inputs and hashes every byte it reads.
pub struct Inputs {
    hasher: Sha256,
}

impl Inputs {
    pub fn new(verb: &str, args: &impl Serialize, tolerances: &impl Serialize) -> Self {
        let mut hasher = Sha256::new();
        for part in [
            verb.as_bytes().to_vec(),
            serde_json::to_vec(args).unwrap_or_default(),
            serde_json::to_vec(tolerances).unwrap_or_default(),
        ] {
            hasher.update((part.len() as u64).to_le_bytes());
            hasher.update(&part);
        }
        Self { hasher }
    }

    fn record(&mut self, bytes: &[u8]) {
        self.hasher.update((bytes.len() as u64).to_le_bytes());
        self.hasher.update(bytes);
    }

    pub fn read_file(&mut self, path: &Path) -> Result<Vec<u8>, CliError> {
        let bytes = fs::read(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        self.record(&bytes);
        Ok(bytes)
    }

    /// Inline JSON when the argument starts with `[` or `{`, otherwise a file path.
    pub fn doc<T: DeserializeOwned>(&mut self, arg: &str, what: &str) -> Result<T, CliError> {
        let trimmed = arg.trim_start();
        let bytes = if trimmed.starts_with('[') || trimmed.starts_with('{') {
            let b = trimmed.as_bytes().to_vec();
            self.record(&b);
            b
        } else {
            self.read_file(Path::new(arg))?
        };
        serde_json::from_slice(&bytes).map_err(|e| CliError::Input(format!("{what}: {e}")))
    }

    pub fn matrix(&mut self, arg: &str, what: &str) -> Result<ComplexMatrix, CliError> {
        let repr: MatrixRepr = self.doc(arg, what)?;
        ComplexMatrix::try_from(repr).map_err(|e| CliError::Input(format!("{what}: {e}")))
    }

    /// Sample batch from `SampleBatch` JSON or from CSV with `re,im` column pairs.
    /// A sidecar `<stem>.json` next to a CSV file supplies the seed and source.
    pub fn samples(&mut self, path: &Path) -> Result<SampleBatch, CliError> {
        let bytes = self.read_file(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            return serde_json::from_slice(&bytes).map_err(|e| CliError::Input(format!("samples: {e}")));
        }
        let mut reader = csv::Reader::from_reader(bytes.as_slice());
        let width = reader.headers().map_err(|e| CliError::Input(format!("samples: {e}")))?.len();
        if width == 0 || width % 2 != 0 {
            return Err(CliError::Input(format!("samples: expected re,im column pairs, got {width} columns")));
        }
        let mut points = Vec::new();
        for row in reader.deserialize::<Vec<f64>>() {
            let row = row.map_err(|e| CliError::Input(format!("samples: {e}")))?;
            points.extend(row.chunks(2).map(|p| C64::new(p[0], p[1])));
        }
        let mut batch = SampleBatch::new(width / 2, points).map_err(|e| CliError::Input(format!("samples: {e}")))?;
        let side = sidecar_path(path);
        if side.exists() {
            let meta: Sidecar = serde_json::from_slice(&self.read_file(&side)?)
                .map_err(|e| CliError::Input(format!("sidecar: {e}")))?;
            batch.seed = meta.seed;
            batch.source = meta.source;
        }
        Ok(batch)
    }

    pub fn digest(self) -> String {
        self.hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Sidecar {
    pub modes: usize,
    pub count: usize,
    pub seed: Option<u64>,
    pub source: String,
    pub state: serde_json::Value,
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

/// Plot-ready table.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| CliError::Io(e.to_string());
        w.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
    }
}

pub fn samples_table(batch: &SampleBatch) -> Table {
    let header: Vec<String> = if batch.modes == 1 {
        vec!["re".into(), "im".into()]
    } else {
        (0..batch.modes).flat_map(|k| [format!("re_{k}"), format!("im_{k}")]).collect()
    };
    let rows = batch
        .rows()
        .map(|r| r.iter().flat_map(|z| [fmt_f64(z.re), fmt_f64(z.im)]).collect())
        .collect();
    Table { header, rows }
}

/// Shortest representation that parses back to the same value.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}
