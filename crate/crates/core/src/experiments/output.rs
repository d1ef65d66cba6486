//! Study records and persistence: `study.csv`, `fields/*.csv`, `manifest.json`.
//! Every file is staged in the output directory and renamed into place.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::discretization::Field;
use crate::error::{LabError, Result};

pub const STUDY_FILE: &str = "study.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const FIELDS_DIR: &str = "fields";

/// One `(experiment, epsilon)` result row.  Column names are frozen; empty
/// cells mean "not measured by this experiment".
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StudyRecord {
    pub experiment: String,
    pub epsilon: f64,
    pub geometry_hash: String,
    pub energy: Option<f64>,
    pub mult_ratio: Option<f64>,
    pub hausdorff_over_eps: Option<f64>,
    pub decay_slope: Option<f64>,
    pub index: Option<usize>,
    pub xi: Option<f64>,
    pub phi_sup: Option<f64>,
    pub orthogonality_residual: Option<f64>,
    /// Richardson extrapolate of the energy from the nested grid pair.
    pub energy_extrapolated: Option<f64>,
    /// Number of interfaces (nodal crossings).
    pub crossings: Option<usize>,
    /// Distance from the reference slice to the nearest crossing.
    pub nearest_interface: Option<f64>,
    /// `H` of the barrier row.
    pub mean_curvature: Option<f64>,
    /// Barrier rows: `min |Q(v_H)|`, negated when the sign certificate fails.
    /// Trap rows: smallest ordering margin over the ladder.
    pub barrier_margin: Option<f64>,
    pub trapped: Option<bool>,
    pub outcome: String,
    pub wall_time: f64,
    #[serde(skip)]
    pub field: Option<Field>,
}

impl StudyRecord {
    pub fn new(experiment: &str, epsilon: f64, geometry_hash: &str) -> Self {
        Self {
            experiment: experiment.to_string(),
            epsilon,
            geometry_hash: geometry_hash.to_string(),
            ..Self::default()
        }
    }

    /// File name of the persisted solution, relative to the output directory.
    pub fn field_path(&self) -> PathBuf {
        let name = match self.mean_curvature {
            Some(h) => format!("{}_eps{:.4}_H{:+.4}.csv", self.experiment, self.epsilon, h),
            None => format!("{}_eps{:.4}.csv", self.experiment, self.epsilon),
        };
        Path::new(FIELDS_DIR).join(name)
    }
}

pub fn records_to_csv(records: &[StudyRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if records.is_empty() {
        // header only, so consumers still see the frozen columns
        w.serialize(StudyRecord::default())?;
        let bytes = w.into_inner().map_err(|e| LabError::Io(e.into_error()))?;
        let header_end = bytes
            .iter()
            .position(|&b| b == b'\n')
            .map_or(bytes.len(), |i| i + 1);
        return Ok(bytes[..header_end].to_vec());
    }
    for r in records {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| LabError::Io(e.into_error()))
}

pub fn read_study(path: &Path) -> Result<Vec<StudyRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| LabError::Io(e.error))?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: RunConfig,
    pub geometry: String,
    pub files: Vec<String>,
    pub records: usize,
    /// Seconds per experiment and in total.
    pub timings: BTreeMap<String, f64>,
    /// Ladder-level fits (log-log slopes).
    pub fits: BTreeMap<String, f64>,
}

/// Output directory guarded against accidental overwrites.
#[derive(Debug, Clone)]
pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    pub fn prepare(root: &Path, force: bool) -> Result<Self> {
        if !force {
            for name in [STUDY_FILE, MANIFEST_FILE] {
                let p = root.join(name);
                if p.exists() {
                    return Err(LabError::OutputCollision(p));
                }
            }
        }
        std::fs::create_dir_all(root.join(FIELDS_DIR))?;
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Writes the CSV, every attached field and the manifest; returns the
    /// relative paths written.
    pub fn write_study(
        &self,
        records: &[StudyRecord],
        manifest: impl FnOnce(Vec<String>) -> Manifest,
    ) -> Result<Vec<String>> {
        let mut files = Vec::new();
        for r in records {
            if let Some(f) = &r.field {
                let rel = r.field_path();
                write_atomic(&self.root.join(&rel), f.to_csv().as_bytes())?;
                files.push(rel.to_string_lossy().into_owned());
            }
        }
        write_atomic(&self.root.join(STUDY_FILE), &records_to_csv(records)?)?;
        files.push(STUDY_FILE.to_string());
        let m = manifest(files.clone());
        write_atomic(
            &self.root.join(MANIFEST_FILE),
            serde_json::to_string_pretty(&m)?.as_bytes(),
        )?;
        files.push(MANIFEST_FILE.to_string());
        Ok(files)
    }
}
