//! On-disk artifacts of the offline pipeline.
//!
//! A database directory holds `manifest.json`, one `entry_NNN.json` per
//! entry, optionally `family.json` (when generated from the synthetic
//! family), and the derived `pod.json` and `gsm.json`. Each derived file
//! records the hashes of the artifacts it was computed from, and loading
//! refuses a file whose recorded hashes no longer match.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::alignment::{AlignedDatabase, AlignmentTransform, GsmTransform};
use crate::domain::{Domain, ResponseSurface, SampleSet};
use crate::error::{Error, Result};
use crate::gappy::{FitKind, GenericSurrogateModel};
use crate::kriging::{build_kriging, CorrelationConfig, RegressionBasis};
use crate::pod::{PodBasis, PodVariant};
use crate::testbed::{FamilyMember, SyntheticDatabase};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const FAMILY_FILE: &str = "family.json";
pub const POD_FILE: &str = "pod.json";
pub const GSM_FILE: &str = "gsm.json";

/// Hex SHA-256 digest.
pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of a value's canonical JSON form.
pub fn value_hash<T: Serialize>(value: &T) -> Result<String> {
    Ok(content_hash(&to_json(value)?))
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::Format {
        what: "json".into(),
        message: e.to_string(),
    })?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Writes through a temporary sibling so readers never see half a file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, &to_json(value)?)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Format {
        what: path.display().to_string(),
        message: e.to_string(),
    })
}

/// How to rebuild one database entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EntryDescriptor {
    /// Closed-form member of the synthetic family.
    Family(FamilyMember),
    /// Scattered samples, interpolated by Kriging with the given correlation.
    Grid {
        samples: SampleSet,
        correlation: CorrelationConfig,
    },
}

impl EntryDescriptor {
    pub fn surface(&self) -> Result<Arc<dyn ResponseSurface>> {
        Ok(match self {
            Self::Family(m) => Arc::new(m.clone()),
            Self::Grid {
                samples,
                correlation,
            } => Arc::new(build_kriging(samples, RegressionBasis::Constant, correlation)?),
        })
    }
}

/// Result of the last alignment run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentRecord {
    pub delta: f64,
    pub quadrature_nodes: usize,
    pub ssd_before: f64,
    pub ssd_after: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub domain: Domain,
    pub extended_domain: Domain,
    pub m: usize,
    /// Entry file names, relative to the database directory.
    pub entries: Vec<String>,
    /// One parameter array per entry, identity until aligned.
    pub transforms: Vec<Vec<f64>>,
    pub alignment: Option<AlignmentRecord>,
    /// Hash of the configuration that generated the entries.
    pub config_hash: String,
}

pub fn entry_file_name(j: usize) -> String {
    format!("entry_{j:03}.json")
}

/// A database directory and its parsed manifest.
#[derive(Clone, Debug)]
pub struct DatabaseDir {
    pub root: PathBuf,
    pub manifest: Manifest,
}

impl DatabaseDir {
    /// Writes entries and an identity-transform manifest.
    pub fn create(
        root: &Path,
        domain: &Domain,
        entries: &[EntryDescriptor],
        config_hash: String,
    ) -> Result<Self> {
        if entries.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "database needs at least 2 entries, got {}",
                entries.len()
            )));
        }
        let names: Vec<String> = (0..entries.len()).map(entry_file_name).collect();
        for (name, e) in names.iter().zip(entries) {
            write_json(&root.join(name), e)?;
        }
        let identity = AlignmentTransform::identity(domain.dim()).params().to_vec();
        let manifest = Manifest {
            domain: domain.clone(),
            extended_domain: domain.inflate(crate::alignment::DEFAULT_INFLATION),
            m: entries.len(),
            entries: names,
            transforms: vec![identity; entries.len()],
            alignment: None,
            config_hash,
        };
        let dir = Self {
            root: root.to_path_buf(),
            manifest,
        };
        dir.save_manifest()?;
        // Derived artifacts of an older database are now stale anyway.
        for f in [POD_FILE, GSM_FILE] {
            let p = root.join(f);
            if p.exists() {
                fs::remove_file(&p).map_err(|e| Error::io(&p, e))?;
            }
        }
        Ok(dir)
    }

    /// Synthetic-family database plus its `family.json`.
    pub fn create_from_family(root: &Path, family: &SyntheticDatabase) -> Result<Self> {
        let entries: Vec<EntryDescriptor> = family
            .members
            .iter()
            .cloned()
            .map(EntryDescriptor::Family)
            .collect();
        let config_hash = value_hash(&family.config)?;
        write_json(&root.join(FAMILY_FILE), family)?;
        Self::create(root, &crate::testbed::family_domain(), &entries, config_hash)
    }

    pub fn open(root: &Path) -> Result<Self> {
        let manifest: Manifest = read_json(&root.join(MANIFEST_FILE))?;
        if manifest.entries.len() != manifest.m || manifest.transforms.len() != manifest.m {
            return Err(Error::Format {
                what: MANIFEST_FILE.into(),
                message: format!(
                    "m = {} but {} entries and {} transforms",
                    manifest.m,
                    manifest.entries.len(),
                    manifest.transforms.len()
                ),
            });
        }
        Ok(Self {
            root: root.to_path_buf(),
            manifest,
        })
    }

    pub fn save_manifest(&self) -> Result<()> {
        write_json(&self.root.join(MANIFEST_FILE), &self.manifest)
    }

    pub fn family(&self) -> Result<SyntheticDatabase> {
        read_json(&self.root.join(FAMILY_FILE))
    }

    pub fn entry(&self, j: usize) -> Result<EntryDescriptor> {
        read_json(&self.root.join(&self.manifest.entries[j]))
    }

    /// Digest of the manifest and every entry file, in order.
    pub fn hash(&self) -> Result<String> {
        let mut h = Sha256::new();
        h.update(to_json(&self.manifest)?);
        for name in &self.manifest.entries {
            let p = self.root.join(name);
            h.update(fs::read(&p).map_err(|e| Error::io(&p, e))?);
        }
        Ok(hex::encode(h.finalize()))
    }

    /// The entries under the manifest's transforms.
    pub fn database(&self) -> Result<AlignedDatabase> {
        let entries = (0..self.manifest.m)
            .map(|j| self.entry(j)?.surface())
            .collect::<Result<Vec<_>>>()?;
        let transforms = self
            .manifest
            .transforms
            .iter()
            .map(|q| AlignmentTransform::from_params(q.clone()))
            .collect::<Result<Vec<_>>>()?;
        AlignedDatabase::new(entries, self.manifest.domain.clone())?
            .with_extended_domain(self.manifest.extended_domain.clone())?
            .with_transforms(transforms)
    }

    /// Records new transforms; derived artifacts become stale through the
    /// changed database hash.
    pub fn set_alignment(&mut self, db: &AlignedDatabase, record: AlignmentRecord) -> Result<()> {
        self.manifest.transforms = db.transforms().iter().map(|q| q.params().to_vec()).collect();
        self.manifest.alignment = Some(record);
        self.save_manifest()
    }

    pub fn pod_path(&self) -> PathBuf {
        self.root.join(POD_FILE)
    }

    pub fn gsm_path(&self) -> PathBuf {
        self.root.join(GSM_FILE)
    }
}

fn check_hash(artifact: &str, expected: &str, found: &str) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Stale {
            artifact: artifact.into(),
            expected: expected.into(),
            found: found.into(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PodFile {
    /// All `m` eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// Retained eigenvectors, one array of length `m` per mode.
    pub vectors: Vec<Vec<f64>>,
    pub threshold: f64,
    pub rank: usize,
    pub variant: PodVariant,
    pub quadrature_nodes: usize,
    pub database_hash: String,
}

impl PodFile {
    pub fn new(basis: &PodBasis, quadrature_nodes: usize, database_hash: String) -> Self {
        Self {
            eigenvalues: basis.eigenvalues().iter().copied().collect(),
            vectors: basis
                .vectors()
                .column_iter()
                .map(|c| c.iter().copied().collect())
                .collect(),
            threshold: basis.threshold(),
            rank: basis.rank(),
            variant: basis.variant(),
            quadrature_nodes,
            database_hash,
        }
    }

    pub fn basis(&self, db: AlignedDatabase) -> Result<PodBasis> {
        let m = self.eigenvalues.len();
        if self.vectors.len() != self.rank || self.vectors.iter().any(|v| v.len() != m) {
            return Err(Error::Format {
                what: POD_FILE.into(),
                message: format!("expected {} vectors of length {m}", self.rank),
            });
        }
        let flat: Vec<f64> = self.vectors.concat();
        PodBasis::from_parts(
            db,
            DVector::from_vec(self.eigenvalues.clone()),
            DMatrix::from_column_slice(m, self.rank, &flat),
            self.threshold,
            self.variant,
        )
    }
}

pub fn save_pod(dir: &DatabaseDir, basis: &PodBasis, quadrature_nodes: usize) -> Result<PodFile> {
    let file = PodFile::new(basis, quadrature_nodes, dir.hash()?);
    write_json(&dir.pod_path(), &file)?;
    Ok(file)
}

/// Loads `pod.json` over the current database, refusing a stale file.
pub fn load_pod(dir: &DatabaseDir) -> Result<PodBasis> {
    let file: PodFile = read_json(&dir.pod_path())?;
    check_hash(POD_FILE, &file.database_hash, &dir.hash()?)?;
    file.basis(dir.database()?)
}

fn pod_file_hash(dir: &DatabaseDir) -> Result<String> {
    let p = dir.pod_path();
    Ok(content_hash(&fs::read(&p).map_err(|e| Error::io(&p, e))?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GsmFile {
    pub a_psi: Vec<f64>,
    pub a_y: Vec<f64>,
    pub p: Vec<f64>,
    pub residual: f64,
    pub kind: FitKind,
    /// The samples the model was fitted to.
    pub samples: SampleSet,
    pub database_hash: String,
    pub pod_hash: String,
}

/// `basis` must be the basis stored in `pod.json`, possibly truncated.
pub fn save_gsm(dir: &DatabaseDir, gsm: &GenericSurrogateModel, samples: &SampleSet) -> Result<GsmFile> {
    let file = GsmFile {
        a_psi: gsm.a_psi().to_vec(),
        a_y: gsm.a_y().to_vec(),
        p: gsm.transform().params().to_vec(),
        residual: gsm.residual(),
        kind: gsm.kind(),
        samples: samples.clone(),
        database_hash: dir.hash()?,
        pod_hash: pod_file_hash(dir)?,
    };
    write_json(&dir.gsm_path(), &file)?;
    Ok(file)
}

/// Loads `gsm.json` and the samples it was fitted to.
pub fn load_gsm(dir: &DatabaseDir) -> Result<(GenericSurrogateModel, SampleSet)> {
    let file: GsmFile = read_json(&dir.gsm_path())?;
    check_hash(GSM_FILE, &file.database_hash, &dir.hash()?)?;
    check_hash(GSM_FILE, &file.pod_hash, &pod_file_hash(dir)?)?;
    let mut basis = load_pod(dir)?;
    if file.a_psi.len() < basis.rank() {
        basis = basis.truncated(file.a_psi.len())?;
    }
    let gsm = GenericSurrogateModel::from_parts(
        basis,
        file.a_psi,
        GsmTransform::from_params(file.p)?,
        file.residual,
        file.kind,
    )?;
    Ok((gsm, file.samples))
}

/// Points from a CSV with a header row and one coordinate per column.
pub fn read_points_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let fmt = |message: String| Error::Format {
        what: path.display().to_string(),
        message,
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| fmt(e.to_string()))?;
    reader
        .records()
        .map(|rec| {
            let rec = rec.map_err(|e| fmt(e.to_string()))?;
            rec.iter()
                .map(|v| v.trim().parse::<f64>().map_err(|e| fmt(format!("{v:?}: {e}"))))
                .collect()
        })
        .collect()
}

/// Samples from a CSV whose last column is the value.
pub fn read_samples_csv(path: &Path) -> Result<SampleSet> {
    let rows = read_points_csv(path)?;
    let mut points = Vec::with_capacity(rows.len());
    let mut values = Vec::with_capacity(rows.len());
    for mut row in rows {
        let v = row.pop().ok_or_else(|| Error::Format {
            what: path.display().to_string(),
            message: "empty row".into(),
        })?;
        points.push(row);
        values.push(v);
    }
    SampleSet::new(points, values)
}

pub fn samples_csv(samples: &SampleSet) -> String {
    let d = samples.dim();
    let mut out: String = (1..=d).map(|k| format!("x{k},")).collect();
    out.push_str("value\n");
    for (x, v) in samples.points().iter().zip(samples.values()) {
        for c in x {
            out.push_str(&format!("{c:e},"));
        }
        out.push_str(&format!("{v:e}\n"));
    }
    out
}
