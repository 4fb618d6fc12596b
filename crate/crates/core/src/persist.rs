//! Raw little-endian `f64` arrays with JSON sidecars.
//!
//! An artifact `stem` is stored as `stem.f64` (the samples) and
//! `stem.json` (a [`Sidecar`] carrying everything else). Both files are
//! written to a temporary name and renamed into place.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fields::{DetectorSet, GridSpec, IlluminationSet, ScalarField};
use crate::forward::{Cell, KGrid, Metadata, SeparatedData, SinogramData, SinogramMetadata, TimeGrid};
use crate::meanops::MeanData;
use crate::recon::Diagnostics;
use crate::xforms::{Sinogram, TimeSeries};
use crate::Point;

/// Hex SHA-256 of the canonical JSON encoding.
pub fn content_hash<T: Serialize + ?Sized>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("serializable value");
    format!("{:x}", Sha256::digest(&bytes))
}

fn bytes_hash(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar<M> {
    pub kind: String,
    pub dtype: String,
    pub len: usize,
    /// Order of the samples in the raw file.
    pub layout: String,
    pub data_sha256: String,
    pub config_hash: Option<String>,
    pub meta: M,
}

/// A value split into a flat `f64` payload and JSON metadata.
pub trait Persist: Sized {
    const KIND: &'static str;
    const LAYOUT: &'static str;
    type Meta: Serialize + DeserializeOwned;

    fn to_parts(&self) -> (Self::Meta, Vec<f64>);
    fn from_parts(meta: Self::Meta, values: Vec<f64>) -> Result<Self>;
}

pub fn raw_path(stem: &Path) -> PathBuf {
    with_suffix(stem, "f64")
}

pub fn sidecar_path(stem: &Path) -> PathBuf {
    with_suffix(stem, "json")
}

fn with_suffix(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

/// Writes `bytes` next to `path` and renames over it.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path)?;
    Ok(serde_json::from_slice(&bytes)?)
}

pub fn encode_f64(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn decode_f64(bytes: &[u8]) -> Result<Vec<f64>> {
    if bytes.len() % 8 != 0 {
        return Err(Error::Validation(format!("raw payload of {} bytes is not a whole number of f64", bytes.len())));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

/// Saves `value` as `stem.f64` + `stem.json`.
pub fn save<T: Persist>(value: &T, stem: &Path, config_hash: Option<&str>) -> Result<()> {
    let (meta, values) = value.to_parts();
    let raw = encode_f64(&values);
    let side = Sidecar {
        kind: T::KIND.into(),
        dtype: "f64le".into(),
        len: values.len(),
        layout: T::LAYOUT.into(),
        data_sha256: bytes_hash(&raw),
        config_hash: config_hash.map(str::to_owned),
        meta,
    };
    write_atomic(&raw_path(stem), &raw)?;
    write_json(&sidecar_path(stem), &side)
}

/// Loads an artifact written by [`save`], checking kind, length and digest.
pub fn load<T: Persist>(stem: &Path) -> Result<T> {
    let (value, _) = load_with_sidecar::<T>(stem)?;
    Ok(value)
}

/// As [`load`], also returning the stored config hash.
pub fn load_with_sidecar<T: Persist>(stem: &Path) -> Result<(T, Option<String>)> {
    let kind = peek_kind(stem)?;
    if kind != T::KIND {
        return Err(Error::Validation(format!("{} holds a {kind}, expected {}", stem.display(), T::KIND)));
    }
    let side: Sidecar<T::Meta> = read_json(&sidecar_path(stem))?;
    if side.dtype != "f64le" {
        return Err(Error::Validation(format!("unsupported dtype {}", side.dtype)));
    }
    let raw = fs::read(raw_path(stem))?;
    if bytes_hash(&raw) != side.data_sha256 {
        return Err(Error::Validation(format!("{}: payload digest mismatch", stem.display())));
    }
    let values = decode_f64(&raw)?;
    if values.len() != side.len {
        return Err(Error::Validation(format!("{}: expected {} samples, found {}", stem.display(), side.len, values.len())));
    }
    Ok((T::from_parts(side.meta, values)?, side.config_hash))
}

/// Kind recorded in the sidecar of `stem`.
pub fn peek_kind(stem: &Path) -> Result<String> {
    let v: serde_json::Value = read_json(&sidecar_path(stem))?;
    v.get("kind")
        .and_then(|k| k.as_str())
        .map(str::to_owned)
        .ok_or_else(|| Error::Validation(format!("{}: sidecar has no kind", stem.display())))
}

fn check_len(expected: usize, got: usize, what: &str) -> Result<()> {
    if expected != got {
        return Err(Error::Grid(format!("{what}: expected {expected} samples, got {got}")));
    }
    Ok(())
}

impl Persist for ScalarField {
    const KIND: &'static str = "scalar-field";
    const LAYOUT: &'static str = "row-major over grid axes, last axis fastest";
    type Meta = GridSpec;

    fn to_parts(&self) -> (GridSpec, Vec<f64>) {
        (self.grid.clone(), self.values.clone())
    }

    fn from_parts(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        ScalarField::new(grid, values)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSeriesMeta {
    pub t0: f64,
    pub dt: f64,
}

impl Persist for TimeSeries {
    const KIND: &'static str = "time-series";
    const LAYOUT: &'static str = "samples at t0 + n dt";
    type Meta = TimeSeriesMeta;

    fn to_parts(&self) -> (TimeSeriesMeta, Vec<f64>) {
        (TimeSeriesMeta { t0: self.t0, dt: self.dt }, self.samples.clone())
    }

    fn from_parts(m: TimeSeriesMeta, samples: Vec<f64>) -> Result<Self> {
        TimeSeries::new(m.t0, m.dt, samples)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanMeta {
    pub dim: usize,
    pub centers: Vec<Point>,
    pub radii: Vec<f64>,
}

impl Persist for MeanData {
    const KIND: &'static str = "mean-data";
    const LAYOUT: &'static str = "[center][radius]";
    type Meta = MeanMeta;

    fn to_parts(&self) -> (MeanMeta, Vec<f64>) {
        (MeanMeta { dim: self.dim, centers: self.centers.clone(), radii: self.radii.clone() }, self.values.clone())
    }

    fn from_parts(m: MeanMeta, values: Vec<f64>) -> Result<Self> {
        check_len(m.centers.len() * m.radii.len(), values.len(), "mean data")?;
        Ok(MeanData { dim: m.dim, centers: m.centers, radii: m.radii, values })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SinogramMeta {
    pub dim: usize,
    pub r: Vec<f64>,
    pub theta: Vec<Point>,
}

impl Persist for Sinogram {
    const KIND: &'static str = "sinogram";
    const LAYOUT: &'static str = "[theta][r]";
    type Meta = SinogramMeta;

    fn to_parts(&self) -> (SinogramMeta, Vec<f64>) {
        (SinogramMeta { dim: self.dim, r: self.r.clone(), theta: self.theta.clone() }, self.values.clone())
    }

    fn from_parts(m: SinogramMeta, values: Vec<f64>) -> Result<Self> {
        check_len(m.r.len() * m.theta.len(), values.len(), "sinogram")?;
        Ok(Sinogram { dim: m.dim, r: m.r, theta: m.theta, values })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeparatedMeta {
    pub dim: usize,
    pub integration_order: u8,
    pub times: TimeGrid,
    pub detectors: DetectorSet,
    pub cells: Vec<Cell>,
    pub metadata: Metadata,
}

impl Persist for SeparatedData {
    const KIND: &'static str = "separated-data";
    const LAYOUT: &'static str = "[cell][time]";
    type Meta = SeparatedMeta;

    fn to_parts(&self) -> (SeparatedMeta, Vec<f64>) {
        let meta = SeparatedMeta {
            dim: self.dim,
            integration_order: self.integration_order,
            times: self.times,
            detectors: self.detectors.clone(),
            cells: self.cells.clone(),
            metadata: self.metadata.clone(),
        };
        (meta, self.series.clone())
    }

    fn from_parts(m: SeparatedMeta, series: Vec<f64>) -> Result<Self> {
        check_len(m.cells.len() * m.times.n, series.len(), "separated data")?;
        Ok(SeparatedData {
            dim: m.dim,
            integration_order: m.integration_order,
            times: m.times,
            detectors: m.detectors,
            cells: m.cells,
            series,
            metadata: m.metadata,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SinogramDataMeta {
    pub dim: usize,
    pub illum: IlluminationSet,
    pub detectors: DetectorSet,
    pub k: KGrid,
    pub metadata: SinogramMetadata,
}

impl Persist for SinogramData {
    const KIND: &'static str = "sinogram-data";
    const LAYOUT: &'static str = "[detector][k][theta][r][re, im]";
    type Meta = SinogramDataMeta;

    fn to_parts(&self) -> (SinogramDataMeta, Vec<f64>) {
        let meta = SinogramDataMeta {
            dim: self.dim,
            illum: self.illum.clone(),
            detectors: self.detectors.clone(),
            k: self.k,
            metadata: self.metadata.clone(),
        };
        (meta, self.values.iter().flat_map(|c| [c.re, c.im]).collect())
    }

    fn from_parts(m: SinogramDataMeta, raw: Vec<f64>) -> Result<Self> {
        let n = m.detectors.len() * m.k.len() * m.illum.theta_samples.len() * m.illum.r_samples.len();
        check_len(2 * n, raw.len(), "sinogram data")?;
        let values = raw.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
        Ok(SinogramData { dim: m.dim, illum: m.illum, detectors: m.detectors, k: m.k, values, metadata: m.metadata })
    }
}

/// Writes `dir/q_hat`, `dir/f1_hat` and `dir/diagnostics.json`.
pub fn save_recon(
    dir: &Path,
    q_hat: &ScalarField,
    f1_hat: &ScalarField,
    diagnostics: &Diagnostics,
    config_hash: Option<&str>,
) -> Result<()> {
    save(q_hat, &dir.join("q_hat"), config_hash)?;
    save(f1_hat, &dir.join("f1_hat"), config_hash)?;
    write_json(&dir.join("diagnostics.json"), &Report { config_hash: config_hash.map(str::to_owned), diagnostics: diagnostics.clone() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config_hash: Option<String>,
    pub diagnostics: Diagnostics,
}

pub fn load_recon(dir: &Path) -> Result<(ScalarField, ScalarField, Diagnostics)> {
    let q = load(&dir.join("q_hat"))?;
    let f1 = load(&dir.join("f1_hat"))?;
    let r: Report = read_json(&dir.join("diagnostics.json"))?;
    Ok((q, f1, r.diagnostics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn field() -> ScalarField {
        let g = GridSpec::cube(2, 5, 1.0);
        let v = (0..g.len()).map(|i| (i as f64 * 0.37).sin() * 1e-7 + i as f64).collect();
        ScalarField::new(g, v).unwrap()
    }

    #[test]
    fn field_round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let f = field();
        save(&f, &dir.path().join("f"), Some("abc")).unwrap();
        let (g, h): (ScalarField, _) = load_with_sidecar(&dir.path().join("f")).unwrap();
        assert_eq!(g, f);
        assert_eq!(h.as_deref(), Some("abc"));
        assert!(!dir.path().read_dir().unwrap().any(|e| e.unwrap().file_name().to_string_lossy().contains(".tmp")));
    }

    #[test]
    fn wrong_kind_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        save(&field(), &dir.path().join("f"), None).unwrap();
        assert!(matches!(load::<TimeSeries>(&dir.path().join("f")), Err(Error::Validation(_))));
    }

    #[test]
    fn corrupted_payload_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("f");
        save(&field(), &stem, None).unwrap();
        let mut raw = fs::read(raw_path(&stem)).unwrap();
        raw[3] ^= 1;
        fs::write(raw_path(&stem), raw).unwrap();
        assert!(load::<ScalarField>(&stem).is_err());
    }

    #[test]
    fn sidecar_rejects_unknown_keys() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("f");
        save(&field(), &stem, None).unwrap();
        let mut v: serde_json::Value = read_json(&sidecar_path(&stem)).unwrap();
        v["extra"] = serde_json::json!(1);
        write_json(&sidecar_path(&stem), &v).unwrap();
        assert!(load::<ScalarField>(&stem).is_err());
    }

    proptest! {
        #[test]
        fn f64_codec_is_lossless(v in proptest::collection::vec(any::<f64>(), 0..64)) {
            let back = decode_f64(&encode_f64(&v)).unwrap();
            prop_assert_eq!(back.len(), v.len());
            for (a, b) in back.iter().zip(&v) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }

        #[test]
        fn series_metadata_round_trips(t0 in -1e3..1e3f64, dt in 1e-6..10.0f64) {
            let dir = tempfile::tempdir().unwrap();
            let s = TimeSeries::new(t0, dt, vec![1.0, -2.5, 3.0]).unwrap();
            save(&s, &dir.path().join("s"), None).unwrap();
            prop_assert_eq!(load::<TimeSeries>(&dir.path().join("s")).unwrap(), s);
        }
    }
}
