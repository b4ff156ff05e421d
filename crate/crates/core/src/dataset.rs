//! Dataset container, CSV persistence and validation.
//!
//! The on-disk format is one CSV row per sample with the header
//! `current_vector_id,sensor_id,x_m,y_m,z_m,i1_A,...,i8_A,bx_T,by_T,bz_T`
//! plus a key-value sidecar (`<path>.meta`) carrying provenance.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{
    CurrentVector, FieldVector, Position, Sample, MAX_COIL_CURRENT_A, NUM_COILS, POWER_LIMIT_W,
};

pub const CSV_HEADER: &str = "current_vector_id,sensor_id,x_m,y_m,z_m,\
i1_A,i2_A,i3_A,i4_A,i5_A,i6_A,i7_A,i8_A,bx_T,by_T,bz_T";

/// Field-component bound used by validation, matching the scale of the
/// reference system (components stay within roughly +/-200 mT).
pub const FIELD_COMPONENT_BOUND_T: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub sensor_positions: BTreeMap<u32, Position>,
    pub n_current_vectors: u32,
    pub provenance: String,
}

impl Dataset {
    pub fn new(
        samples: Vec<Sample>,
        sensor_positions: BTreeMap<u32, Position>,
        n_current_vectors: u32,
        provenance: impl Into<String>,
    ) -> Self {
        Dataset {
            samples,
            sensor_positions,
            n_current_vectors,
            provenance: provenance.into(),
        }
    }

    /// Rebuild a dataset from bare samples, inferring the sensor map and
    /// current-vector count from the ids present.
    pub fn from_samples(samples: Vec<Sample>, provenance: impl Into<String>) -> Self {
        let mut sensor_positions = BTreeMap::new();
        let mut cv_ids = BTreeSet::new();
        for s in &samples {
            sensor_positions.entry(s.sensor_id).or_insert(s.position);
            cv_ids.insert(s.current_vector_id);
        }
        Dataset {
            samples,
            sensor_positions,
            n_current_vectors: cv_ids.len() as u32,
            provenance: provenance.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn current_vector_ids(&self) -> Vec<u32> {
        let ids: BTreeSet<u32> = self.samples.iter().map(|s| s.current_vector_id).collect();
        ids.into_iter().collect()
    }

    /// Keep only the samples whose current-vector id passes `keep`.
    pub fn filter_current_vectors(&self, keep: impl Fn(u32) -> bool) -> Dataset {
        let samples: Vec<Sample> = self
            .samples
            .iter()
            .filter(|s| keep(s.current_vector_id))
            .copied()
            .collect();
        let mut d = Dataset::from_samples(samples, self.provenance.clone());
        d.sensor_positions = self.sensor_positions.clone();
        d
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        writeln!(w, "{CSV_HEADER}").map_err(|e| Error::io(path, e))?;
        let mut line = String::with_capacity(256);
        for s in &self.samples {
            line.clear();
            write!(line, "{},{}", s.current_vector_id, s.sensor_id).unwrap();
            write!(line, ",{},{},{}", s.position.x, s.position.y, s.position.z).unwrap();
            for i in &s.currents.0 {
                write!(line, ",{i}").unwrap();
            }
            write!(line, ",{},{},{}", s.field.bx, s.field.by, s.field.bz).unwrap();
            writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Dataset> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let reader = BufReader::new(file);
        let mut lines = reader.lines().enumerate();

        let header = match lines.next() {
            Some((_, Ok(h))) => h,
            Some((_, Err(e))) => return Err(Error::io(path, e)),
            None => return Err(Error::EmptyDataset(path.display().to_string())),
        };
        if header.trim() != CSV_HEADER {
            return Err(Error::Parse {
                path: path.into(),
                line: 1,
                detail: format!("unexpected header: {header}"),
            });
        }

        let mut samples = Vec::new();
        for (idx, line) in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let parse = |field: &str| -> Result<f64> {
                field.parse::<f64>().map_err(|e| Error::Parse {
                    path: path.into(),
                    line: idx + 1,
                    detail: format!("bad float {field:?}: {e}"),
                })
            };
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 5 + NUM_COILS + 3 {
                return Err(Error::Parse {
                    path: path.into(),
                    line: idx + 1,
                    detail: format!("expected {} columns, got {}", 5 + NUM_COILS + 3, cols.len()),
                });
            }
            let cv_id: u32 = cols[0].parse().map_err(|e| Error::Parse {
                path: path.into(),
                line: idx + 1,
                detail: format!("bad current_vector_id: {e}"),
            })?;
            let sensor_id: u32 = cols[1].parse().map_err(|e| Error::Parse {
                path: path.into(),
                line: idx + 1,
                detail: format!("bad sensor_id: {e}"),
            })?;
            let position = Position::new(parse(cols[2])?, parse(cols[3])?, parse(cols[4])?);
            let mut currents = [0.0; NUM_COILS];
            for (k, c) in currents.iter_mut().enumerate() {
                *c = parse(cols[5 + k])?;
            }
            let field = FieldVector::new(
                parse(cols[5 + NUM_COILS])?,
                parse(cols[6 + NUM_COILS])?,
                parse(cols[7 + NUM_COILS])?,
            );
            samples.push(Sample {
                position,
                currents: CurrentVector(currents),
                field,
                sensor_id,
                current_vector_id: cv_id,
            });
        }

        let provenance = DatasetMeta::read(&meta_path(path))
            .map(|m| m.get("provenance").cloned().unwrap_or_default())
            .unwrap_or_else(|_| format!("file:{}", path.display()));
        Ok(Dataset::from_samples(samples, provenance))
    }
}

pub fn meta_path(csv_path: &Path) -> std::path::PathBuf {
    let mut p = csv_path.as_os_str().to_owned();
    p.push(".meta");
    p.into()
}

/// Key-value sidecar recording how a dataset file was produced.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetMeta(pub BTreeMap<String, String>);

impl DatasetMeta {
    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.0.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&String> {
        self.0.get(key)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for (k, v) in &self.0 {
            writeln!(out, "{k} = {v}").unwrap();
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<DatasetMeta> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut map = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: path.into(),
                line: idx + 1,
                detail: "expected `key = value`".into(),
            })?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(DatasetMeta(map))
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ColumnStats {
    pub name: String,
    pub min: f64,
    pub max: f64,
}

/// Validation outcome: pass/fail per check plus Table-I-style column ranges.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    pub column_stats: Vec<ColumnStats>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

/// Check component ranges, finiteness, the power constraint and completeness.
pub fn validate_dataset(d: &Dataset) -> ValidationReport {
    let mut checks = Vec::new();
    let mut push = |name: &str, passed: bool, detail: String| {
        checks.push(Check {
            name: name.to_string(),
            passed,
            detail,
        });
    };

    let finite = d
        .samples
        .iter()
        .all(|s| s.position.is_finite() && s.currents.is_finite() && s.field.is_finite());
    push("finite", finite, String::new());

    let n_over = d
        .samples
        .iter()
        .filter(|s| s.currents.i_max() > MAX_COIL_CURRENT_A + 1e-9)
        .count();
    push(
        "current_range",
        n_over == 0,
        format!("{n_over} samples exceed {MAX_COIL_CURRENT_A} A"),
    );

    // The power check uses the nominal per-coil resistance of the reference
    // system; currents are recorded post-measurement so a tiny slack covers
    // rounding.
    let n_power = d
        .samples
        .iter()
        .filter(|s| s.currents.power_of(1.53) > POWER_LIMIT_W + 1e-6)
        .count();
    push(
        "power_limit",
        n_power == 0,
        format!("{n_power} samples exceed {POWER_LIMIT_W} W"),
    );

    let n_field = d
        .samples
        .iter()
        .filter(|s| {
            s.field.bx.abs() > FIELD_COMPONENT_BOUND_T
                || s.field.by.abs() > FIELD_COMPONENT_BOUND_T
                || s.field.bz.abs() > FIELD_COMPONENT_BOUND_T
        })
        .count();
    push(
        "field_range",
        n_field == 0,
        format!(
            "{n_field} samples with a component beyond {} mT",
            FIELD_COMPONENT_BOUND_T * 1e3
        ),
    );

    let expected = d.n_current_vectors as usize * d.sensor_positions.len();
    push(
        "complete",
        d.samples.len() == expected,
        format!("{} samples, expected {expected}", d.samples.len()),
    );

    let mut seen = BTreeSet::new();
    let dup = d
        .samples
        .iter()
        .any(|s| !seen.insert((s.sensor_id, s.current_vector_id)));
    push("unique_pairs", !dup, String::new());

    let ids_ok = d
        .samples
        .iter()
        .all(|s| d.sensor_positions.contains_key(&s.sensor_id));
    push("sensor_ids_declared", ids_ok, String::new());

    // Sensor-array bounding box containment.
    let (mut lo, mut hi) = ([f64::INFINITY; 3], [f64::NEG_INFINITY; 3]);
    for p in d.sensor_positions.values() {
        for (a, v) in p.to_array().iter().enumerate() {
            lo[a] = lo[a].min(*v);
            hi[a] = hi[a].max(*v);
        }
    }
    let in_box = d.samples.iter().all(|s| {
        let p = s.position.to_array();
        (0..3).all(|a| p[a] >= lo[a] - 1e-9 && p[a] <= hi[a] + 1e-9)
    });
    push("positions_in_bounding_box", in_box, String::new());

    const N_COLS: usize = 3 + NUM_COILS + 3;
    let mut mins = [f64::INFINITY; N_COLS];
    let mut maxs = [f64::NEG_INFINITY; N_COLS];
    for s in &d.samples {
        let mut row = [0.0; N_COLS];
        row[..3].copy_from_slice(&s.position.to_array());
        row[3..3 + NUM_COILS].copy_from_slice(&s.currents.0);
        row[3 + NUM_COILS..].copy_from_slice(&s.field.to_array());
        for (c, v) in row.iter().enumerate() {
            mins[c] = mins[c].min(*v);
            maxs[c] = maxs[c].max(*v);
        }
    }
    let mut names: Vec<String> = vec!["x_m".into(), "y_m".into(), "z_m".into()];
    for k in 0..NUM_COILS {
        names.push(format!("i{}_A", k + 1));
    }
    names.extend(["bx_T".into(), "by_T".into(), "bz_T".into()]);
    let column_stats = names
        .into_iter()
        .zip(mins.iter().zip(maxs.iter()))
        .map(|(name, (&min, &max))| ColumnStats { name, min, max })
        .collect();

    ValidationReport {
        checks,
        column_stats,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(cv: u32, sensor: u32, i1: f64, bz: f64) -> Sample {
        let mut currents = [0.0; NUM_COILS];
        currents[0] = i1;
        Sample {
            position: Position::new(0.01 * sensor as f64, 0.0, 0.0),
            currents: CurrentVector(currents),
            field: FieldVector::new(0.0, 0.0, bz),
            sensor_id: sensor,
            current_vector_id: cv,
        }
    }

    fn tiny_dataset() -> Dataset {
        let mut samples = Vec::new();
        for cv in 0..3 {
            for sensor in 0..2 {
                samples.push(sample(cv, sensor, cv as f64, 1e-3 * cv as f64));
            }
        }
        Dataset::from_samples(samples, "test")
    }

    #[test]
    fn validate_accepts_in_range_data() {
        let report = validate_dataset(&tiny_dataset());
        assert!(report.passed(), "failures: {:?}", report.failures());
    }

    #[test]
    fn validate_rejects_over_current() {
        let mut d = tiny_dataset();
        d.samples[0].currents.0[0] = 36.0;
        let report = validate_dataset(&d);
        assert!(!report.passed());
        assert!(report.failures().iter().any(|c| c.name == "current_range"));
    }

    #[test]
    fn validate_accepts_paper_scale_field_ranges() {
        // Components like b_z in [-179.50, 183.89] mT stay inside the bound.
        let mut d = tiny_dataset();
        d.samples[0].field.bz = -0.17950;
        d.samples[1].field.bz = 0.18389;
        let report = validate_dataset(&d);
        assert!(report.passed(), "failures: {:?}", report.failures());
    }

    #[test]
    fn validate_flags_incomplete_dataset() {
        let mut d = tiny_dataset();
        d.samples.pop();
        let report = validate_dataset(&d);
        assert!(report.failures().iter().any(|c| c.name == "complete"));
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let d = tiny_dataset();
        d.write_csv(&path).unwrap();
        let back = Dataset::read_csv(&path).unwrap();
        assert_eq!(d.samples, back.samples);
        assert_eq!(d.sensor_positions, back.sensor_positions);
        assert_eq!(d.n_current_vectors, back.n_current_vectors);
    }

    #[test]
    fn csv_rejects_bad_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "a,b,c\n1,2,3\n").unwrap();
        assert!(Dataset::read_csv(&path).is_err());
    }

    #[test]
    fn meta_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv.meta");
        let mut m = DatasetMeta::default();
        m.set("provenance", "synthetic");
        m.set("seed", 42);
        m.write(&path).unwrap();
        let back = DatasetMeta::read(&path).unwrap();
        assert_eq!(m, back);
    }
}
