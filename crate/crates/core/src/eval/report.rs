//! Plot-ready report writers: CSV tables (one row per model × stratum) and
//! a combined JSON summary. Field RMSE columns are rendered in millitesla;
//! everything else stays in SI units.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::net::EpochRecord;

use super::{AblationReport, ComponentMetrics, SpatialReport, StratifiedReport};

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn metric_cells(m: &ComponentMetrics) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        m.r2_x,
        m.r2_y,
        m.r2_z,
        m.r2_norm,
        m.rmse_x * 1e3,
        m.rmse_y * 1e3,
        m.rmse_z * 1e3,
        m.rmse_norm * 1e3
    )
}

pub const METRIC_COLUMNS: &str =
    "r2_x,r2_y,r2_z,r2_norm,rmse_x_mT,rmse_y_mT,rmse_z_mT,rmse_norm_mT";

/// Table II-style overall comparison: one row per model.
pub fn write_overall_csv(path: &Path, rows: &[(String, ComponentMetrics)]) -> Result<()> {
    let mut out = format!("model,{METRIC_COLUMNS}\n");
    for (model, m) in rows {
        writeln!(out, "{model},{}", metric_cells(m)).expect("string write");
    }
    write_text(path, &out)
}

/// Current-level stratification: one row per model × bin.
pub fn write_stratified_csv(path: &Path, report: &StratifiedReport) -> Result<()> {
    let mut out = format!("model,lo_A,hi_A,n_samples,low_confidence,{METRIC_COLUMNS}\n");
    for s in &report.strata {
        for (model, m) in &s.metrics {
            writeln!(
                out,
                "{model},{},{},{},{},{}",
                s.lo_a,
                s.hi_a,
                s.n_samples,
                s.low_confidence,
                metric_cells(m)
            )
            .expect("string write");
        }
    }
    write_text(path, &out)
}

/// Per-location MAPE map: one row per sensor. Undefined locations (no
/// usable samples) leave the MAPE cell empty.
pub fn write_spatial_csv(path: &Path, model: &str, report: &SpatialReport) -> Result<()> {
    let mut out = String::from("model,sensor_id,mape_percent,k,skipped\n");
    for (sensor, loc) in &report.per_sensor {
        let cell = if loc.defined {
            loc.mape_percent.to_string()
        } else {
            String::new()
        };
        writeln!(out, "{model},{sensor},{cell},{},{}", loc.k, loc.skipped).expect("string write");
    }
    write_text(path, &out)
}

/// Training-size ablation: one row per model × fraction.
pub fn write_ablation_csv(path: &Path, report: &AblationReport) -> Result<()> {
    let mut out = format!("model,fraction,n_train_samples,{METRIC_COLUMNS}\n");
    for r in &report.rows {
        writeln!(
            out,
            "{},{},{},{}",
            r.model,
            r.fraction,
            r.n_train_samples,
            metric_cells(&r.metrics)
        )
        .expect("string write");
    }
    write_text(path, &out)
}

/// Per-epoch training history.
pub fn write_history_csv(path: &Path, history: &[EpochRecord]) -> Result<()> {
    let mut out = String::from("epoch,train_mse,val_mse\n");
    for r in history {
        writeln!(out, "{},{},{}", r.epoch, r.train_mse, r.val_mse).expect("string write");
    }
    write_text(path, &out)
}

/// Combined machine-readable summary of any serializable report.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{LocationMape, StratumRecord};
    use std::collections::BTreeMap;

    fn sample_metrics() -> ComponentMetrics {
        ComponentMetrics {
            r2_x: 0.9,
            r2_y: 0.8,
            r2_z: 0.7,
            r2_norm: 0.95,
            rmse_x: 1e-3,
            rmse_y: 2e-3,
            rmse_z: 3e-3,
            rmse_norm: 2.5e-3,
        }
    }

    #[test]
    fn overall_csv_layout_and_millitesla_rendering() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("overall.csv");
        write_overall_csv(&path, &[("lmem".into(), sample_metrics())]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "model,r2_x,r2_y,r2_z,r2_norm,rmse_x_mT,rmse_y_mT,rmse_z_mT,rmse_norm_mT"
        );
        assert_eq!(lines.next().unwrap(), "lmem,0.9,0.8,0.7,0.95,1,2,3,2.5");
        assert_eq!(lines.next(), None);
    }

    #[test]
    fn reports_are_byte_identical_across_writes() {
        let dir = tempfile::tempdir().unwrap();
        let report = StratifiedReport {
            edges_a: vec![0.0, 35.0],
            strata: vec![StratumRecord {
                lo_a: 0.0,
                hi_a: 35.0,
                n_samples: 12,
                low_confidence: true,
                metrics: BTreeMap::from([("rf".to_string(), sample_metrics())]),
            }],
        };
        let p1 = dir.path().join("a.csv");
        let p2 = dir.path().join("b.csv");
        write_stratified_csv(&p1, &report).unwrap();
        write_stratified_csv(&p2, &report).unwrap();
        assert_eq!(
            std::fs::read(&p1).unwrap(),
            std::fs::read(&p2).unwrap()
        );
    }

    #[test]
    fn spatial_csv_leaves_undefined_mape_empty() {
        let dir = tempfile::tempdir().unwrap();
        let report = SpatialReport {
            per_sensor: BTreeMap::from([
                (
                    3,
                    LocationMape {
                        mape_percent: 12.5,
                        k: 4,
                        skipped: 0,
                        defined: true,
                    },
                ),
                (
                    9,
                    LocationMape {
                        mape_percent: f64::NAN,
                        k: 0,
                        skipped: 2,
                        defined: false,
                    },
                ),
            ]),
            max_mape_percent: 12.5,
        };
        let path = dir.path().join("spatial.csv");
        write_spatial_csv(&path, "ann", &report).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("ann,3,12.5,4,0"));
        assert!(text.contains("ann,9,,0,2"));
    }

    #[test]
    fn history_csv_round_trip_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("history.csv");
        write_history_csv(
            &path,
            &[EpochRecord {
                epoch: 0,
                train_mse: 0.5,
                val_mse: 0.25,
            }],
        )
        .unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "epoch,train_mse,val_mse\n0,0.5,0.25\n");
    }
}
