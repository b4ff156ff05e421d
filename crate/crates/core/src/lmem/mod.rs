//! Linear multipole electromagnet baseline: per-coil spherical multipole
//! expansions fitted by least squares on low-current data. Predictions are
//! exactly linear in the coil currents and analytically curl- and
//! divergence-free.

pub mod harmonics;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::types::{CurrentVector, FieldVector, Position, NUM_COILS};

/// Minimum distance from any expansion center at which predictions are
/// meaningful.
pub const EXPANSION_STANDOFF_M: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultipoleBasis {
    /// One expansion center per coil, outside the fitting workspace.
    pub centers: Vec<Position>,
    /// Maximum expansion degree (1..=5).
    pub max_degree: usize,
}

impl MultipoleBasis {
    pub fn new(centers: Vec<Position>, max_degree: usize) -> Result<Self> {
        if centers.len() != NUM_COILS {
            return Err(Error::Config(format!(
                "expected {NUM_COILS} expansion centers, got {}",
                centers.len()
            )));
        }
        if !(1..=5).contains(&max_degree) {
            return Err(Error::Config(format!(
                "max_degree must lie in 1..=5, got {max_degree}"
            )));
        }
        Ok(MultipoleBasis {
            centers,
            max_degree,
        })
    }

    pub fn coeffs_per_coil(&self) -> usize {
        harmonics::coeffs_per_coil(self.max_degree)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// RMS of per-component residuals on the fitting subset, teslas.
    pub residual_rmse_t: f64,
    /// Ratio of extreme R diagonal magnitudes from the QR factorization.
    pub condition_estimate: f64,
    /// Samples that passed the current cap and entered the fit.
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmemModel {
    pub basis: MultipoleBasis,
    /// Coefficients in (coil, then (l, m) lexicographic) order,
    /// `NUM_COILS * coeffs_per_coil` values.
    pub coefficients: Vec<f64>,
    pub diagnostics: FitDiagnostics,
}

/// Field of one (l, m) unit-coefficient basis function centered at `center`,
/// evaluated at `p`.
pub fn basis_field(center: Position, l: usize, m: i32, p: Position) -> Result<[f64; 3]> {
    let delta = p.sub(center);
    let dist = (delta[0] * delta[0] + delta[1] * delta[1] + delta[2] * delta[2]).sqrt();
    if dist == 0.0 {
        return Err(Error::SingularBasis { coil: 0 });
    }
    Ok(harmonics::basis_field(delta, l, m))
}

/// Ordinary least-squares fit of the multipole coefficients on the samples
/// with i_max at or below `current_cap_a`.
pub fn fit(train: &Dataset, basis: MultipoleBasis, current_cap_a: f64) -> Result<LmemModel> {
    let k = basis.coeffs_per_coil();
    let n_coeffs = NUM_COILS * k;

    let subset: Vec<_> = train
        .samples
        .iter()
        .filter(|s| s.currents.i_max() <= current_cap_a)
        .collect();
    if subset.len() < n_coeffs {
        return Err(Error::TooFewLowCurrentSamples {
            cap_a: current_cap_a,
            have: subset.len(),
            need: n_coeffs,
        });
    }

    let n_rows = 3 * subset.len();
    let mut a = DMatrix::<f64>::zeros(n_rows, n_coeffs);
    let mut b = DVector::<f64>::zeros(n_rows);
    for (j, s) in subset.iter().enumerate() {
        let row = 3 * j;
        for (coil, center) in basis.centers.iter().enumerate() {
            let fields = harmonics::basis_fields(s.position.sub(*center), basis.max_degree);
            let current = s.currents.0[coil];
            for (t, f) in fields.iter().enumerate() {
                let col = coil * k + t;
                a[(row, col)] = f[0] * current;
                a[(row + 1, col)] = f[1] * current;
                a[(row + 2, col)] = f[2] * current;
            }
        }
        b[row] = s.field.bx;
        b[row + 1] = s.field.by;
        b[row + 2] = s.field.bz;
    }

    let qr = a.clone().qr();
    let r = qr.r();
    let mut diag_max = 0.0_f64;
    let mut diag_min = f64::INFINITY;
    for i in 0..n_coeffs {
        let d = r[(i, i)].abs();
        diag_max = diag_max.max(d);
        diag_min = diag_min.min(d);
    }
    for i in 0..n_coeffs {
        if r[(i, i)].abs() <= 1e-12 * diag_max {
            return Err(Error::RankDeficient {
                coil: i / k,
                degree: harmonics::degree_of(i % k),
                column: i,
                diag: r[(i, i)].abs(),
            });
        }
    }

    let qtb = qr.q().transpose() * &b;
    let x = r
        .solve_upper_triangular(&qtb)
        .ok_or_else(|| Error::NonFinite("upper-triangular solve failed".into()))?;

    let residual = &a * &x - &b;
    let residual_rmse_t = (residual.norm_squared() / n_rows as f64).sqrt();
    let coefficients: Vec<f64> = x.iter().copied().collect();
    if coefficients.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("lmem coefficients".into()));
    }

    Ok(LmemModel {
        basis,
        coefficients,
        diagnostics: FitDiagnostics {
            residual_rmse_t,
            condition_estimate: diag_max / diag_min,
            n_samples: subset.len(),
        },
    })
}

impl LmemModel {
    /// 3 x 8 actuation matrix at `p`: column k maps coil k's current to the
    /// field, in T/A. Returned column-per-coil.
    pub fn actuation_matrix(&self, p: Position) -> Result<[[f64; 3]; NUM_COILS]> {
        let k = self.basis.coeffs_per_coil();
        let mut cols = [[0.0; 3]; NUM_COILS];
        for (coil, center) in self.basis.centers.iter().enumerate() {
            let delta = p.sub(*center);
            let dist = (delta[0] * delta[0] + delta[1] * delta[1] + delta[2] * delta[2]).sqrt();
            if dist < EXPANSION_STANDOFF_M {
                return Err(Error::StandoffViolation {
                    coil,
                    dist_m: dist,
                    limit_m: EXPANSION_STANDOFF_M,
                });
            }
            let fields = harmonics::basis_fields(delta, self.basis.max_degree);
            let coeffs = &self.coefficients[coil * k..(coil + 1) * k];
            for (c, f) in coeffs.iter().zip(fields.iter()) {
                cols[coil][0] += c * f[0];
                cols[coil][1] += c * f[1];
                cols[coil][2] += c * f[2];
            }
        }
        Ok(cols)
    }

    /// Predicted field b = A(p) i; exactly additive and homogeneous in i.
    pub fn predict(&self, p: Position, i: &CurrentVector) -> Result<FieldVector> {
        let a = self.actuation_matrix(p)?;
        let mut b = [0.0; 3];
        for (col, current) in a.iter().zip(i.0.iter()) {
            b[0] += col[0] * current;
            b[1] += col[1] * current;
            b[2] += col[2] * current;
        }
        Ok(FieldVector::from_array(b))
    }
}
