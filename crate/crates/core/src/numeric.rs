//! Central-difference differential operators for checking field physics.

use crate::types::Position;

/// Central-difference divergence of a vector field at `p` with step `h`.
pub fn divergence<F>(field: F, p: Position, h: f64) -> f64
where
    F: Fn(Position) -> [f64; 3],
{
    let dx = field(Position::new(p.x + h, p.y, p.z))[0] - field(Position::new(p.x - h, p.y, p.z))[0];
    let dy = field(Position::new(p.x, p.y + h, p.z))[1] - field(Position::new(p.x, p.y - h, p.z))[1];
    let dz = field(Position::new(p.x, p.y, p.z + h))[2] - field(Position::new(p.x, p.y, p.z - h))[2];
    (dx + dy + dz) / (2.0 * h)
}

/// Central-difference curl of a vector field at `p` with step `h`.
pub fn curl<F>(field: F, p: Position, h: f64) -> [f64; 3]
where
    F: Fn(Position) -> [f64; 3],
{
    let fxp = field(Position::new(p.x + h, p.y, p.z));
    let fxm = field(Position::new(p.x - h, p.y, p.z));
    let fyp = field(Position::new(p.x, p.y + h, p.z));
    let fym = field(Position::new(p.x, p.y - h, p.z));
    let fzp = field(Position::new(p.x, p.y, p.z + h));
    let fzm = field(Position::new(p.x, p.y, p.z - h));
    let d = 2.0 * h;
    [
        (fyp[2] - fym[2]) / d - (fzp[1] - fzm[1]) / d,
        (fzp[0] - fzm[0]) / d - (fxp[2] - fxm[2]) / d,
        (fxp[1] - fxm[1]) / d - (fyp[0] - fym[0]) / d,
    ]
}

/// Dimensionless divergence residual: |div B| * h / |B|. A physical
/// (divergence-free) smooth field evaluated in f64 should stay well below
/// 1e-6 for small h.
pub fn scaled_divergence<F>(field: F, p: Position, h: f64) -> f64
where
    F: Fn(Position) -> [f64; 3] + Copy,
{
    let b = field(p);
    let norm = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
    divergence(field, p, h).abs() * h / norm.max(f64::MIN_POSITIVE)
}

/// Dimensionless curl residual: |curl B| * h / |B|.
pub fn scaled_curl<F>(field: F, p: Position, h: f64) -> f64
where
    F: Fn(Position) -> [f64; 3] + Copy,
{
    let b = field(p);
    let norm = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
    let c = curl(field, p, h);
    let cn = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
    cn * h / norm.max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn divergence_of_radial_field() {
        // F = (x, y, z) has divergence 3 everywhere.
        let f = |p: Position| [p.x, p.y, p.z];
        let d = divergence(f, Position::new(0.3, -0.2, 0.7), 1e-4);
        assert!((d - 3.0).abs() < 1e-9);
    }

    #[test]
    fn curl_of_rotational_field() {
        // F = (-y, x, 0) has curl (0, 0, 2).
        let f = |p: Position| [-p.y, p.x, 0.0];
        let c = curl(f, Position::new(0.1, 0.2, 0.3), 1e-4);
        assert!(c[0].abs() < 1e-9 && c[1].abs() < 1e-9);
        assert!((c[2] - 2.0).abs() < 1e-9);
    }
}
