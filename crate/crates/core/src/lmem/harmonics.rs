//! Real irregular solid harmonics and their gradients, evaluated in
//! Cartesian coordinates.
//!
//! A regular real solid harmonic of degree l factors as W_l^m(z, r^2) times
//! c_m or s_m, where c_m + i s_m = (x + iy)^m and W carries the associated
//! Legendre recursions homogenized in (z, r^2). The irregular (decaying)
//! harmonic is its Kelvin transform W c_m / r^(2l+1), harmonic away from the
//! origin, and the field basis is minus its gradient. Everything here is a
//! polynomial recursion plus one inverse power of r, so there are no
//! spherical-coordinate pole singularities.

/// Number of basis functions per expansion center for degrees 1..=lmax:
/// sum of (2l+1) = lmax (lmax + 2).
pub fn coeffs_per_coil(lmax: usize) -> usize {
    lmax * (lmax + 2)
}

/// Flat index of (l, m) with l in 1..=lmax, m in -l..=l, (l, m) lexicographic.
pub fn index_of(l: usize, m: i32) -> usize {
    debug_assert!(l >= 1 && m.unsigned_abs() as usize <= l);
    (l * l - 1) + (m + l as i32) as usize
}

/// Degree of a flat index (inverse of the l part of `index_of`).
pub fn degree_of(index: usize) -> usize {
    let mut l = 1;
    while (l + 1) * (l + 1) - 1 <= index {
        l += 1;
    }
    l
}

/// Evaluate all field basis vectors -grad(W c / r^(2l+1)) for degrees
/// 1..=lmax at displacement `delta` from the expansion center, in
/// `index_of` order.
pub fn basis_fields(delta: [f64; 3], lmax: usize) -> Vec<[f64; 3]> {
    let [x, y, z] = delta;
    let q = x * x + y * y + z * z;
    let n = lmax + 1;

    // c_m, s_m = Re, Im of (x+iy)^m for m = 0..=lmax.
    let mut c = vec![0.0; n];
    let mut s = vec![0.0; n];
    c[0] = 1.0;
    for m in 1..n {
        c[m] = x * c[m - 1] - y * s[m - 1];
        s[m] = x * s[m - 1] + y * c[m - 1];
    }

    // W[l][m], with dz = dW/dz and dq = dW/d(r^2).
    let idx = |l: usize, m: usize| l * n + m;
    let mut w = vec![0.0; n * n];
    let mut dz = vec![0.0; n * n];
    let mut dq = vec![0.0; n * n];
    w[idx(0, 0)] = 1.0;
    for m in 1..n {
        w[idx(m, m)] = (2.0 * m as f64 - 1.0) * w[idx(m - 1, m - 1)];
    }
    for m in 0..n {
        if m + 1 < n {
            w[idx(m + 1, m)] = (2.0 * m as f64 + 1.0) * z * w[idx(m, m)];
            dz[idx(m + 1, m)] = (2.0 * m as f64 + 1.0) * w[idx(m, m)];
        }
        for l in (m + 2)..n {
            let (lf, mf) = (l as f64, m as f64);
            let a = 2.0 * lf - 1.0;
            let b = lf + mf - 1.0;
            let inv = 1.0 / (lf - mf);
            w[idx(l, m)] = (a * z * w[idx(l - 1, m)] - b * q * w[idx(l - 2, m)]) * inv;
            dz[idx(l, m)] =
                (a * (w[idx(l - 1, m)] + z * dz[idx(l - 1, m)]) - b * q * dz[idx(l - 2, m)]) * inv;
            dq[idx(l, m)] =
                (a * z * dq[idx(l - 1, m)] - b * (w[idx(l - 2, m)] + q * dq[idx(l - 2, m)])) * inv;
        }
    }

    let mut out = vec![[0.0; 3]; coeffs_per_coil(lmax)];
    let r = q.sqrt();
    for l in 1..=lmax {
        // rho = r^-(2l+1); d(rho)/d(r_vec) = -(2l+1) rho / q * r_vec.
        let rho = r.powi(-(2 * l as i32 + 1));
        let rad = (2.0 * l as f64 + 1.0) * rho / q;
        for m in -(l as i32)..=(l as i32) {
            let ma = m.unsigned_abs() as usize;
            let (wv, wdz, wdq) = (w[idx(l, ma)], dz[idx(l, ma)], dq[idx(l, ma)]);
            // Angular factor and its (x, y) partials.
            let (ang, ang_x, ang_y) = if m == 0 {
                (1.0, 0.0, 0.0)
            } else if m > 0 {
                (c[ma], ma as f64 * c[ma - 1], -(ma as f64) * s[ma - 1])
            } else {
                (s[ma], ma as f64 * s[ma - 1], ma as f64 * c[ma - 1])
            };
            let yv = wv * ang;
            // W depends on z both directly and through q = r^2.
            let grad_y = [
                wdq * 2.0 * x * ang + wv * ang_x,
                wdq * 2.0 * y * ang + wv * ang_y,
                (wdz + wdq * 2.0 * z) * ang,
            ];
            // field = -grad(y * rho) = -(rho grad_y - rad * y * r_vec)
            out[index_of(l, m)] = [
                rad * yv * x - rho * grad_y[0],
                rad * yv * y - rho * grad_y[1],
                rad * yv * z - rho * grad_y[2],
            ];
        }
    }
    out
}

/// Single basis field for (l, m) at displacement `delta`.
pub fn basis_field(delta: [f64; 3], l: usize, m: i32) -> [f64; 3] {
    basis_fields(delta, l)[index_of(l, m)]
}
