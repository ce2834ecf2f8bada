use nalgebra::{DMatrix, DVector};

use super::SparseOp;
use crate::error::{Result, SdsError};
use crate::C64;

/// Lanczos basis size per substep.
pub const KRYLOV_DIM: usize = 30;

const MAX_HALVINGS: usize = 60;

const ROUNDING_FLOOR: f64 = 4.0 * f64::EPSILON;

/// Statistics of one Krylov exponential.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct KrylovStats {
    pub substeps: usize,
    pub matvecs: usize,
    pub error_estimate: f64,
}

/// `exp(−iτH) v` for Hermitian `H` given as a matrix-vector product `y = H x`.
///
/// The time interval is split into substeps so that the accumulated a-posteriori
/// error estimate stays below `tol · ‖v‖`.
pub fn expm_hermitian_apply(
    matvec: impl Fn(&[C64], &mut [C64]),
    tau: f64,
    v: &DVector<C64>,
    tol: f64,
) -> Result<(DVector<C64>, KrylovStats)> {
    let n = v.len();
    let mut stats = KrylovStats::default();
    let norm0 = v.norm();
    if norm0 == 0.0 || tau == 0.0 {
        return Ok((v.clone(), stats));
    }
    let mut w = v.clone();
    let mut done = 0.0;
    let mut h_try = tau.abs();
    while done < tau.abs() * (1.0 - 1e-15) {
        let remaining = tau.abs() - done;
        let beta0 = w.norm();
        let (basis, alpha, beta, breakdown) = lanczos(&matvec, &w, KRYLOV_DIM.min(n), &mut stats);
        let m = alpha.len();
        let t = tridiagonal(&alpha, &beta[..m - 1]);
        let eig = t.clone().symmetric_eigen();
        let mut h = h_try.min(remaining);
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let s = h * tau.signum();
            let coeffs = exp_coeffs(&t, &eig, s);
            let err = if breakdown {
                0.0
            } else {
                beta0 * beta[m - 1] * coeffs[m - 1].norm()
            };
            // estimates at rounding level cannot be reduced by shorter substeps
            if err <= (tol * h / tau.abs()).max(ROUNDING_FLOOR) * norm0 {
                accepted = Some((coeffs, err));
                break;
            }
            h *= 0.5;
        }
        let (coeffs, err) = accepted.ok_or_else(|| {
            SdsError::ToleranceNotMet(format!("Krylov exponential could not reach tolerance {tol:.1e}"))
        })?;
        let mut next = DVector::zeros(n);
        for (j, c) in coeffs.iter().enumerate() {
            next.axpy(*c * beta0, &basis[j], C64::new(1.0, 0.0));
        }
        w = next;
        done += h;
        stats.substeps += 1;
        stats.error_estimate += err;
        // let the next substep try a slightly longer interval
        h_try = if h == h_try.min(remaining) { h * 2.0 } else { h };
    }
    Ok((w, stats))
}

/// [`expm_hermitian_apply`] for a sparse Hermitian operator.
pub fn expm_sparse_apply(h: &SparseOp, tau: f64, v: &DVector<C64>, tol: f64) -> Result<DVector<C64>> {
    let mv = |x: &[C64], y: &mut [C64]| {
        y.iter_mut().for_each(|e| *e = C64::new(0.0, 0.0));
        h.mul_acc(C64::new(1.0, 0.0), x, y);
    };
    Ok(expm_hermitian_apply(mv, tau, v, tol)?.0)
}

/// `exp(−iτH) v` by Chebyshev expansion, given `‖H‖ ≤ spectral_bound`.
///
/// Needs about `|τ| · spectral_bound` matrix-vector products and no
/// orthogonalization, which suits long propagation with very sparse `H`.
pub fn expm_chebyshev_apply(
    matvec: impl Fn(&[C64], &mut [C64]),
    tau: f64,
    v: &DVector<C64>,
    spectral_bound: f64,
    tol: f64,
) -> Result<DVector<C64>> {
    if tau == 0.0 || spectral_bound == 0.0 || v.norm() == 0.0 {
        return Ok(v.clone());
    }
    if !(spectral_bound.is_finite() && tau.is_finite()) {
        return Err(SdsError::InvalidParameter(
            "Chebyshev propagation needs finite τ and bound".into(),
        ));
    }
    let r = spectral_bound;
    let x = tau.abs() * r;
    let coeffs = bessel_series(x, tol);
    let n = v.len();
    // scaled operator H/R with the sign of τ folded in
    let scaled = |src: &DVector<C64>, dst: &mut DVector<C64>| {
        matvec(src.as_slice(), dst.as_mut_slice());
        *dst *= C64::from(tau.signum() / r);
    };
    let mut prev = v.clone();
    let mut cur = DVector::zeros(n);
    scaled(&prev, &mut cur);
    let mut out = v * C64::from(coeffs[0]);
    let mut phase = C64::new(0.0, -1.0);
    out.axpy(phase * 2.0 * coeffs[1], &cur, C64::new(1.0, 0.0));
    let mut next = DVector::zeros(n);
    for c in coeffs.iter().skip(2) {
        scaled(&cur, &mut next);
        next *= C64::from(2.0);
        next -= &prev;
        phase *= C64::new(0.0, -1.0);
        out.axpy(phase * 2.0 * *c, &next, C64::new(1.0, 0.0));
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(out)
}

/// `J_k(x)` for `k = 0..K`, with `K` chosen so the tail is below `tol`.
fn bessel_series(x: f64, tol: f64) -> Vec<f64> {
    let tol = tol.max(1e-300);
    // beyond k ≈ x the terms fall off faster than geometrically
    let mut k_max = (x + 10.0 * x.cbrt() + 20.0).ceil() as usize;
    let values = loop {
        let j = bessel_miller(x, k_max + 30);
        let tail: f64 = j[k_max.saturating_sub(2)..=k_max].iter().map(|v| v.abs()).sum();
        if tail < tol * 1e-3 || k_max > 10 * (x as usize + 100) {
            break j;
        }
        k_max = k_max * 5 / 4 + 10;
    };
    let mut out = values[..=k_max].to_vec();
    while out.len() > 2 && out.last().is_some_and(|v| v.abs() < tol * 1e-6) && (out.len() as f64) > x {
        out.pop();
    }
    out
}

/// Miller's backward recurrence normalized by `J₀ + 2ΣJ_{2k} = 1`.
fn bessel_miller(x: f64, start: usize) -> Vec<f64> {
    let mut j = vec![0.0; start + 2];
    if x == 0.0 {
        j[0] = 1.0;
        return j;
    }
    j[start] = 1e-300;
    for k in (1..=start).rev() {
        j[k - 1] = 2.0 * k as f64 / x * j[k] - j[k + 1];
        if j[k - 1].abs() > 1e250 {
            for v in &mut j[k - 1..] {
                *v *= 1e-250;
            }
        }
    }
    let norm = j[0] + 2.0 * j.iter().skip(2).step_by(2).sum::<f64>();
    j.iter_mut().for_each(|v| *v /= norm);
    j
}

type LanczosOut = (Vec<DVector<C64>>, Vec<f64>, Vec<f64>, bool);

fn lanczos(matvec: &impl Fn(&[C64], &mut [C64]), v: &DVector<C64>, m: usize, stats: &mut KrylovStats) -> LanczosOut {
    let n = v.len();
    let mut basis: Vec<DVector<C64>> = Vec::with_capacity(m);
    let mut alpha = Vec::with_capacity(m);
    let mut beta = Vec::with_capacity(m);
    basis.push(v / C64::from(v.norm()));
    let mut w = DVector::zeros(n);
    for j in 0..m {
        matvec(basis[j].as_slice(), w.as_mut_slice());
        stats.matvecs += 1;
        let a = basis[j].dotc(&w).re;
        alpha.push(a);
        // full reorthogonalization, applied twice
        for _ in 0..2 {
            for q in &basis {
                let c = q.dotc(&w);
                w.axpy(-c, q, C64::new(1.0, 0.0));
            }
        }
        let b = w.norm();
        beta.push(b);
        let scale = alpha.iter().map(|x| x.abs()).fold(b, f64::max).max(1e-300);
        if b <= 1e-13 * scale {
            return (basis, alpha, beta, true);
        }
        if j + 1 < m {
            basis.push(&w / C64::from(b));
        }
    }
    (basis, alpha, beta, false)
}

fn tridiagonal(alpha: &[f64], beta: &[f64]) -> DMatrix<f64> {
    let m = alpha.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    t
}

/// `exp(−i s T) e₁`.
///
/// Short steps use the Taylor series, which keeps tiny trailing components
/// accurate; the error estimate depends on them.
fn exp_coeffs(t: &DMatrix<f64>, eig: &nalgebra::SymmetricEigen<f64, nalgebra::Dyn>, s: f64) -> Vec<C64> {
    let m = t.nrows();
    let spectral = eig.eigenvalues.iter().fold(0.0f64, |a, l| a.max(l.abs()));
    if s.abs() * spectral <= 1.0 {
        let mut term = vec![C64::new(0.0, 0.0); m];
        term[0] = C64::new(1.0, 0.0);
        let mut sum = term.clone();
        for j in 1..=80 {
            let mut next = vec![C64::new(0.0, 0.0); m];
            for (i, n) in next.iter_mut().enumerate() {
                let lo = i.saturating_sub(1);
                let hi = (i + 1).min(m - 1);
                for k in lo..=hi {
                    *n += term[k] * t[(i, k)];
                }
                *n *= C64::new(0.0, -s / j as f64);
            }
            let size = next.iter().map(|c| c.norm()).fold(0.0, f64::max);
            term = next;
            for (a, b) in sum.iter_mut().zip(&term) {
                *a += b;
            }
            if size == 0.0 || (j >= m && size < 1e-300) {
                break;
            }
        }
        return sum;
    }
    let q = &eig.eigenvectors;
    (0..m)
        .map(|i| {
            (0..m)
                .map(|k| C64::from_polar(q[(i, k)] * q[(0, k)], -s * eig.eigenvalues[k]))
                .sum()
        })
        .collect()
}
