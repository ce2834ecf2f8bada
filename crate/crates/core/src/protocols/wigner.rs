use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SdsError};
use crate::hilbert::{squeeze_matrix, Ket, ModeSpace};
use crate::metrology::DickeWeights;
use crate::C64;

/// Rectangular phase-space grid in `x = a + a†`, `p = i(a† − a)` units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub x_range: (f64, f64),
    pub p_range: (f64, f64),
    pub resolution: usize,
}

impl PhaseGrid {
    pub fn square(half_width: f64, resolution: usize) -> Self {
        Self {
            x_range: (-half_width, half_width),
            p_range: (-half_width, half_width),
            resolution,
        }
    }

    fn axis(range: (f64, f64), n: usize) -> Vec<f64> {
        if n == 1 {
            return vec![0.5 * (range.0 + range.1)];
        }
        (0..n)
            .map(|i| range.0 + (range.1 - range.0) * i as f64 / (n - 1) as f64)
            .collect()
    }

    pub fn xs(&self) -> Vec<f64> {
        Self::axis(self.x_range, self.resolution)
    }

    pub fn ps(&self) -> Vec<f64> {
        Self::axis(self.p_range, self.resolution)
    }

    pub fn cell_area(&self) -> f64 {
        let n = (self.resolution.max(2) - 1) as f64;
        (self.x_range.1 - self.x_range.0) / n * (self.p_range.1 - self.p_range.0) / n
    }
}

/// Wigner function sampled on a grid; `values[(i, j)]` is `W(xs[i], ps[j])`.
#[derive(Clone, Debug, PartialEq)]
pub struct WignerField {
    pub grid: PhaseGrid,
    pub values: DMatrix<f64>,
}

impl WignerField {
    /// Trapezoidal integral over the grid.
    pub fn integral(&self) -> f64 {
        let n = self.grid.resolution;
        let w = |i: usize| if i == 0 || i + 1 == n { 0.5 } else { 1.0 };
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                total += w(i) * w(j) * self.values[(i, j)];
            }
        }
        total * self.grid.cell_area()
    }

    pub fn min(&self) -> f64 {
        self.values.min()
    }

    /// Values along the diagonal `p = x` (square grids only).
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.grid.resolution).map(|i| self.values[(i, i)]).collect()
    }
}

/// Wigner function of a pure mode state, normalized so `∫W dx dp = 1`.
///
/// Clenshaw summation of the Laguerre series over the diagonals of `ρ`, with
/// `α = (x + ip)/2`.
pub fn wigner(amplitudes: &DVector<C64>, grid: PhaseGrid) -> Result<WignerField> {
    if amplitudes.is_empty() || grid.resolution == 0 {
        return Err(SdsError::InvalidParameter("empty state or grid".into()));
    }
    let norm = amplitudes.norm_squared();
    let psi = amplitudes / C64::from(norm.sqrt());
    let m = psi.len();
    // diagonals[l][i] = (2 − δ_l0) ρ_{i, i+l}
    let diagonals: Vec<Vec<C64>> = (0..m)
        .map(|l| {
            let f = if l == 0 { 1.0 } else { 2.0 };
            (0..m - l).map(|i| psi[i] * psi[i + l].conj() * f).collect()
        })
        .collect();
    let (xs, ps) = (grid.xs(), grid.ps());
    let points: Vec<(usize, usize)> = (0..xs.len()).flat_map(|i| (0..ps.len()).map(move |j| (i, j))).collect();
    let vals: Vec<f64> = points
        .par_iter()
        .map(|&(i, j)| {
            let a = C64::new(xs[i], ps[j]);
            let b = a.norm_sqr();
            let mut w0 = diagonals[m - 1][0];
            for l in (0..m - 1).rev() {
                w0 = laguerre_sum(l, b, &diagonals[l]) + w0 * a / ((l + 1) as f64).sqrt();
            }
            w0.re * (-0.5 * b).exp() / (2.0 * std::f64::consts::PI)
        })
        .collect();
    let values = DMatrix::from_fn(xs.len(), ps.len(), |i, j| vals[i * ps.len() + j]);
    Ok(WignerField { grid, values })
}

/// `Σ_k c_k L_k^{(l)}(x) √(k!/(k+l)!)`-type sum by backward recurrence.
fn laguerre_sum(l: usize, x: f64, c: &[C64]) -> C64 {
    let lf = l as f64;
    let (mut y0, mut y1) = match c.len() {
        1 => (c[0], C64::new(0.0, 0.0)),
        2 => (c[0], c[1]),
        n => {
            let mut k = n as f64;
            let (mut y0, mut y1) = (c[n - 2], c[n - 1]);
            for i in 3..=n {
                k -= 1.0;
                let next0 = c[n - i] - y1 * ((k - 1.0) * (lf + k - 1.0) / ((lf + k) * k)).sqrt();
                let next1 = y0 - y1 * ((lf + 2.0 * k - 1.0) - x) / ((lf + k) * k).sqrt();
                y0 = next0;
                y1 = next1;
            }
            (y0, y1)
        }
    };
    y0 -= y1 * ((lf + 1.0) - x) / (lf + 1.0).sqrt();
    y1 = y0;
    y1
}

/// Bosonic analogue `∝ Σ_m c_m S(ζm)|0⟩` of a spin-dependent squeezed state.
pub fn bosonic_analogue(w: &DickeWeights, zeta: f64, mode: ModeSpace) -> Result<Ket> {
    let n = mode.n_max();
    let mut v = DVector::zeros(n);
    for (k, c) in w.weights().iter().enumerate() {
        let s = squeeze_matrix(n, C64::from(zeta * w.m(k)));
        v += s.column(0) * *c;
    }
    Ket::new(mode, v)
}

/// Number of sign changes along a sampled line, ignoring values below `floor` in magnitude.
pub fn count_sign_changes(values: &[f64], floor: f64) -> usize {
    let signs: Vec<bool> = values.iter().filter(|v| v.abs() > floor).map(|&v| v > 0.0).collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::displacement_matrix;
    use crate::metrology::{spin_states, SpinStateKind};

    /// `(1/2π)⟨D(α) Π D†(α)⟩` with `α = (x + ip)/2`.
    fn parity_oracle(psi: &DVector<C64>, x: f64, p: f64) -> f64 {
        // pad so the displaced state stays inside the truncation
        let n = psi.len() + 80;
        let padded = DVector::from_fn(n, |k, _| if k < psi.len() { psi[k] } else { C64::new(0.0, 0.0) });
        let d = displacement_matrix(n, C64::new(x, p) * 0.5);
        let shifted = d.adjoint() * padded;
        let val: f64 = shifted
            .iter()
            .enumerate()
            .map(|(k, c)| if k % 2 == 0 { c.norm_sqr() } else { -c.norm_sqr() })
            .sum();
        val / (2.0 * std::f64::consts::PI)
    }

    fn cat(n: usize, alpha: f64) -> DVector<C64> {
        let d = displacement_matrix(n, C64::from(alpha));
        let dm = displacement_matrix(n, C64::from(-alpha));
        let v = d.column(0) + dm.column(0);
        &v / C64::from(v.norm())
    }

    #[test]
    fn vacuum_is_unit_gaussian() {
        let mode = ModeSpace::new(10).unwrap();
        let f = wigner(Ket::vacuum(mode).amplitudes(), PhaseGrid::square(6.0, 61)).unwrap();
        assert!(f.min() > 0.0);
        assert!((f.integral() - 1.0).abs() < 1e-3);
        let centre = f.values[(30, 30)];
        assert!((centre - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-12);
    }

    #[test]
    fn matches_displaced_parity() {
        let psi = cat(40, 1.5);
        let grid = PhaseGrid::square(4.0, 9);
        let f = wigner(&psi, grid).unwrap();
        let (xs, ps) = (grid.xs(), grid.ps());
        for i in 0..9 {
            for j in 0..9 {
                assert!((f.values[(i, j)] - parity_oracle(&psi, xs[i], ps[j])).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn cat_has_negative_fringes() {
        let psi = cat(50, 2.0);
        let f = wigner(&psi, PhaseGrid::square(7.0, 101)).unwrap();
        assert!(f.min() < -0.05);
        assert!((f.integral() - 1.0).abs() < 0.02);
    }

    #[test]
    fn ghz_analogue_fourfold_symmetry() {
        let w = spin_states(SpinStateKind::Ghz, 10).unwrap();
        let psi = bosonic_analogue(&w, 0.3, ModeSpace::new(160).unwrap()).unwrap();
        let grid = PhaseGrid::square(14.0, 81);
        let f = wigner(psi.amplitudes(), grid).unwrap();
        let n = grid.resolution;
        for i in 0..n {
            for j in 0..n {
                let v = f.values[(i, j)];
                let (a, b) = (f.values[(n - 1 - i, n - 1 - j)], f.values[(n - 1 - j, i)]);
                assert!((v - a).abs() < 1e-10, "{i} {j}: {v} {a}");
                // quarter turn swaps the two squeezed components
                assert!((v - b).abs() < 1e-10, "{i} {j}: {v} {b}");
            }
        }
        assert!((f.integral() - 1.0).abs() < 0.02);
    }

    #[test]
    fn sign_changes() {
        assert_eq!(count_sign_changes(&[1.0, -1.0, 0.0, 2.0, 1e-20, -3.0], 1e-12), 3);
    }
}
