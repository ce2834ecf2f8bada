use nalgebra::{DVector, Matrix2};

use super::Qfim;
use crate::error::Result;
use crate::hilbert::Ket;
use crate::C64;

pub const DEFAULT_FD_STEP: f64 = 1e-4;

/// Quantum geometric tensor `⟨∂ᵢψ|∂ⱼψ⟩ − ⟨∂ᵢψ|ψ⟩⟨ψ|∂ⱼψ⟩` over `(β_re, β_im)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeometricTensor {
    pub entries: [[C64; 2]; 2],
}

impl GeometricTensor {
    /// `4 Re(T)`.
    pub fn qfim(&self) -> Qfim {
        let q = |i: usize, j: usize| 4.0 * self.entries[i][j].re;
        let off = 0.5 * (q(0, 1) + q(1, 0));
        Qfim {
            entries: [[q(0, 0), off], [off, q(1, 1)]],
        }
    }

    /// `4 Im(T)`, antisymmetric.
    pub fn uhlmann(&self) -> Matrix2<f64> {
        let d = 2.0 * (self.entries[0][1].im - self.entries[1][0].im);
        Matrix2::new(0.0, d, -d, 0.0)
    }
}

fn central(f: &impl Fn(C64) -> Result<Ket>, theta: C64, dir: C64, h: f64) -> Result<DVector<C64>> {
    let plus = f(theta + dir * h)?;
    let minus = f(theta - dir * h)?;
    Ok((plus.amplitudes() - minus.amplitudes()) / C64::from(2.0 * h))
}

/// Central difference at `h` and `h/2`, combined by one Richardson step.
fn derivative(f: &impl Fn(C64) -> Result<Ket>, theta: C64, dir: C64, h: f64) -> Result<DVector<C64>> {
    let coarse = central(f, theta, dir, h)?;
    let fine = central(f, theta, dir, h / 2.0)?;
    Ok((fine * C64::from(4.0) - coarse) / C64::from(3.0))
}

/// Finite-difference geometric tensor of `state_fn` at `theta = β_re + iβ_im`.
pub fn geometric_tensor_numeric(
    state_fn: impl Fn(C64) -> Result<Ket>,
    theta: C64,
    step: f64,
) -> Result<GeometricTensor> {
    let psi = state_fn(theta)?;
    let d = [
        derivative(&state_fn, theta, C64::new(1.0, 0.0), step)?,
        derivative(&state_fn, theta, C64::new(0.0, 1.0), step)?,
    ];
    let amp = psi.amplitudes();
    let proj: Vec<C64> = d.iter().map(|di| amp.dotc(di)).collect();
    let mut entries = [[C64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            entries[i][j] = d[i].dotc(&d[j]) - proj[i].conj() * proj[j];
        }
    }
    Ok(GeometricTensor { entries })
}

/// Pure-state QFIM `4 Re(⟨∂ᵢψ|∂ⱼψ⟩ − ⟨∂ᵢψ|ψ⟩⟨ψ|∂ⱼψ⟩)` by finite differences.
pub fn qfim_numeric(state_fn: impl Fn(C64) -> Result<Ket>, theta: C64, step: f64) -> Result<Qfim> {
    Ok(geometric_tensor_numeric(state_fn, theta, step)?.qfim())
}

/// Uhlmann matrix `4 Im(...)` by finite differences.
pub fn uhlmann_numeric(state_fn: impl Fn(C64) -> Result<Ket>, theta: C64, step: f64) -> Result<Matrix2<f64>> {
    Ok(geometric_tensor_numeric(state_fn, theta, step)?.uhlmann())
}
