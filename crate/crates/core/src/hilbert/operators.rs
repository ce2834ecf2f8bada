use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{HybridSpace, LinOp, ModeSpace, Space, SpinSpace};
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

const I: C64 = C64::new(0.0, 1.0);

fn flagged(space: Space, m: DMatrix<C64>, hermitian: bool, unitary: bool) -> LinOp {
    let op = LinOp::from_parts(space, m);
    let op = if hermitian {
        op.mark_hermitian().expect("hermitian by construction")
    } else {
        op
    };
    if unitary {
        op.mark_unitary().expect("unitary by construction")
    } else {
        op
    }
}

pub fn destroy_matrix(n_max: usize) -> DMatrix<C64> {
    let mut a = DMatrix::zeros(n_max, n_max);
    for n in 1..n_max {
        a[(n - 1, n)] = C64::from((n as f64).sqrt());
    }
    a
}

pub fn destroy(mode: ModeSpace) -> LinOp {
    LinOp::from_parts(mode.into(), destroy_matrix(mode.n_max()))
}

pub fn create(mode: ModeSpace) -> LinOp {
    destroy(mode).adjoint()
}

pub fn number(mode: ModeSpace) -> LinOp {
    let d = DVector::from_iterator(mode.dim(), (0..mode.dim()).map(|n| C64::from(n as f64)));
    flagged(mode.into(), DMatrix::from_diagonal(&d), true, false)
}

/// `(x, p)` with `x = a + a†`, `p = i(a† − a)`.
pub fn quadratures(mode: ModeSpace) -> (LinOp, LinOp) {
    let a = destroy_matrix(mode.n_max());
    let ad = a.adjoint();
    let x = &a + &ad;
    let p = (&ad - &a) * I;
    (
        flagged(mode.into(), x, true, false),
        flagged(mode.into(), p, true, false),
    )
}

/// `J₊` in the Dicke basis ordered `m = −j..j`.
pub fn spin_raising_matrix(spin: SpinSpace) -> DMatrix<C64> {
    let j = spin.j();
    let d = spin.dim();
    let mut jp = DMatrix::zeros(d, d);
    for k in 0..d - 1 {
        let m = spin.m(k);
        jp[(k + 1, k)] = C64::from((j * (j + 1.0) - m * (m + 1.0)).sqrt());
    }
    jp
}

pub fn spin_matrix(spin: SpinSpace, axis: Axis) -> DMatrix<C64> {
    let jp = spin_raising_matrix(spin);
    let jm = jp.adjoint();
    match axis {
        Axis::X => (jp + jm) * C64::from(0.5),
        Axis::Y => (jp - jm) * C64::new(0.0, -0.5),
        Axis::Z => DMatrix::from_diagonal(&DVector::from_iterator(
            spin.dim(),
            spin.magnetizations().into_iter().map(C64::from),
        )),
    }
}

pub fn collective_spin(spin: SpinSpace, axis: Axis) -> LinOp {
    flagged(spin.into(), spin_matrix(spin, axis), true, false)
}

pub fn spin_raising(spin: SpinSpace) -> LinOp {
    LinOp::from_parts(spin.into(), spin_raising_matrix(spin))
}

pub fn spin_lowering(spin: SpinSpace) -> LinOp {
    spin_raising(spin).adjoint()
}

/// `exp(G)` for anti-Hermitian `G`, via the Hermitian eigendecomposition of `iG`.
pub fn expm_antihermitian(generator: &DMatrix<C64>) -> DMatrix<C64> {
    let h = generator * I;
    let h = (&h + h.adjoint()) * C64::from(0.5);
    let eig = h.symmetric_eigen();
    let phases = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| C64::from_polar(1.0, -l)),
    );
    let v = &eig.eigenvectors;
    v * DMatrix::from_diagonal(&phases) * v.adjoint()
}

pub fn displacement_matrix(n_max: usize, beta: C64) -> DMatrix<C64> {
    if beta == C64::new(0.0, 0.0) {
        return DMatrix::identity(n_max, n_max);
    }
    let a = destroy_matrix(n_max);
    let g = a.adjoint() * beta - a * beta.conj();
    expm_antihermitian(&g)
}

/// `D(β) = exp(β a† − β* a)`.
pub fn displacement(mode: ModeSpace, beta: C64) -> LinOp {
    flagged(mode.into(), displacement_matrix(mode.n_max(), beta), false, true)
}

pub fn squeeze_matrix(n_max: usize, zeta: C64) -> DMatrix<C64> {
    if zeta == C64::new(0.0, 0.0) {
        return DMatrix::identity(n_max, n_max);
    }
    let a = destroy_matrix(n_max);
    let a2 = &a * &a;
    let g = (&a2 * zeta.conj() - a2.adjoint() * zeta) * C64::from(0.5);
    expm_antihermitian(&g)
}

/// `S(ζ) = exp(½(ζ* a² − ζ a†²))`; real `ζ > 0` squeezes `x`.
pub fn squeeze(mode: ModeSpace, zeta: C64) -> LinOp {
    flagged(mode.into(), squeeze_matrix(mode.n_max(), zeta), false, true)
}

/// Operator that acts as `f(k)` on the mode ⊗ ancilla factor of spin block `k`.
pub fn spin_block_diagonal(space: HybridSpace, f: impl Fn(usize) -> DMatrix<C64>) -> DMatrix<C64> {
    let b = space.mode().dim() * space.ancilla_dim();
    let mut out = DMatrix::zeros(space.dim(), space.dim());
    for k in 0..space.spin().dim() {
        let blk = f(k);
        assert_eq!(blk.nrows(), b, "block size mismatch");
        out.view_mut((k * b, k * b), (b, b)).copy_from(&blk);
    }
    out
}

/// `S(ζ J_z) = ⊕_m S(ζ m)`.
pub fn spin_dependent_squeeze(space: HybridSpace, zeta: C64) -> LinOp {
    let n_max = space.mode().n_max();
    let anc = DMatrix::<C64>::identity(space.ancilla_dim(), space.ancilla_dim());
    let m = spin_block_diagonal(space, |k| {
        squeeze_matrix(n_max, zeta * space.spin().m(k)).kronecker(&anc)
    });
    flagged(space.into(), m, false, true)
}

/// `exp(−i θ J_axis)`.
pub fn spin_rotation(spin: SpinSpace, axis: Axis, angle: f64) -> LinOp {
    let g = spin_matrix(spin, axis) * C64::new(0.0, -angle);
    flagged(spin.into(), expm_antihermitian(&g), false, true)
}

fn identity(n: usize) -> DMatrix<C64> {
    DMatrix::identity(n, n)
}

/// `I_spin ⊗ op ⊗ I_anc` for a mode operator.
pub fn lift_mode(op: &LinOp, space: HybridSpace) -> LinOp {
    assert_eq!(op.dim(), space.mode().dim(), "mode operator size mismatch");
    let m = identity(space.spin().dim())
        .kronecker(op.matrix())
        .kronecker(&identity(space.ancilla_dim()));
    lifted(op, space, m)
}

/// `op ⊗ I_mode ⊗ I_anc` for a spin operator.
pub fn lift_spin(op: &LinOp, space: HybridSpace) -> LinOp {
    assert_eq!(op.dim(), space.spin().dim(), "spin operator size mismatch");
    let m = op
        .matrix()
        .kronecker(&identity(space.mode().dim() * space.ancilla_dim()));
    lifted(op, space, m)
}

/// Embeds a 2×2 operator on ancilla `which` (1 or 2).
pub fn lift_ancilla(op: &DMatrix<C64>, which: usize, space: HybridSpace) -> LinOp {
    assert!(which >= 1 && which <= space.ancillas(), "no ancilla {which}");
    let anc = if space.ancillas() == 1 {
        op.clone()
    } else if which == 1 {
        op.kronecker(&identity(2))
    } else {
        identity(2).kronecker(op)
    };
    let m = identity(space.spin().dim() * space.mode().dim()).kronecker(&anc);
    LinOp::from_parts(space.into(), m)
}

fn lifted(op: &LinOp, space: HybridSpace, m: DMatrix<C64>) -> LinOp {
    flagged(space.into(), m, op.is_hermitian(), op.is_unitary())
}

pub fn pauli(axis: Axis) -> DMatrix<C64> {
    let o = C64::new(0.0, 0.0);
    let l = C64::new(1.0, 0.0);
    match axis {
        Axis::X => DMatrix::from_row_slice(2, 2, &[o, l, l, o]),
        Axis::Y => DMatrix::from_row_slice(2, 2, &[o, -I, I, o]),
        Axis::Z => DMatrix::from_row_slice(2, 2, &[l, o, o, -l]),
    }
}
