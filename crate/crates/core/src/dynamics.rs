//! Optical Bloch equations in Lindblad form.
//!
//! The generator acts on column-major `vec(ρ)`:
//!
//! ```text
//! L = −i (I ⊗ H − Hᵀ ⊗ I) + Σ_c [ c̄ ⊗ c − ½ I ⊗ (c†c) − ½ (c†c)ᵀ ⊗ I ]
//! ```
//!
//! which is `dρ/dt = −i[H, ρ] + Σ_c (c ρ c† − ½{c†c, ρ})`.

use std::collections::VecDeque;

use crate::atom::LevelScheme;
use crate::error::{Error, Result};
use crate::linalg::{
    self, kron, matmul, null_vector, solve_linear, spectral_norm_estimate, ComplexMatrix, SuperOperator, C64, I,
    NULL_RESIDUAL_TOL, ONE, ZERO,
};

/// Largest allowed loop mismatch when assigning rotating-frame offsets.
pub const FRAME_TOL: f64 = 1e-6;
/// Hermiticity and trace tolerance for a valid density matrix.
pub const STATE_TOL: f64 = 1e-10;
/// Most negative eigenvalue accepted for a valid density matrix.
pub const EIGEN_FLOOR: f64 = -1e-8;
/// RK4 steps never exceed this multiple of 1 / ‖L‖₂.
pub const RK4_NORM_FRACTION: f64 = 0.05;
pub const MIN_STEP: f64 = 1e-18;

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let rho = Self { matrix };
        rho.check()?;
        Ok(rho)
    }

    pub fn pure(dim: usize, level: usize) -> Self {
        Self {
            matrix: ComplexMatrix::outer_basis(dim, level, level),
        }
    }

    pub(crate) fn from_matrix_unchecked(matrix: ComplexMatrix) -> Self {
        Self { matrix }
    }

    pub fn check(&self) -> Result<()> {
        let m = &self.matrix;
        if !m.is_square() {
            return Err(Error::Dimension("density matrix must be square".into()));
        }
        let herm = m.hermiticity_error();
        if herm > STATE_TOL {
            return Err(Error::validation(format!("density matrix not Hermitian ({herm:e})")));
        }
        let tr = m.trace();
        if (tr - ONE).norm() > STATE_TOL {
            return Err(Error::validation(format!("density matrix trace is {tr}")));
        }
        let lo = self.min_eigenvalue();
        if lo < EIGEN_FLOOR {
            return Err(Error::validation(format!("density matrix has eigenvalue {lo:e}")));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn population(&self, level: usize) -> f64 {
        self.matrix[(level, level)].re
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.population(i)).collect()
    }

    /// ρ_ij = ⟨i|ρ|j⟩.
    pub fn coherence(&self, i: usize, j: usize) -> C64 {
        self.matrix[(i, j)]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::hermitian_eigenvalues(&self.matrix)
            .map(|e| e[0])
            .unwrap_or(f64::NEG_INFINITY)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.matrix
            .sub(&other.matrix)
            .map(|d| d.max_abs())
            .unwrap_or(f64::INFINITY)
    }
}

/// Rotating-frame offsets θ_i with θ_upper − θ_lower = Δ for every laser
/// link. Each connected component is anchored at its first level.
fn frame_offsets(scheme: &LevelScheme) -> Result<Vec<f64>> {
    let n = scheme.dim();
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for c in &scheme.couplings {
        let d = scheme.lasers[c.laser].detuning;
        adj[c.lower].push((c.upper, d));
        adj[c.upper].push((c.lower, -d));
    }
    let mut theta: Vec<Option<f64>> = vec![None; n];
    for root in 0..n {
        if theta[root].is_some() {
            continue;
        }
        theta[root] = Some(0.0);
        let mut queue = VecDeque::from([root]);
        while let Some(a) = queue.pop_front() {
            let ta = theta[a].expect("visited");
            for &(b, d) in &adj[a] {
                let want = ta + d;
                match theta[b] {
                    None => {
                        theta[b] = Some(want);
                        queue.push_back(b);
                    }
                    Some(tb) if (tb - want).abs() > FRAME_TOL => {
                        return Err(Error::Frame(format!(
                            "levels {} and {} need frame offsets differing by {} and {} rad/s",
                            scheme.levels[a].label,
                            scheme.levels[b].label,
                            tb - ta,
                            d
                        )));
                    }
                    Some(_) => {}
                }
            }
        }
    }
    Ok(theta.into_iter().map(|t| t.unwrap_or(0.0)).collect())
}

/// Rotating-frame Hamiltonian (ħ = 1, rad/s).
///
/// Diagonal: Zeeman shift minus frame offset. Off-diagonal: `(Ω/2)·weight`
/// on every driven link.
pub fn build_hamiltonian(scheme: &LevelScheme) -> Result<ComplexMatrix> {
    let n = scheme.dim();
    let theta = frame_offsets(scheme)?;
    let mut h = ComplexMatrix::zeros(n, n);
    for (i, level) in scheme.levels.iter().enumerate() {
        h[(i, i)] = C64::new(level.zeeman_shift - theta[i], 0.0);
    }
    for c in &scheme.couplings {
        let amp = c.weight * (scheme.lasers[c.laser].rabi / 2.0);
        h[(c.upper, c.lower)] += amp;
        h[(c.lower, c.upper)] += amp.conj();
    }
    Ok(h)
}

/// Jump operators for decay, dephasing and sublevel transfer.
pub fn jump_operators(scheme: &LevelScheme) -> Vec<ComplexMatrix> {
    let n = scheme.dim();
    let mut ops = Vec::new();
    for d in scheme.decays.iter().filter(|d| d.rate > 0.0) {
        ops.push(ComplexMatrix::outer_basis(n, d.lower, d.upper).scale(C64::new(d.rate.sqrt(), 0.0)));
    }
    for d in scheme.dephasing.iter().filter(|d| d.rate > 0.0) {
        ops.push(ComplexMatrix::outer_basis(n, d.level, d.level).scale(C64::new(d.rate.sqrt(), 0.0)));
    }
    for t in scheme.transfers.iter().filter(|t| t.rate > 0.0) {
        ops.push(ComplexMatrix::outer_basis(n, t.to, t.from).scale(C64::new(t.rate.sqrt(), 0.0)));
    }
    ops
}

#[derive(Clone, Debug)]
pub struct Liouvillian {
    scheme: LevelScheme,
    hamiltonian: ComplexMatrix,
    generator: SuperOperator,
    spectral_norm: f64,
}

impl Liouvillian {
    pub fn scheme(&self) -> &LevelScheme {
        &self.scheme
    }

    pub fn hamiltonian(&self) -> &ComplexMatrix {
        &self.hamiltonian
    }

    pub fn generator(&self) -> &SuperOperator {
        &self.generator
    }

    pub fn dim(&self) -> usize {
        self.generator.dim()
    }

    /// Estimate of ‖L‖₂.
    pub fn spectral_norm(&self) -> f64 {
        self.spectral_norm
    }

    /// dρ/dt for an arbitrary operator.
    pub fn apply(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.generator.apply(rho)
    }
}

pub fn build_liouvillian(scheme: &LevelScheme) -> Result<Liouvillian> {
    let h = build_hamiltonian(scheme)?;
    let n = scheme.dim();
    let id = ComplexMatrix::identity(n);
    let mut gen = SuperOperator::zeros(n);
    {
        let m = gen.matrix_mut();
        m.add_scaled(&kron(&id, &h), -I);
        m.add_scaled(&kron(&h.transpose(), &id), I);
        for c in jump_operators(scheme) {
            let cdc = matmul(&c.adjoint(), &c)?;
            m.add_scaled(&kron(&c.conj(), &c), ONE);
            m.add_scaled(&kron(&id, &cdc), C64::new(-0.5, 0.0));
            m.add_scaled(&kron(&cdc.transpose(), &id), C64::new(-0.5, 0.0));
        }
    }
    let spectral_norm = spectral_norm_estimate(gen.matrix());
    Ok(Liouvillian {
        scheme: scheme.clone(),
        hamiltonian: h,
        generator: gen,
        spectral_norm,
    })
}

/// Trace-normalized kernel of the generator.
///
/// One population equation is replaced by the trace condition and the
/// resulting system solved directly; if that system is singular the kernel
/// is extracted by complete pivoting, which reports degenerate kernels.
pub fn steady_state(liouvillian: &Liouvillian) -> Result<DensityMatrix> {
    let n = liouvillian.dim();
    let gen = liouvillian.generator.matrix();
    let mut replaced = gen.clone();
    let id_row = SuperOperator::identity_row(n);
    for (c, &z) in id_row.iter().enumerate() {
        replaced[(0, c)] = z;
    }
    let mut rhs = vec![ZERO; n * n];
    rhs[0] = ONE;
    let v = match solve_linear(&replaced, &rhs) {
        Ok(v) => v,
        Err(Error::Singular { .. }) => null_vector(gen)?,
        Err(e) => return Err(e),
    };
    let raw = ComplexMatrix::unvectorize(n, &v)?;
    let tr = raw.trace();
    if tr.norm() < 1e-300 {
        return Err(Error::Degenerate { dimension: 0 });
    }
    let herm = raw.add(&raw.adjoint())?.scale(C64::new(0.5, 0.0) / tr.re);
    let residual = gen.matvec(&herm.vectorize())?;
    let res_norm = residual.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let v_norm = herm.frobenius_norm();
    if res_norm > NULL_RESIDUAL_TOL * gen.frobenius_norm() * v_norm.max(1.0) {
        return Err(Error::Degenerate { dimension: 0 });
    }
    DensityMatrix::new(herm)
}

/// Fixed-step RK4 integration of dρ/dt = L(ρ) over `t` seconds, calling
/// `observe(time, ρ)` at the start and after every step.
pub fn evolve_observed(
    liouvillian: &Liouvillian,
    rho0: &DensityMatrix,
    t: f64,
    dt_max: f64,
    mut observe: impl FnMut(f64, &ComplexMatrix),
) -> Result<DensityMatrix> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::validation(format!("evolution time must be >= 0, got {t}")));
    }
    if !(dt_max.is_finite() && dt_max > 0.0) {
        return Err(Error::validation(format!("dt_max must be > 0, got {dt_max}")));
    }
    let n = liouvillian.dim();
    if rho0.dim() != n {
        return Err(Error::Dimension(format!(
            "state of dimension {} for a {n}-level generator",
            rho0.dim()
        )));
    }
    observe(0.0, rho0.matrix());
    if t == 0.0 {
        return Ok(rho0.clone());
    }
    let norm = liouvillian.spectral_norm;
    let bound = if norm > 0.0 {
        dt_max.min(RK4_NORM_FRACTION / norm)
    } else {
        dt_max
    };
    let steps = (t / bound).ceil().max(1.0);
    let dt = t / steps;
    if dt < MIN_STEP {
        return Err(Error::Stiffness(format!(
            "required step {dt:e} s is below {MIN_STEP:e} s"
        )));
    }
    let steps = steps as usize;
    let m = liouvillian.generator.matrix();
    let mut y = rho0.matrix().vectorize();
    let mut tmp = vec![ZERO; y.len()];
    let half = C64::new(dt / 2.0, 0.0);
    let full = C64::new(dt, 0.0);
    let sixth = C64::new(dt / 6.0, 0.0);
    for step in 0..steps {
        let k1 = m.matvec_unchecked(&y);
        for ((t, &a), &b) in tmp.iter_mut().zip(&y).zip(&k1) {
            *t = a + half * b;
        }
        let k2 = m.matvec_unchecked(&tmp);
        for ((t, &a), &b) in tmp.iter_mut().zip(&y).zip(&k2) {
            *t = a + half * b;
        }
        let k3 = m.matvec_unchecked(&tmp);
        for ((t, &a), &b) in tmp.iter_mut().zip(&y).zip(&k3) {
            *t = a + full * b;
        }
        let k4 = m.matvec_unchecked(&tmp);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += sixth * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let state = ComplexMatrix::unvectorize(n, &y)?;
        observe((step + 1) as f64 * dt, &state);
    }
    Ok(DensityMatrix::from_matrix_unchecked(ComplexMatrix::unvectorize(n, &y)?))
}

/// Fixed-step RK4 with step ≤ `dt_max` and ≤ 0.05 / ‖L‖₂.
pub fn evolve(liouvillian: &Liouvillian, rho0: &DensityMatrix, t: f64, dt_max: f64) -> Result<DensityMatrix> {
    evolve_observed(liouvillian, rho0, t, dt_max, |_, _| {})
}
