//! Steady-state and transient covariance of the quadratures.
//!
//! The steady state solves A σ + σ Aᵀ = −D. Because σ is symmetric only its
//! ten upper-triangular entries are unknown, giving a dense 10×10 system.

use nalgebra::{Matrix2, Matrix4, SMatrix, SVector};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::{max_real_eigenvalue, DriftDiffusion};

/// Relative Lyapunov residual accepted from the direct solve.
pub const LYAPUNOV_TOL: f64 = 1e-12;
/// Absolute slack on the uncertainty bound ν ≥ 1/2.
pub const PHYSICALITY_TOL: f64 = 1e-10;

/// Symmetrized second moments of (x, y, q, p), zero first moments assumed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceMatrix {
    sigma: Matrix4<f64>,
}

impl CovarianceMatrix {
    /// Wraps `m`, symmetrizing it.
    pub fn new(m: Matrix4<f64>) -> Self {
        Self {
            sigma: (m + m.transpose()) * 0.5,
        }
    }

    /// Product of thermal states, diag{N₁/2, N₁/2, N₂/2, N₂/2}.
    pub fn thermal(n1: f64, n2: f64) -> Self {
        Self::new(Matrix4::from_diagonal(&nalgebra::Vector4::new(
            n1 / 2.0,
            n1 / 2.0,
            n2 / 2.0,
            n2 / 2.0,
        )))
    }

    /// Two-mode vacuum, I/2.
    pub fn vacuum() -> Self {
        Self::thermal(1.0, 1.0)
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.sigma
    }

    /// Zero-based entry σ_ij.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.sigma[(i, j)]
    }

    /// Returns a copy with σ_ij = σ_ji = value.
    pub fn with_entry(&self, i: usize, j: usize, value: f64) -> Self {
        let mut m = self.sigma;
        m[(i, j)] = value;
        m[(j, i)] = value;
        Self { sigma: m }
    }

    pub fn determinant(&self) -> f64 {
        self.sigma.determinant()
    }

    pub fn to_rows(&self) -> [[f64; 4]; 4] {
        let mut rows = [[0.0; 4]; 4];
        for (i, row) in rows.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.sigma[(i, j)];
            }
        }
        rows
    }

    /// max |A σ + σ Aᵀ + D|.
    pub fn lyapunov_residual(&self, dd: &DriftDiffusion) -> f64 {
        lyapunov_rhs(&dd.a_matrix, &dd.d_matrix, &self.sigma).amax()
    }

    /// Largest absolute entry difference.
    pub fn max_abs_diff(&self, other: &CovarianceMatrix) -> f64 {
        (self.sigma - other.sigma).amax()
    }

    /// ν₋ ≥ 1/2 − tol.
    pub fn is_physical(&self, tol: f64) -> bool {
        symplectic_eigenvalues(self).is_ok_and(|(_, nu_minus)| nu_minus >= 0.5 - tol)
    }
}

impl Serialize for CovarianceMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(serializer)
    }
}

fn lyapunov_rhs(a: &Matrix4<f64>, d: &Matrix4<f64>, sigma: &Matrix4<f64>) -> Matrix4<f64> {
    a * sigma + sigma * a.transpose() + d
}

const PAIRS: [(usize, usize); 10] = [
    (0, 0),
    (0, 1),
    (0, 2),
    (0, 3),
    (1, 1),
    (1, 2),
    (1, 3),
    (2, 2),
    (2, 3),
    (3, 3),
];

fn pair_index(i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    PAIRS
        .iter()
        .position(|&p| p == (i, j))
        .expect("indices below 4")
}

fn lyapunov_operator(a: &Matrix4<f64>) -> SMatrix<f64, 10, 10> {
    let mut op = SMatrix::<f64, 10, 10>::zeros();
    for (row, &(i, j)) in PAIRS.iter().enumerate() {
        // (Aσ)_ij + (σAᵀ)_ij = Σ_k A_ik σ_kj + Σ_k A_jk σ_ik
        for k in 0..4 {
            op[(row, pair_index(k, j))] += a[(i, k)];
            op[(row, pair_index(i, k))] += a[(j, k)];
        }
    }
    op
}

/// Steady-state covariance from A σ + σ Aᵀ = −D.
pub fn solve_steady_state(dd: &DriftDiffusion) -> Result<CovarianceMatrix> {
    let max_real = max_real_eigenvalue(&dd.a_matrix);
    if !(max_real < 0.0) {
        return Err(Error::Unstable { max_real });
    }

    let op = lyapunov_operator(&dd.a_matrix);
    let rhs = SVector::<f64, 10>::from_iterator(PAIRS.iter().map(|&(i, j)| -dd.d_matrix[(i, j)]));

    let lu = op.lu();
    let pivots = lu.u().diagonal();
    let (pmin, pmax) = pivots.iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), p| {
        (lo.min(p.abs()), hi.max(p.abs()))
    });
    if !(pmin > 1e-14 * pmax) {
        return Err(Error::Degenerate(format!(
            "Lyapunov operator is singular (pivot ratio {:.3e})",
            pmin / pmax
        )));
    }
    let mut x = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Degenerate("Lyapunov operator is singular".into()))?;
    // one step of iterative refinement
    let r = rhs - op * x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }

    let mut m = Matrix4::zeros();
    for (k, &(i, j)) in PAIRS.iter().enumerate() {
        m[(i, j)] = x[k];
        m[(j, i)] = x[k];
    }
    let sigma = CovarianceMatrix { sigma: m };

    let scale = dd.d_matrix.amax().max(1.0);
    let residual = sigma.lyapunov_residual(dd);
    if !(residual <= LYAPUNOV_TOL * scale) {
        return Err(Error::Degenerate(format!(
            "Lyapunov residual {residual:.3e} exceeds tolerance"
        )));
    }
    Ok(sigma)
}

/// Fixed-step RK4 integration of dσ/dt = A σ + σ Aᵀ + D.
#[derive(Debug, Clone)]
pub struct CovariancePropagator<'a> {
    dd: &'a DriftDiffusion,
    sigma: Matrix4<f64>,
    time: f64,
}

/// Magnitude past which an evolving covariance is declared divergent.
const DIVERGENCE_BOUND: f64 = 1e100;

impl<'a> CovariancePropagator<'a> {
    pub fn new(dd: &'a DriftDiffusion, sigma0: &CovarianceMatrix) -> Self {
        Self {
            dd,
            sigma: sigma0.sigma,
            time: 0.0,
        }
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn state(&self) -> CovarianceMatrix {
        CovarianceMatrix { sigma: self.sigma }
    }

    /// Advances by `h`; fails on non-finite or runaway entries.
    pub fn step(&mut self, h: f64) -> Result<()> {
        let (a, d) = (&self.dd.a_matrix, &self.dd.d_matrix);
        let s = &self.sigma;
        let k1 = lyapunov_rhs(a, d, s);
        let k2 = lyapunov_rhs(a, d, &(s + k1 * (h / 2.0)));
        let k3 = lyapunov_rhs(a, d, &(s + k2 * (h / 2.0)));
        let k4 = lyapunov_rhs(a, d, &(s + k3 * h));
        let next = s + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        let next = (next + next.transpose()) * 0.5;
        self.time += h;
        if next
            .iter()
            .any(|v| !v.is_finite() || v.abs() > DIVERGENCE_BOUND)
        {
            return Err(Error::Divergence { time: self.time });
        }
        self.sigma = next;
        Ok(())
    }
}

fn step_plan(t_final: f64, dt: f64) -> Result<(usize, f64)> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter {
            name: "dt",
            value: dt,
            reason: "time step must be positive and finite",
        });
    }
    if !(t_final >= 0.0) || !t_final.is_finite() {
        return Err(Error::InvalidParameter {
            name: "t_final",
            value: t_final,
            reason: "horizon must be non-negative and finite",
        });
    }
    let n = (t_final / dt - 1e-9).ceil().max(0.0) as usize;
    let h = if n == 0 { 0.0 } else { t_final / n as f64 };
    Ok((n, h))
}

/// Covariance at `t_final` starting from `sigma0`. The step actually used is
/// `t_final / ceil(t_final / dt)`, so the horizon is hit exactly.
pub fn evolve(
    dd: &DriftDiffusion,
    sigma0: &CovarianceMatrix,
    t_final: f64,
    dt: f64,
) -> Result<CovarianceMatrix> {
    let (n, h) = step_plan(t_final, dt)?;
    let mut prop = CovariancePropagator::new(dd, sigma0);
    for _ in 0..n {
        prop.step(h)?;
    }
    Ok(prop.state())
}

/// Like [`evolve`] but records the state every `record_every` steps
/// (and always at t = 0 and t = t_final).
pub fn evolve_series(
    dd: &DriftDiffusion,
    sigma0: &CovarianceMatrix,
    t_final: f64,
    dt: f64,
    record_every: usize,
) -> Result<Vec<(f64, CovarianceMatrix)>> {
    let (n, h) = step_plan(t_final, dt)?;
    let every = record_every.max(1);
    let mut prop = CovariancePropagator::new(dd, sigma0);
    let mut out = vec![(0.0, prop.state())];
    for k in 1..=n {
        prop.step(h)?;
        if k % every == 0 || k == n {
            out.push((prop.time(), prop.state()));
        }
    }
    Ok(out)
}

/// Symplectic form for quadrature order (x, y, q, p).
pub fn symplectic_form() -> Matrix4<f64> {
    #[rustfmt::skip]
    let j = Matrix4::new(
        0.0,  1.0, 0.0, 0.0,
        -1.0, 0.0, 0.0, 0.0,
        0.0,  0.0, 0.0, 1.0,
        0.0,  0.0, -1.0, 0.0,
    );
    j
}

/// Symplectic eigenvalues (ν₊, ν₋) of a two-mode covariance matrix.
pub fn symplectic_eigenvalues(sigma: &CovarianceMatrix) -> Result<(f64, f64)> {
    let m = &sigma.sigma;
    let alpha: Matrix2<f64> = m.fixed_view::<2, 2>(0, 0).into();
    let beta: Matrix2<f64> = m.fixed_view::<2, 2>(2, 2).into();
    let c: Matrix2<f64> = m.fixed_view::<2, 2>(0, 2).into();
    let seralian = alpha.determinant() + beta.determinant() + 2.0 * c.determinant();
    let det = m.determinant();
    if !(det > 0.0) {
        return Err(Error::Degenerate(format!(
            "covariance determinant {det:.3e} is not positive"
        )));
    }
    let mut disc = seralian * seralian - 4.0 * det;
    if disc < 0.0 {
        if disc < -1e-12 * seralian * seralian {
            return Err(Error::Degenerate(format!(
                "negative symplectic discriminant {disc:.3e}"
            )));
        }
        disc = 0.0;
    }
    let root = disc.sqrt();
    let nu_plus = ((seralian + root) / 2.0).sqrt();
    let nu_minus = ((seralian - root) / 2.0).max(0.0).sqrt();
    Ok((nu_plus, nu_minus))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_drift_diffusion, SystemParams};
    use approx::assert_abs_diff_eq;

    fn params(lam: f64, g: f64, n1: f64, n2: f64) -> SystemParams {
        let (w, big_w): (f64, f64) = (1.0 - 2.0 * lam, 1.0 + 2.0 * lam);
        SystemParams {
            delta: (w * big_w).sqrt(),
            omega0: 1.0,
            lambda_drive: lam,
            g_coupling: g / 2.0,
            kappa: 0.2,
            gamma: 0.2,
            nbar1: n1,
            nbar2: n2,
        }
    }

    #[test]
    fn decoupled_modes_thermalize_separately() {
        for (n1, n2) in [(0.0, 0.0), (3.0, 0.5), (0.0, 10.0)] {
            let p = SystemParams {
                delta: 0.7,
                kappa: 0.3,
                gamma: 0.1,
                ..params(0.0, 0.0, n1, n2)
            };
            let dd = build_drift_diffusion(&p).unwrap();
            let s = solve_steady_state(&dd).unwrap();
            let want = CovarianceMatrix::thermal(p.n1(), p.n2());
            assert!(s.max_abs_diff(&want) < 1e-14, "{s:?}");
        }
    }

    #[test]
    fn residual_and_symmetry() {
        let p = params(0.2, 0.05, 1.0, 4.0);
        let dd = build_drift_diffusion(&p).unwrap();
        let s = solve_steady_state(&dd).unwrap();
        assert!(s.lyapunov_residual(&dd) <= LYAPUNOV_TOL * dd.d_matrix.amax().max(1.0));
        assert_eq!(*s.matrix(), s.matrix().transpose());
    }

    #[test]
    fn diagonal_entries_follow_from_off_diagonals() {
        let p = SystemParams {
            delta: 0.8,
            omega0: 1.0,
            lambda_drive: 0.12,
            g_coupling: 0.2,
            kappa: 0.15,
            gamma: 0.3,
            nbar1: 1.5,
            nbar2: 0.2,
        };
        let dd = build_drift_diffusion(&p).unwrap();
        let s = solve_steady_state(&dd).unwrap();
        let (n1, n2, g) = (p.n1(), p.n2(), p.big_g());
        let (w, big_w) = (p.omega_minus(), p.omega_plus());
        let e = |i: usize, j: usize| s.get(i - 1, j - 1);
        assert_abs_diff_eq!(
            e(1, 1),
            n1 / 2.0 + p.delta / p.kappa * e(1, 2),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            e(2, 2),
            n1 / 2.0 - p.delta / p.kappa * e(1, 2) + g / p.kappa * e(2, 3),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(e(3, 3), n2 / 2.0 + w / p.gamma * e(3, 4), epsilon = 1e-12);
        assert_abs_diff_eq!(
            e(4, 4),
            n2 / 2.0 - big_w / p.gamma * e(3, 4) + g / p.gamma * e(1, 4),
            epsilon = 1e-12
        );
    }

    #[test]
    fn unstable_drift_is_rejected() {
        let p = params(0.1, 2.0, 0.0, 0.0);
        let dd = build_drift_diffusion(&p).unwrap();
        assert!(matches!(
            solve_steady_state(&dd),
            Err(Error::Unstable { .. })
        ));
    }

    #[test]
    fn evolve_zero_horizon_is_identity() {
        let dd = build_drift_diffusion(&params(0.2, 0.05, 0.0, 0.0)).unwrap();
        let s0 = CovarianceMatrix::thermal(2.0, 5.0).with_entry(0, 3, 0.1);
        assert_eq!(evolve(&dd, &s0, 0.0, 0.01).unwrap(), s0);
    }

    #[test]
    fn steady_state_is_a_fixed_point() {
        let dd = build_drift_diffusion(&params(0.2, 0.05, 0.5, 2.0)).unwrap();
        let s = solve_steady_state(&dd).unwrap();
        for horizon in [0.1, 5.0, 40.0] {
            let out = evolve(&dd, &s, horizon, 0.01).unwrap();
            assert!(out.max_abs_diff(&s) <= 1e-10);
        }
    }

    #[test]
    fn vacuum_start_converges_to_steady_state() {
        let dd = build_drift_diffusion(&params(0.2, 0.05, 0.0, 0.0)).unwrap();
        let s = solve_steady_state(&dd).unwrap();
        let out = evolve(&dd, &CovarianceMatrix::vacuum(), 50.0 / 0.2, 0.01).unwrap();
        assert!(out.max_abs_diff(&s) <= 1e-8, "{}", out.max_abs_diff(&s));
    }

    #[test]
    fn unstable_evolution_reports_divergence() {
        let dd = build_drift_diffusion(&params(0.1, 2.0, 0.0, 0.0)).unwrap();
        let err = evolve(&dd, &CovarianceMatrix::vacuum(), 1e5, 0.01).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }));
    }

    #[test]
    fn evolve_rejects_bad_steps() {
        let dd = build_drift_diffusion(&params(0.0, 0.0, 0.0, 0.0)).unwrap();
        let s0 = CovarianceMatrix::vacuum();
        assert!(evolve(&dd, &s0, 1.0, 0.0).is_err());
        assert!(evolve(&dd, &s0, -1.0, 0.1).is_err());
    }

    #[test]
    fn series_records_endpoints() {
        let dd = build_drift_diffusion(&params(0.2, 0.05, 0.0, 0.0)).unwrap();
        let series = evolve_series(&dd, &CovarianceMatrix::vacuum(), 1.05, 0.1, 3).unwrap();
        assert_eq!(series.first().unwrap().0, 0.0);
        assert_abs_diff_eq!(series.last().unwrap().0, 1.05, epsilon = 1e-12);
    }

    #[test]
    fn symplectic_eigenvalues_of_simple_states() {
        let (p, m) = symplectic_eigenvalues(&CovarianceMatrix::thermal(3.0, 7.0)).unwrap();
        assert_abs_diff_eq!(p, 3.5, epsilon = 1e-14);
        assert_abs_diff_eq!(m, 1.5, epsilon = 1e-14);
        let (p, m) = symplectic_eigenvalues(&CovarianceMatrix::vacuum()).unwrap();
        assert_abs_diff_eq!(p, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(m, 0.5, epsilon = 1e-14);
        assert!(CovarianceMatrix::vacuum().is_physical(PHYSICALITY_TOL));
        assert!(!CovarianceMatrix::thermal(0.5, 1.0).is_physical(PHYSICALITY_TOL));
    }

    #[test]
    fn symplectic_eigenvalues_reject_indefinite_input() {
        let bad = CovarianceMatrix::vacuum().with_entry(3, 3, -0.5);
        assert!(symplectic_eigenvalues(&bad).is_err());
    }
}
