//! Wigner entropy and the steady-state entropy-production budget.
//!
//! Π_s is available through three algebraically equivalent routes:
//!
//! * the trace form `Tr(2 A^irr D⁻¹ A^irr σ + A^irr)`, which only needs the
//!   diagonal of σ;
//! * the off-diagonal form, linear in σ14, σ23 and σ34;
//! * the split Π₀ + Π₁ into a vacuum part and an occupation-gradient part,
//!   built from the closed-form coefficients.
//!
//! Agreement of all three is the main consistency check of the toolkit.

use serde::Serialize;

use crate::closedform::ClosedFormCoefficients;
use crate::error::{Error, Result};
use crate::lyapunov::CovarianceMatrix;
use crate::model::{DriftDiffusion, SystemParams};

/// Threshold under which a negative Π_s is treated as round-off in sign tests.
pub const SECOND_LAW_TOL: f64 = 1e-10;

/// Differential entropy of the Gaussian Wigner function of a two-mode state,
/// `2 ln(2πe) + ½ ln det σ`.
pub fn wigner_entropy(sigma: &CovarianceMatrix) -> Result<f64> {
    let det = sigma.determinant();
    if !(det > 0.0) {
        return Err(Error::Degenerate(format!(
            "covariance determinant {det:.3e} is not positive"
        )));
    }
    let modes = 2.0;
    Ok(modes * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln() + 0.5 * det.ln())
}

/// Π_s from the trace formula, with its mode-1 and mode-2 addends.
pub fn entropy_production_trace(
    dd: &DriftDiffusion,
    sigma: &CovarianceMatrix,
) -> (f64, (f64, f64)) {
    let s = sigma.matrix();
    let mut per_index = [0.0; 4];
    for (i, slot) in per_index.iter_mut().enumerate() {
        let a = dd.a_irr[(i, i)];
        *slot = 2.0 * a * a / dd.d_matrix[(i, i)] * s[(i, i)] + a;
    }
    let mode1 = per_index[0] + per_index[1];
    let mode2 = per_index[2] + per_index[3];
    (mode1 + mode2, (mode1, mode2))
}

/// Π_s = (2G/N₂)σ14 + (2G/N₁)σ23 − (2(Ω−ω)/N₂)σ34.
pub fn entropy_production_offdiag(params: &SystemParams, sigma: &CovarianceMatrix) -> f64 {
    let g = params.big_g();
    let (n1, n2) = (params.n1(), params.n2());
    2.0 * g / n2 * sigma.get(0, 3) + 2.0 * g / n1 * sigma.get(1, 2)
        - 2.0 * params.omega_split() / n2 * sigma.get(2, 3)
}

/// The full budget at a steady state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropyBudget {
    pub pi_s_trace: f64,
    pub pi_s_offdiag: f64,
    /// (mode 1, mode 2) addends of the trace form.
    pub pi_s_per_mode: (f64, f64),
    /// Vacuum part Π₀.
    pub pi0: f64,
    /// Occupation-gradient part Π₁.
    pub pi1: f64,
    /// (π11, π12, π21, π22).
    pub pi_components: (f64, f64, f64, f64),
    /// Heat current J₁₂ = G a11 (N₁ − N₂).
    pub j12: f64,
    /// Parametric current J′₁₂ = −(Ω − ω)(N₁ − N₂) a31.
    pub jp12: f64,
    pub j1: f64,
    pub j2: f64,
    pub j3: f64,
    /// Steady-state (N₁ˢ, N₂ˢ) from the coefficients.
    pub occupations: (f64, f64),
    /// φ_s = −Π_s.
    pub entropy_flux: f64,
}

impl EntropyBudget {
    pub fn pi11(&self) -> f64 {
        self.pi_components.0
    }
    pub fn pi12(&self) -> f64 {
        self.pi_components.1
    }
    pub fn pi21(&self) -> f64 {
        self.pi_components.2
    }
    pub fn pi22(&self) -> f64 {
        self.pi_components.3
    }

    /// Π₀ + Π₁.
    pub fn pi_s_split(&self) -> f64 {
        self.pi0 + self.pi1
    }

    /// Largest pairwise relative disagreement among the three Π_s routes.
    pub fn max_route_disagreement(&self) -> f64 {
        let (a, b, c) = (self.pi_s_trace, self.pi_s_offdiag, self.pi_s_split());
        crate::rel_diff(a, b)
            .max(crate::rel_diff(a, c))
            .max(crate::rel_diff(b, c))
    }

    /// Π_s ≥ 0 up to [`SECOND_LAW_TOL`].
    pub fn satisfies_second_law(&self) -> bool {
        self.pi_s_trace >= -SECOND_LAW_TOL
    }
}

/// Assembles the budget. `sigma` must be the steady state for `params`; the
/// Π₀/Π₁ split, the currents J and the occupations come from `coeffs`, while
/// the trace/off-diagonal forms and the j currents come from `sigma`.
pub fn decompose(
    params: &SystemParams,
    coeffs: &ClosedFormCoefficients,
    dd: &DriftDiffusion,
    sigma: &CovarianceMatrix,
) -> Result<EntropyBudget> {
    if !(coeffs.constants.omega_minus > 0.0) {
        return Err(Error::ClosedFormDomain(format!(
            "requires ω > 0, got {}",
            coeffs.constants.omega_minus
        )));
    }
    let g = params.big_g();
    let lam4 = 4.0 * params.lambda_drive;
    let split = params.omega_split();
    let (n1, n2) = (params.n1(), params.n2());
    let c = coeffs;

    let (pi_s_trace, pi_s_per_mode) = entropy_production_trace(dd, sigma);
    let pi_s_offdiag = entropy_production_offdiag(params, sigma);

    let pi0 = g * (c.a12 + c.a11 + c.a22 + c.a21) - lam4 * (c.a32 + c.a31);
    let pi21 = g * c.a11 - lam4 * c.a31;
    let pi12 = g * c.a22;
    let pi11 = g * c.a21;
    let pi22 = g * c.a12 - lam4 * c.a32;
    let pi1 = (pi21 / n2 - pi12 / n1) * (n1 - n2);

    let j12 = g * c.a11 * (n1 - n2);
    let jp12 = -split * (n1 - n2) * c.a31;

    let (s14, s23, s34) = (sigma.get(0, 3), sigma.get(1, 2), sigma.get(2, 3));
    let j1 = 2.0 * g * s14;
    let j3 = -split * s34;
    let j2 = 2.0 * g * s23 + j3;

    let occ1 = (1.0 + pi11 / (2.0 * params.kappa)) * n1 + pi12 / (2.0 * params.kappa) * n2;
    let occ2 = (1.0 + pi22 / (2.0 * params.gamma)) * n2 + pi21 / (2.0 * params.gamma) * n1;

    Ok(EntropyBudget {
        pi_s_trace,
        pi_s_offdiag,
        pi_s_per_mode,
        pi0,
        pi1,
        pi_components: (pi11, pi12, pi21, pi22),
        j12,
        jp12,
        j1,
        j2,
        j3,
        occupations: (occ1, occ2),
        entropy_flux: -pi_s_trace,
    })
}

/// Onsager-form approximation of Π₁ in the high-temperature, undriven regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassicalLimit {
    /// J₀ (1/T₂ − 1/T₁).
    pub pi1_approx: f64,
    /// J₀ = ω G a₀ (N₁ − N₂)/2.
    pub j0: f64,
}

/// Reports the approximation unconditionally; whether Λ = 0, Δ ≈ ω and
/// ω ≪ T₂ actually hold is left to the caller.
pub fn classical_limit_pi1(
    params: &SystemParams,
    coeffs: &ClosedFormCoefficients,
    t1: f64,
    t2: f64,
) -> Result<ClassicalLimit> {
    for (name, t) in [("t1", t1), ("t2", t2)] {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::InvalidParameter {
                name,
                value: t,
                reason: "temperature must be strictly positive",
            });
        }
    }
    let j0 = params.omega_minus() * params.big_g() * coeffs.a0 * (params.n1() - params.n2()) / 2.0;
    Ok(ClassicalLimit {
        pi1_approx: j0 * (1.0 / t2 - 1.0 / t1),
        j0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closedform::coefficients;
    use crate::lyapunov::solve_steady_state;
    use crate::model::build_drift_diffusion;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{E, PI};

    fn budget(p: &SystemParams) -> EntropyBudget {
        let dd = build_drift_diffusion(p).unwrap();
        let s = solve_steady_state(&dd).unwrap();
        decompose(p, &coefficients(p).unwrap(), &dd, &s).unwrap()
    }

    fn base() -> SystemParams {
        SystemParams {
            delta: 0.95,
            omega0: 1.0,
            lambda_drive: 0.1,
            g_coupling: 0.2,
            kappa: 0.2,
            gamma: 0.3,
            nbar1: 2.0,
            nbar2: 0.5,
        }
    }

    #[test]
    fn wigner_entropy_of_simple_states() {
        assert_abs_diff_eq!(
            wigner_entropy(&CovarianceMatrix::vacuum()).unwrap(),
            2.0 * (PI * E).ln(),
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            wigner_entropy(&CovarianceMatrix::thermal(3.0, 3.0)).unwrap(),
            2.0 * (3.0 * PI * E).ln(),
            epsilon = 1e-14
        );
        let bad = CovarianceMatrix::vacuum().with_entry(0, 0, -0.5);
        assert!(wigner_entropy(&bad).is_err());
    }

    #[test]
    fn equilibrium_produces_no_entropy() {
        let p = SystemParams {
            lambda_drive: 0.0,
            g_coupling: 0.0,
            ..base()
        };
        let dd = build_drift_diffusion(&p).unwrap();
        let s = solve_steady_state(&dd).unwrap();
        let (pi, (m1, m2)) = entropy_production_trace(&dd, &s);
        assert!(pi.abs() < 1e-14 && m1.abs() < 1e-14 && m2.abs() < 1e-14);
        assert_eq!(entropy_production_offdiag(&p, &s), 0.0);
    }

    #[test]
    fn per_mode_split_matches_grouped_form() {
        let p = base();
        let dd = build_drift_diffusion(&p).unwrap();
        let s = solve_steady_state(&dd).unwrap();
        let (_, (m1, m2)) = entropy_production_trace(&dd, &s);
        let want1 = 2.0 * p.kappa * ((s.get(0, 0) + s.get(1, 1)) / p.n1() - 1.0);
        let want2 = 2.0 * p.gamma * ((s.get(2, 2) + s.get(3, 3)) / p.n2() - 1.0);
        assert_abs_diff_eq!(m1, want1, epsilon = 1e-14);
        assert_abs_diff_eq!(m2, want2, epsilon = 1e-14);
    }

    #[test]
    fn offdiag_form_ignores_mode1_self_correlation() {
        let p = base();
        let dd = build_drift_diffusion(&p).unwrap();
        let s = solve_steady_state(&dd).unwrap();
        let perturbed = s.with_entry(0, 1, s.get(0, 1) + 0.37);
        assert_eq!(
            entropy_production_offdiag(&p, &s),
            entropy_production_offdiag(&p, &perturbed)
        );
    }

    #[test]
    fn three_routes_agree() {
        let b = budget(&base());
        assert!(b.max_route_disagreement() < 1e-10, "{b:?}");
        assert!(b.satisfies_second_law());
        assert_eq!(b.entropy_flux, -b.pi_s_trace);
    }

    #[test]
    fn equal_baths_leave_only_vacuum_part() {
        let p = SystemParams {
            nbar1: 1.5,
            nbar2: 1.5,
            ..base()
        };
        let b = budget(&p);
        assert_eq!(b.pi1, 0.0);
        assert!(crate::rel_diff(b.pi_s_trace, b.pi0) < 1e-10);
    }

    #[test]
    fn vacuum_currents_sum_to_pi0_without_drive() {
        let p = SystemParams {
            lambda_drive: 0.0,
            nbar1: 0.0,
            nbar2: 0.0,
            ..base()
        };
        let b = budget(&p);
        assert_eq!(b.j3, 0.0);
        assert!(crate::rel_diff(b.pi0, b.j1 + b.j2) < 1e-10);
    }

    #[test]
    fn onsager_part_matches_current_form() {
        let p = base();
        let b = budget(&p);
        let (n1, n2) = (p.n1(), p.n2());
        assert!(crate::rel_diff(b.pi1, (b.j12 + b.jp12) * (1.0 / n2 - 1.0 / n1)) < 1e-10);
        assert!(b.pi1 > 0.0);
        assert!(b.j12 > 0.0 && b.jp12 < 0.0 && b.j12.abs() > b.jp12.abs());
        assert!(crate::rel_diff(b.pi12(), b.pi21()) < 1e-10);
    }

    #[test]
    fn occupations_match_lyapunov_diagonal() {
        let p = base();
        let dd = build_drift_diffusion(&p).unwrap();
        let s = solve_steady_state(&dd).unwrap();
        let b = decompose(&p, &coefficients(&p).unwrap(), &dd, &s).unwrap();
        assert!(crate::rel_diff(b.occupations.0, s.get(0, 0) + s.get(1, 1)) < 1e-10);
        assert!(crate::rel_diff(b.occupations.1, s.get(2, 2) + s.get(3, 3)) < 1e-10);
    }

    #[test]
    fn classical_limit_zero_gradient_and_bad_temperatures() {
        let p = SystemParams {
            lambda_drive: 0.0,
            ..base()
        };
        let cf = coefficients(&p).unwrap();
        assert_eq!(
            classical_limit_pi1(&p, &cf, 10.0, 10.0).unwrap().pi1_approx,
            0.0
        );
        assert!(classical_limit_pi1(&p, &cf, 0.0, 1.0).is_err());
        assert!(classical_limit_pi1(&p, &cf, 1.0, -2.0).is_err());
    }
}
