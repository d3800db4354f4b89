//! Physical parameters, drift and diffusion matrices, and stability.
//!
//! Natural units (ħ = k_B = 1) throughout. Quadrature order is (x, y, q, p):
//! x, y belong to mode 1 (frequency Δ, bath 1) and q, p to the parametrically
//! driven mode 2 (bare frequency ω₀, bath 2).

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// All physical parameters of the model and both baths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Mode-1 frequency Δ.
    pub delta: f64,
    /// Mode-2 bare frequency ω₀.
    pub omega0: f64,
    /// Parametric amplification strength Λ.
    pub lambda_drive: f64,
    /// Mode-mode coupling g; the drift uses G = 2g.
    pub g_coupling: f64,
    /// Mode-1 dissipation rate κ.
    pub kappa: f64,
    /// Mode-2 dissipation rate γ.
    pub gamma: f64,
    /// Bath-1 mean thermal occupation n̄₁.
    pub nbar1: f64,
    /// Bath-2 mean thermal occupation n̄₂.
    pub nbar2: f64,
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("delta", self.delta),
            ("omega0", self.omega0),
            ("lambda_drive", self.lambda_drive),
            ("g_coupling", self.g_coupling),
            ("kappa", self.kappa),
            ("gamma", self.gamma),
            ("nbar1", self.nbar1),
            ("nbar2", self.nbar2),
        ];
        for (name, value) in finite {
            if !value.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must be finite",
                });
            }
        }
        if self.kappa <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "kappa",
                value: self.kappa,
                reason: "dissipation rate must be strictly positive",
            });
        }
        if self.gamma <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "gamma",
                value: self.gamma,
                reason: "dissipation rate must be strictly positive",
            });
        }
        if self.nbar1 < 0.0 {
            return Err(Error::InvalidParameter {
                name: "nbar1",
                value: self.nbar1,
                reason: "thermal occupation must be non-negative",
            });
        }
        if self.nbar2 < 0.0 {
            return Err(Error::InvalidParameter {
                name: "nbar2",
                value: self.nbar2,
                reason: "thermal occupation must be non-negative",
            });
        }
        Ok(())
    }

    /// Coupling strength G = 2g as it appears in the drift matrix.
    pub fn big_g(&self) -> f64 {
        2.0 * self.g_coupling
    }

    /// N₁ = 2n̄₁ + 1.
    pub fn n1(&self) -> f64 {
        2.0 * self.nbar1 + 1.0
    }

    /// N₂ = 2n̄₂ + 1.
    pub fn n2(&self) -> f64 {
        2.0 * self.nbar2 + 1.0
    }

    /// ω = ω₀ − 2Λ, the slower quadrature frequency of mode 2.
    pub fn omega_minus(&self) -> f64 {
        self.omega0 - 2.0 * self.lambda_drive
    }

    /// Ω = ω₀ + 2Λ.
    pub fn omega_plus(&self) -> f64 {
        self.omega0 + 2.0 * self.lambda_drive
    }

    /// Frequency split Ω − ω = 4Λ.
    pub fn omega_split(&self) -> f64 {
        4.0 * self.lambda_drive
    }
}

/// Mean thermal occupation of a bath mode of the given frequency,
/// n̄ = 1/(exp(frequency/temperature) − 1).
pub fn thermal_occupation(frequency: f64, temperature: f64) -> Result<f64> {
    if !(temperature > 0.0) {
        return Err(Error::InvalidParameter {
            name: "temperature",
            value: temperature,
            reason: "must be strictly positive",
        });
    }
    if !(frequency > 0.0) {
        return Err(Error::InvalidParameter {
            name: "frequency",
            value: frequency,
            reason: "must be strictly positive",
        });
    }
    Ok(1.0 / (frequency / temperature).exp_m1())
}

/// Secondary constants shared by the stability test and the closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedConstants {
    /// (N₁, N₂).
    pub n_caps: (f64, f64),
    /// ω = ω₀ − 2Λ.
    pub omega_minus: f64,
    /// Ω = ω₀ + 2Λ.
    pub omega_plus: f64,
    /// δ = √(Δ² + κ²).
    pub delta_aux: f64,
    /// Γ² = γ² + ωΩ, kept signed.
    pub gamma_aux_sq: f64,
    /// Γ₁ = √(γ² + ω²).
    pub gamma1_aux: f64,
    /// κ₁ = γ + 2κ.
    pub kappa1: f64,
    /// κ₂ = 2γ + κ.
    pub kappa2: f64,
    /// Stability parameter η = δ²Γ² − G²Δω.
    pub eta: f64,
}

impl DerivedConstants {
    /// Γ = √(γ² + ωΩ), or `None` when γ² + ωΩ < 0.
    pub fn gamma_aux(&self) -> Option<f64> {
        (self.gamma_aux_sq >= 0.0).then(|| self.gamma_aux_sq.sqrt())
    }
}

pub fn derive_constants(params: &SystemParams) -> Result<DerivedConstants> {
    params.validate()?;
    let p = params;
    let omega = p.omega_minus();
    let omega_big = p.omega_plus();
    let delta_sq = p.delta * p.delta + p.kappa * p.kappa;
    let gamma_sq = p.gamma * p.gamma + omega * omega_big;
    let g = p.big_g();
    Ok(DerivedConstants {
        n_caps: (p.n1(), p.n2()),
        omega_minus: omega,
        omega_plus: omega_big,
        delta_aux: delta_sq.sqrt(),
        gamma_aux_sq: gamma_sq,
        gamma1_aux: (p.gamma * p.gamma + omega * omega).sqrt(),
        kappa1: p.gamma + 2.0 * p.kappa,
        kappa2: 2.0 * p.gamma + p.kappa,
        eta: delta_sq * gamma_sq - g * g * p.delta * omega,
    })
}

/// Drift matrix A, diffusion D, and the dissipative part A^irr.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftDiffusion {
    pub a_matrix: Matrix4<f64>,
    pub d_matrix: Matrix4<f64>,
    pub a_irr: Matrix4<f64>,
}

impl DriftDiffusion {
    /// Diagonal of D.
    pub fn diffusion_diag(&self) -> Vector4<f64> {
        self.d_matrix.diagonal()
    }
}

pub fn build_drift_diffusion(params: &SystemParams) -> Result<DriftDiffusion> {
    params.validate()?;
    let p = params;
    let (k, gm, g) = (p.kappa, p.gamma, p.big_g());
    let (w, big_w) = (p.omega_minus(), p.omega_plus());
    #[rustfmt::skip]
    let a_matrix = Matrix4::new(
        -k,       p.delta, 0.0,     0.0,
        -p.delta, -k,      g,       0.0,
        0.0,      0.0,     -gm,     w,
        g,        0.0,     -big_w,  -gm,
    );
    let d_matrix = Matrix4::from_diagonal(&Vector4::new(
        k * p.n1(),
        k * p.n1(),
        gm * p.n2(),
        gm * p.n2(),
    ));
    let a_irr = Matrix4::from_diagonal(&Vector4::new(-k, -k, -gm, -gm));
    Ok(DriftDiffusion {
        a_matrix,
        d_matrix,
        a_irr,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    /// η = δ²Γ² − G²Δω; its sign decides stability only for Δ, ω > 0.
    pub routh_hurwitz_eta: f64,
    pub max_real_eigenvalue: f64,
    /// All eigenvalues of A have strictly negative real part.
    pub stable: bool,
    #[serde(skip)]
    pub eigenvalues: Vec<Complex64>,
}

impl StabilityReport {
    /// Whether the η criterion applies (Δ > 0 and ω > 0) and, if so, whether
    /// it agrees with the eigenvalue verdict.
    pub fn eta_agrees(&self, params: &SystemParams) -> Option<bool> {
        (params.delta > 0.0 && params.omega_minus() > 0.0)
            .then_some((self.routh_hurwitz_eta > 0.0) == self.stable)
    }
}

pub fn check_stability(params: &SystemParams) -> Result<StabilityReport> {
    let consts = derive_constants(params)?;
    let dd = build_drift_diffusion(params)?;
    Ok(stability_of(&dd, consts.eta))
}

pub(crate) fn stability_of(dd: &DriftDiffusion, eta: f64) -> StabilityReport {
    let eigenvalues = linalg::eigenvalues4(&dd.a_matrix);
    let max_real = eigenvalues
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    StabilityReport {
        routh_hurwitz_eta: eta,
        max_real_eigenvalue: max_real,
        stable: max_real < 0.0,
        eigenvalues,
    }
}

/// Max real part of the spectrum of a drift matrix.
pub fn max_real_eigenvalue(a: &Matrix4<f64>) -> f64 {
    linalg::eigenvalues4(a)
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    pub(crate) fn decoupled() -> SystemParams {
        SystemParams {
            delta: 1.0,
            omega0: 1.0,
            lambda_drive: 0.0,
            g_coupling: 0.0,
            kappa: 0.2,
            gamma: 0.2,
            nbar1: 0.0,
            nbar2: 0.0,
        }
    }

    #[test]
    fn derived_constants_collapse_without_drive() {
        let c = derive_constants(&decoupled()).unwrap();
        assert_eq!(c.omega_minus, 1.0);
        assert_eq!(c.omega_plus, 1.0);
        assert_abs_diff_eq!(c.delta_aux, 1.04_f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(c.gamma_aux().unwrap(), 1.04_f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(c.gamma1_aux, 1.04_f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(c.eta, 1.0816, epsilon = 1e-14);
        assert_eq!(c.n_caps, (1.0, 1.0));
    }

    #[test]
    fn frequency_split() {
        let p = SystemParams {
            lambda_drive: 0.25,
            ..decoupled()
        };
        let c = derive_constants(&p).unwrap();
        assert_eq!(c.omega_minus, 0.5);
        assert_eq!(c.omega_plus, 1.5);
        assert_eq!(c.omega_plus - c.omega_minus, 4.0 * p.lambda_drive);
    }

    #[test]
    fn negative_gamma_sq_is_kept_signed() {
        // Λ = 0.6: ω = -0.2, Ω = 2.2, γ² + ωΩ = 0.04 - 0.44 < 0
        let p = SystemParams {
            lambda_drive: 0.6,
            ..decoupled()
        };
        let c = derive_constants(&p).unwrap();
        assert!(c.gamma_aux_sq < 0.0);
        assert!(c.gamma_aux().is_none());
        assert_abs_diff_eq!(c.eta, c.delta_aux.powi(2) * c.gamma_aux_sq, epsilon = 1e-15);
    }

    #[test]
    fn eta_at_fig3_resonance_matches_high_precision_value() {
        let lam = 0.2;
        let (w, big_w): (f64, f64) = (1.0 - 2.0 * lam, 1.0 + 2.0 * lam);
        let p = SystemParams {
            delta: (w * big_w).sqrt(),
            omega0: 1.0,
            lambda_drive: lam,
            g_coupling: 0.025,
            kappa: 0.2,
            gamma: 0.2,
            nbar1: 0.0,
            nbar2: 0.0,
        };
        // 40-digit evaluation of δ²Γ² − G²Δω
        let want = 0.773_025_227_291_513_2;
        assert_abs_diff_eq!(derive_constants(&p).unwrap().eta, want, epsilon = 1e-15);
    }

    #[test]
    fn rejects_bad_params() {
        for p in [
            SystemParams {
                kappa: 0.0,
                ..decoupled()
            },
            SystemParams {
                gamma: -1.0,
                ..decoupled()
            },
            SystemParams {
                nbar1: -0.1,
                ..decoupled()
            },
            SystemParams {
                nbar2: -1e-9,
                ..decoupled()
            },
            SystemParams {
                delta: f64::NAN,
                ..decoupled()
            },
        ] {
            assert!(matches!(
                derive_constants(&p),
                Err(Error::InvalidParameter { .. })
            ));
            assert!(build_drift_diffusion(&p).is_err());
            assert!(check_stability(&p).is_err());
        }
    }

    #[test]
    fn decoupled_drift_is_block_diagonal() {
        let dd = build_drift_diffusion(&decoupled()).unwrap();
        for i in 0..2 {
            for j in 2..4 {
                assert_eq!(dd.a_matrix[(i, j)], 0.0);
                assert_eq!(dd.a_matrix[(j, i)], 0.0);
            }
        }
        assert_eq!(
            dd.d_matrix,
            Matrix4::from_diagonal(&Vector4::new(0.2, 0.2, 0.2, 0.2))
        );
    }

    #[test]
    fn drift_matches_template_at_fig4_point() {
        let lam = 0.1;
        let (w, big_w): (f64, f64) = (1.0 - 2.0 * lam, 1.0 + 2.0 * lam);
        let delta = (w * big_w).sqrt();
        let p = SystemParams {
            delta,
            omega0: 1.0,
            lambda_drive: lam,
            g_coupling: 0.25,
            kappa: 0.2,
            gamma: 0.2,
            nbar1: 0.0,
            nbar2: 0.0,
        };
        let dd = build_drift_diffusion(&p).unwrap();
        let want = [
            [-0.2, delta, 0.0, 0.0],
            [-delta, -0.2, 0.5, 0.0],
            [0.0, 0.0, -0.2, 0.8],
            [0.5, 0.0, -1.2, -0.2],
        ];
        for (i, row) in want.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert_abs_diff_eq!(dd.a_matrix[(i, j)], v, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn structural_identities() {
        let p = SystemParams {
            delta: 0.7,
            omega0: 1.0,
            lambda_drive: 0.15,
            g_coupling: 0.1,
            kappa: 0.25,
            gamma: 0.125,
            nbar1: 2.0,
            nbar2: 0.5,
        };
        let dd = build_drift_diffusion(&p).unwrap();
        assert_eq!(dd.a_matrix.trace(), -2.0 * (p.kappa + p.gamma));
        let reversible = dd.a_matrix - dd.a_irr;
        for i in 0..4 {
            assert_eq!(reversible[(i, i)], 0.0);
        }
        assert_eq!(dd.d_matrix * dd.a_irr, dd.a_irr * dd.d_matrix);
        assert!(dd.diffusion_diag().iter().all(|&d| d > 0.0));
    }

    #[test]
    fn decoupled_oscillators_are_stable() {
        let p = SystemParams {
            delta: 1.3,
            kappa: 0.1,
            gamma: 0.4,
            ..decoupled()
        };
        let report = check_stability(&p).unwrap();
        assert!(report.stable);
        assert_abs_diff_eq!(report.max_real_eigenvalue, -0.1, epsilon = 1e-10);
        let mut want = vec![
            Complex64::new(-0.4, -1.0),
            Complex64::new(-0.4, 1.0),
            Complex64::new(-0.1, -1.3),
            Complex64::new(-0.1, 1.3),
        ];
        want.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        for (z, w) in report.eigenvalues.iter().zip(&want) {
            assert_abs_diff_eq!(z.re, w.re, epsilon = 1e-10);
            assert_abs_diff_eq!(z.im, w.im, epsilon = 1e-10);
        }
        assert_eq!(report.eta_agrees(&p), Some(true));
    }

    #[test]
    fn eta_crossing_coincides_with_eigenvalue_crossing() {
        // Fig. 3 operating point, scanning G upward until η changes sign.
        let lam = 0.2;
        let (w, big_w): (f64, f64) = (1.0 - 2.0 * lam, 1.0 + 2.0 * lam);
        let base = SystemParams {
            delta: (w * big_w).sqrt(),
            omega0: 1.0,
            lambda_drive: lam,
            g_coupling: 0.025,
            kappa: 0.2,
            gamma: 0.2,
            nbar1: 0.0,
            nbar2: 0.0,
        };
        let mut prev: Option<(f64, bool)> = None;
        let mut crossed = false;
        for step in 0..400 {
            let g = 0.01 * step as f64;
            let p = SystemParams {
                g_coupling: g / 2.0,
                ..base
            };
            let r = check_stability(&p).unwrap();
            // Away from the boundary both verdicts must match.
            if r.routh_hurwitz_eta.abs() > 1e-9 {
                assert_eq!(r.eta_agrees(&p), Some(true), "G = {g}");
            }
            if let Some((_, was_stable)) = prev {
                if was_stable && !r.stable {
                    crossed = true;
                    assert!(r.routh_hurwitz_eta <= 0.0);
                    assert!(r.max_real_eigenvalue >= 0.0);
                }
            }
            prev = Some((g, r.stable));
        }
        assert!(crossed, "scan never reached the instability");
    }

    #[test]
    fn occupation_from_temperature() {
        assert_abs_diff_eq!(
            thermal_occupation(1.0, 1.0).unwrap(),
            1.0 / (std::f64::consts::E - 1.0),
            epsilon = 1e-15
        );
        // High temperature: n̄ ≈ T/ω − 1/2
        let n = thermal_occupation(1.0, 50.0).unwrap();
        assert_abs_diff_eq!(n, 49.5, epsilon = 1e-2);
        assert!(thermal_occupation(1.0, 0.0).is_err());
    }
}
