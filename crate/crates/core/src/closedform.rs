//! Analytic steady-state coefficients.
//!
//! The off-diagonal covariances that carry the entropy production are linear
//! in the bath factors N₁, N₂:
//!
//! ```text
//! σ14 = (a11 N1 + a12 N2)/2,  σ23 = (a21 N1 + a22 N2)/2,  σ34 = (a31 N1 + a32 N2)/2
//! ```
//!
//! The a_ij are rational functions of the model parameters, valid for Δ > 0,
//! ω > 0 and η > 0. They serve as an independent check of the Lyapunov solve.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    build_drift_diffusion, derive_constants, max_real_eigenvalue, DerivedConstants, SystemParams,
};

/// η below this fraction of δ²Γ² marks the coefficients as ill-conditioned.
pub const ETA_GUARD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedFormCoefficients {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
    pub a31: f64,
    pub a32: f64,
    /// Common denominator, positive on the stable domain.
    pub d1: f64,
    /// u = γ³ + 4γ²κ + δ²κ + 4γκ².
    pub u: f64,
    /// u₁ = u + γωΩ.
    pub u1: f64,
    /// Auxiliary appearing in the closed form of π₂₂.
    pub y1: f64,
    /// Coefficient a₁₁ = a₂₂ of the undriven (Λ = 0) problem at the same ω.
    pub a0: f64,
    /// Resonance denominator d₀ = Γ₁⁴ − G²ω².
    pub d0: f64,
    /// η close to zero relative to δ²Γ².
    pub ill_conditioned: bool,
    #[serde(skip)]
    pub constants: DerivedConstants,
}

impl ClosedFormCoefficients {
    /// (σ14, σ23, σ34) for bath factors N₁, N₂.
    pub fn offdiag_covariances(&self, n1: f64, n2: f64) -> (f64, f64, f64) {
        (
            (self.a11 * n1 + self.a12 * n2) / 2.0,
            (self.a21 * n1 + self.a22 * n2) / 2.0,
            (self.a31 * n1 + self.a32 * n2) / 2.0,
        )
    }
}

fn closed_form_domain(params: &SystemParams, c: &DerivedConstants) -> Result<()> {
    if !(c.omega_minus > 0.0) {
        return Err(Error::ClosedFormDomain(format!(
            "requires ω = ω₀ − 2Λ > 0, got {}",
            c.omega_minus
        )));
    }
    if !(params.delta > 0.0) {
        return Err(Error::ClosedFormDomain(format!(
            "requires Δ > 0, got {}",
            params.delta
        )));
    }
    if !(c.eta > 0.0) {
        let dd = build_drift_diffusion(params)?;
        return Err(Error::Unstable {
            max_real: max_real_eigenvalue(&dd.a_matrix),
        });
    }
    Ok(())
}

pub fn coefficients(params: &SystemParams) -> Result<ClosedFormCoefficients> {
    let c = derive_constants(params)?;
    closed_form_domain(params, &c)?;

    let (kappa, gamma, delta) = (params.kappa, params.gamma, params.delta);
    let g = params.big_g();
    let (w, big_w) = (c.omega_minus, c.omega_plus);
    let ww = w * big_w;
    let d2 = c.delta_aux * c.delta_aux;
    let gam2 = c.gamma_aux_sq;
    let gam1_2 = c.gamma1_aux * c.gamma1_aux;
    let (k1, k2) = (c.kappa1, c.kappa2);
    let eta = c.eta;
    let sum = gamma + kappa;

    let u = gamma.powi(3) + 4.0 * gamma * gamma * kappa + d2 * kappa + 4.0 * gamma * kappa * kappa;
    let u1 = u + gamma * ww;

    // Manifestly positive expansion of d1 = 2η(−η(γ+κ)² + u₁(γδ² + κΓ²)).
    let d1 = 2.0
        * eta
        * (kappa
            * gamma
            * (sum.powi(4)
                + 2.0 * sum * sum * (delta * delta + ww)
                + (delta * delta - ww).powi(2))
            + g * g * delta * w * sum * sum);

    let a11 = g * kappa * gamma / d1 * (d2 * gam2 * u1 + eta * (gam2 * k1 + d2 * k2));
    let a12 = g * delta * gamma / (w * d1)
        * (d2 * gam1_2 * gamma * u1 - eta * (kappa * k1 * (w * w + ww) + gamma * (u + k1 * w * w)));
    let a21 = g * kappa * w / (delta * d1)
        * (d2 * gam2 * kappa * u1 - eta * (d2 * k2 * k2 + kappa * gamma * gam2));
    let a22 = a11 - g * kappa * gamma / d1 * (ww - w * w) * (d2 * u1 + eta * sum);
    let a31 = g * g * kappa * gamma / d1 * (d2 * u1 + eta * sum) * w;
    let a32 = gamma / (w * d1)
        * (d2 * d2 * gam1_2 * gamma * u1 + eta * eta * sum * k1
            - eta * gamma * d2 * (2.0 * u + k1 * w * w - kappa * (d2 + gamma * k1))
            - eta * gamma * kappa * (ww - w * w) * (ww + k1 * k1)
            - eta * ww * d2 * (gamma * gamma + k1 * kappa));

    let y1 = u1 * gamma * gam1_2 * d2 * d2
        + eta * eta * kappa * sum
        + eta * kappa * gamma * gam1_2 * (k1 * k1 + ww)
        - eta * d2 * (gam1_2 * gamma * k1 + gam2 * kappa * sum);

    // Undriven coefficient: Γ → Γ₁, η → η₁, ωΩ → ω² in u₁.
    let eta1 = d2 * gam1_2 - g * g * delta * w;
    let u1_undriven = u + gamma * w * w;
    let a0 = g * kappa * gamma * (d2 * gam1_2 * u1_undriven + eta1 * (gam1_2 * k1 + d2 * k2))
        / (2.0 * eta1 * (-eta1 * sum * sum + u1_undriven * (gamma * d2 + kappa * gam1_2)));

    let d0 = gam1_2 * gam1_2 - g * g * w * w;

    let ill_conditioned = eta < ETA_GUARD * d2 * gam2;
    if ill_conditioned {
        log::warn!(
            "closed-form coefficients near the stability boundary: η = {eta:.3e}, δ²Γ² = {:.3e}",
            d2 * gam2
        );
    }

    Ok(ClosedFormCoefficients {
        a11,
        a12,
        a21,
        a22,
        a31,
        a32,
        d1,
        u,
        u1,
        y1,
        a0,
        d0,
        ill_conditioned,
        constants: c,
    })
}

/// Vacuum entropy production of the driven mode alone (G → 0): 8γΛ²/Γ².
pub fn vacuum_production_uncoupled(params: &SystemParams) -> Result<f64> {
    let c = derive_constants(params)?;
    if !(c.gamma_aux_sq > 0.0) {
        return Err(Error::ClosedFormDomain(format!(
            "requires γ² + ωΩ > 0, got {}",
            c.gamma_aux_sq
        )));
    }
    Ok(8.0 * params.gamma * params.lambda_drive.powi(2) / c.gamma_aux_sq)
}

/// Closed forms of the vacuum components written without reference to the
/// a_ij combinations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VacuumComponents {
    pub pi12: f64,
    pub pi11: f64,
    pub pi22: f64,
}

pub fn vacuum_components_closed(
    params: &SystemParams,
    coeffs: &ClosedFormCoefficients,
) -> Result<VacuumComponents> {
    let c = &coeffs.constants;
    closed_form_domain(params, c)?;
    let (kappa, gamma, delta) = (params.kappa, params.gamma, params.delta);
    let g = params.big_g();
    let w = c.omega_minus;
    let split = c.omega_plus - c.omega_minus;
    let d2 = c.delta_aux * c.delta_aux;
    let gam2 = c.gamma_aux_sq;
    let gam1_2 = c.gamma1_aux * c.gamma1_aux;
    let eta = c.eta;
    let (d1, u1) = (coeffs.d1, coeffs.u1);

    let pi12 = g * g * kappa * gamma / d1
        * (gam1_2 * d2 * u1
            + eta * kappa * (gam2 + gam1_2 + d2)
            + eta * gamma * (2.0 * d2 + gam1_2));
    let pi11 = g * g * kappa * w / (delta * d1)
        * (d2 * gam2 * kappa * u1 - eta * (d2 * c.kappa2 * c.kappa2 + kappa * gamma * gam2));
    let pi22 = vacuum_production_uncoupled(params)?
        + g * coeffs.a12
        + gamma * split * gam1_2 / (2.0 * gam2 * w)
        - gamma * split / (d1 * w) * coeffs.y1;

    Ok(VacuumComponents { pi12, pi11, pi22 })
}

/// Closed form of J₁₂ + J′₁₂ for the given bath factors.
pub fn total_current_closed(params: &SystemParams, coeffs: &ClosedFormCoefficients) -> f64 {
    let c = &coeffs.constants;
    let (kappa, gamma) = (params.kappa, params.gamma);
    let g = params.big_g();
    let d2 = c.delta_aux * c.delta_aux;
    let gam1_2 = c.gamma1_aux * c.gamma1_aux;
    let (n1, n2) = c.n_caps;
    g * g * kappa * gamma / coeffs.d1
        * (n1 - n2)
        * (d2 * gam1_2 * coeffs.u1
            + c.eta * (c.gamma_aux_sq * kappa + d2 * c.kappa2 + gam1_2 * (kappa + gamma)))
}

/// Vacuum entropy production and its components at resonance
/// (Λ = 0, γ = κ, Δ = ω₀).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResonanceComponents {
    pub pi0: f64,
    pub pi12: f64,
    /// Equal to π₂₂ in this regime.
    pub pi11: f64,
}

impl ResonanceComponents {
    /// 2π₁₂ + 2π₁₁, which must reproduce π₀.
    pub fn component_sum(&self) -> f64 {
        2.0 * self.pi12 + 2.0 * self.pi11
    }
}

const RESONANCE_TOL: f64 = 1e-12;

pub fn resonance_case(params: &SystemParams) -> Result<ResonanceComponents> {
    params.validate()?;
    let close = |a: f64, b: f64| (a - b).abs() <= RESONANCE_TOL * a.abs().max(b.abs()).max(1.0);
    if !close(params.lambda_drive, 0.0) {
        return Err(Error::ClosedFormDomain(
            "resonance forms require Λ = 0".into(),
        ));
    }
    if !close(params.gamma, params.kappa) {
        return Err(Error::ClosedFormDomain(
            "resonance forms require γ = κ".into(),
        ));
    }
    if !close(params.delta, params.omega0) {
        return Err(Error::ClosedFormDomain(
            "resonance forms require Δ = ω₀".into(),
        ));
    }
    let g = params.big_g();
    let gamma = params.gamma;
    let w = params.omega_minus();
    let gam1_2 = gamma * gamma + w * w;
    let d0 = gam1_2 * gam1_2 - g * g * w * w;
    if !(d0 > 0.0) {
        let dd = build_drift_diffusion(params)?;
        return Err(Error::Unstable {
            max_real: max_real_eigenvalue(&dd.a_matrix),
        });
    }
    let prefactor = g * g * gam1_2 * gamma;
    let denom = 4.0 * (g * g * w * w + 4.0 * gamma * gamma * gam1_2) * d0;
    Ok(ResonanceComponents {
        pi0: prefactor / d0,
        pi12: prefactor * (4.0 * d0 + 4.0 * gamma * gamma * gam1_2 + g * g * w * w) / denom,
        pi11: prefactor * w * w * (5.0 * g * g - 4.0 * gam1_2) / denom,
    })
}
