//! Single-point reports: steady state, transient evolution, stochastic oracle.

use std::io::Write;

use anyhow::{bail, Result};
use serde::Serialize;
use twomode::closedform::total_current_closed;
use twomode::entropy::SECOND_LAW_TOL;
use twomode::lyapunov::{CovariancePropagator, PHYSICALITY_TOL};
use twomode::{
    build_drift_diffusion, check_stability, coefficients, decompose, entropy_production_trace,
    rel_diff, simulate_covariance, solve_steady_state, symplectic_eigenvalues, wigner_entropy,
    CovarianceMatrix, EntropyBudget, StabilityReport, SystemParams, TrajectoryConfig,
};

use crate::sweep::fmt_f64;

/// Relative tolerance of the agreement flags in the steady report.
pub const AGREEMENT_TOL: f64 = 1e-10;

/// Upper-triangle entries in output order, 0-based.
pub const UPPER: [(usize, usize); 10] = [
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

fn entry_name(i: usize, j: usize) -> String {
    format!("s{}{}", i + 1, j + 1)
}

#[derive(Debug, Clone, Serialize)]
pub struct SymplecticPair {
    pub nu_plus: f64,
    pub nu_minus: f64,
}

/// Cross-formula agreement flags; `None` where a route is unavailable.
#[derive(Debug, Clone, Serialize)]
pub struct Checks {
    pub tolerance: f64,
    pub lyapunov_residual: f64,
    pub pi_s_routes_agree: Option<bool>,
    pub max_route_disagreement: Option<f64>,
    pub pi12_equals_pi21: Option<bool>,
    pub closed_form_covariances_match: Option<bool>,
    pub total_current_matches: Option<bool>,
    pub eta_agrees_with_spectrum: Option<bool>,
    pub second_law: bool,
    pub physical: bool,
}

impl Checks {
    /// True when every available flag holds.
    pub fn all_pass(&self) -> bool {
        [
            self.pi_s_routes_agree,
            self.pi12_equals_pi21,
            self.closed_form_covariances_match,
            self.total_current_matches,
            self.eta_agrees_with_spectrum,
        ]
        .into_iter()
        .all(|f| f != Some(false))
            && self.second_law
            && self.physical
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SteadyReport {
    pub params: SystemParams,
    pub stability: StabilityReport,
    pub sigma: CovarianceMatrix,
    pub symplectic_eigenvalues: SymplecticPair,
    pub wigner_entropy: f64,
    /// Π_s from the trace form; present even when the closed forms are not.
    pub pi_s: f64,
    pub budget: Option<EntropyBudget>,
    /// Why `budget` is missing, if it is.
    pub budget_note: Option<String>,
    pub checks: Checks,
}

pub fn steady_report(params: &SystemParams) -> Result<SteadyReport> {
    let stability = check_stability(params)?;
    if !stability.stable {
        bail!(
            "drift matrix is unstable (max Re λ = {:.6e}, η = {:.6e}); no steady state exists",
            stability.max_real_eigenvalue,
            stability.routh_hurwitz_eta
        );
    }
    let dd = build_drift_diffusion(params)?;
    let sigma = solve_steady_state(&dd)?;
    let (nu_plus, nu_minus) = symplectic_eigenvalues(&sigma)?;
    let (pi_s, _) = entropy_production_trace(&dd, &sigma);

    let (budget, budget_note, cf) = match coefficients(params) {
        Ok(cf) => match decompose(params, &cf, &dd, &sigma) {
            Ok(b) => (Some(b), None, Some(cf)),
            Err(e) => (None, Some(e.to_string()), None),
        },
        Err(e) => (None, Some(e.to_string()), None),
    };

    // The trace form cancels terms of size ~(κ + γ)·N, so differences at
    // round-off level of that scale count as agreement.
    let floor = 64.0 * f64::EPSILON * (params.kappa + params.gamma) * params.n1().max(params.n2());
    let agree = |a: f64, b: f64| rel_diff(a, b) <= AGREEMENT_TOL || (a - b).abs() <= floor;
    let closed_match = cf.as_ref().map(|cf| {
        let (s14, s23, s34) = cf.offdiag_covariances(params.n1(), params.n2());
        let scale = sigma.matrix().amax();
        [
            (s14, sigma.get(0, 3)),
            (s23, sigma.get(1, 2)),
            (s34, sigma.get(2, 3)),
        ]
        .iter()
        .all(|&(c, n)| agree(c, n) || (c - n).abs() <= 16.0 * f64::EPSILON * scale)
    });
    let current_match = match (&budget, &cf) {
        (Some(b), Some(cf)) => {
            let closed = total_current_closed(params, cf);
            Some(agree(b.j12 + b.jp12, closed))
        }
        _ => None,
    };
    let checks = Checks {
        tolerance: AGREEMENT_TOL,
        lyapunov_residual: sigma.lyapunov_residual(&dd),
        pi_s_routes_agree: budget.map(|b| {
            let (x, y, z) = (b.pi_s_trace, b.pi_s_offdiag, b.pi_s_split());
            agree(x, y) && agree(x, z) && agree(y, z)
        }),
        max_route_disagreement: budget.map(|b| b.max_route_disagreement()),
        pi12_equals_pi21: budget.map(|b| agree(b.pi12(), b.pi21())),
        closed_form_covariances_match: closed_match,
        total_current_matches: current_match,
        eta_agrees_with_spectrum: stability.eta_agrees(params),
        second_law: pi_s >= -SECOND_LAW_TOL,
        physical: nu_minus >= 0.5 - PHYSICALITY_TOL,
    };
    Ok(SteadyReport {
        params: *params,
        stability,
        wigner_entropy: wigner_entropy(&sigma)?,
        sigma,
        symplectic_eigenvalues: SymplecticPair { nu_plus, nu_minus },
        pi_s,
        budget,
        budget_note,
        checks,
    })
}

impl SteadyReport {
    /// Flattened `key,value` CSV.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        let value = serde_json::to_value(self)?;
        let mut rows = Vec::new();
        flatten("", &value, &mut rows);
        writeln!(out, "key,value")?;
        for (k, v) in rows {
            writeln!(out, "{k},{v}")?;
        }
        Ok(())
    }
}

fn flatten(prefix: &str, v: &serde_json::Value, rows: &mut Vec<(String, String)>) {
    use serde_json::Value;
    let join = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match v {
        Value::Object(map) => {
            for (k, v) in map {
                flatten(&join(k), v, rows);
            }
        }
        Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                flatten(&join(&i.to_string()), v, rows);
            }
        }
        Value::Null => rows.push((prefix.to_string(), String::new())),
        Value::Number(n) => rows.push((
            prefix.to_string(),
            n.as_f64().map(fmt_f64).unwrap_or_else(|| n.to_string()),
        )),
        Value::Bool(b) => rows.push((prefix.to_string(), b.to_string())),
        Value::String(s) => rows.push((
            prefix.to_string(),
            format!("\"{}\"", s.replace('"', "\"\"")),
        )),
    }
}

/// Initial covariance for `evolve`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum InitialState {
    Vacuum,
    /// Product of the two bath thermal states.
    Thermal,
    /// The Lyapunov steady state (stable parameters only).
    Steady,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    pub t_final: f64,
    pub dt: f64,
    pub record_every: usize,
    pub initial: InitialState,
}

impl EvolveOptions {
    /// Horizon 50 / min(κ, γ), step 0.01, a row every 100 steps, from vacuum.
    pub fn defaults_for(params: &SystemParams) -> Self {
        Self {
            t_final: 50.0 / params.kappa.min(params.gamma),
            dt: 0.01,
            record_every: 100,
            initial: InitialState::Vacuum,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvolveRow {
    pub t: f64,
    pub sigma: CovarianceMatrix,
    /// max |σ(t) − σ_s|; absent without a steady state.
    pub residual: Option<f64>,
    /// Trace-form production evaluated on σ(t). Only meaningful at steady
    /// state; reported as a transient diagnostic.
    pub pi_s_diagnostic: f64,
}

pub const EVOLVE_DIAGNOSTIC_COLUMN: &str = "pi_s_transient_diagnostic";

pub fn evolve_header() -> String {
    let mut h = String::from("t");
    for (i, j) in UPPER {
        h.push(',');
        h.push_str(&entry_name(i, j));
    }
    h.push_str(",residual_max,");
    h.push_str(EVOLVE_DIAGNOSTIC_COLUMN);
    h
}

pub fn evolve_csv_line(row: &EvolveRow) -> String {
    let mut line = fmt_f64(row.t);
    for (i, j) in UPPER {
        line.push(',');
        line.push_str(&fmt_f64(row.sigma.get(i, j)));
    }
    line.push(',');
    if let Some(r) = row.residual {
        line.push_str(&fmt_f64(r));
    }
    line.push(',');
    line.push_str(&fmt_f64(row.pi_s_diagnostic));
    line
}

/// Integrates the covariance ODE, handing each recorded row to `sink` as it
/// is produced. Divergence stops the run with an error after the last finite
/// row; no non-finite value ever reaches `sink`.
pub fn run_evolve(
    params: &SystemParams,
    opts: &EvolveOptions,
    mut sink: impl FnMut(&EvolveRow) -> Result<()>,
) -> Result<()> {
    if !(opts.dt > 0.0 && opts.dt.is_finite()) {
        bail!("dt must be positive and finite, got {}", opts.dt);
    }
    if !(opts.t_final >= 0.0 && opts.t_final.is_finite()) {
        bail!(
            "t_final must be non-negative and finite, got {}",
            opts.t_final
        );
    }
    let dd = build_drift_diffusion(params)?;
    let stability = check_stability(params)?;
    let steady = if stability.stable {
        Some(solve_steady_state(&dd)?)
    } else {
        log::warn!(
            "drift matrix is unstable (max Re λ = {:.3e}); covariance will grow without bound",
            stability.max_real_eigenvalue
        );
        None
    };
    let sigma0 = match opts.initial {
        InitialState::Vacuum => CovarianceMatrix::vacuum(),
        InitialState::Thermal => CovarianceMatrix::thermal(params.n1(), params.n2()),
        InitialState::Steady => match &steady {
            Some(s) => *s,
            None => bail!("no steady state to start from: drift matrix is unstable"),
        },
    };
    let n = (opts.t_final / opts.dt - 1e-9).ceil().max(0.0) as usize;
    let h = if n == 0 { 0.0 } else { opts.t_final / n as f64 };
    let every = opts.record_every.max(1);
    let make_row = |t: f64, s: CovarianceMatrix| EvolveRow {
        t,
        residual: steady.as_ref().map(|st| s.max_abs_diff(st)),
        pi_s_diagnostic: entropy_production_trace(&dd, &s).0,
        sigma: s,
    };
    let mut prop = CovariancePropagator::new(&dd, &sigma0);
    sink(&make_row(0.0, sigma0))?;
    for k in 1..=n {
        if let Err(e) = prop.step(h) {
            bail!(
                "{e}; evolution stopped (max Re λ = {:.6e})",
                stability.max_real_eigenvalue
            );
        }
        if k % every == 0 || k == n {
            sink(&make_row(k as f64 * h, prop.state()))?;
        }
    }
    if !stability.stable {
        bail!(
            "drift matrix is unstable (max Re λ = {:.6e}): covariance diverges; \
             reached t = {} without overflow",
            stability.max_real_eigenvalue,
            prop.time()
        );
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryEntry {
    pub entry: String,
    pub empirical: f64,
    pub stderr: f64,
    pub lyapunov: f64,
    pub z: f64,
    pub relative_error: f64,
    pub within_3_stderr: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryReport {
    pub params: SystemParams,
    pub config: TrajectoryConfig,
    pub rng_algorithm: &'static str,
    pub n_batches: usize,
    pub steps_per_trajectory: usize,
    pub step_warning: Option<String>,
    pub sigma_empirical: CovarianceMatrix,
    pub sigma_lyapunov: CovarianceMatrix,
    pub entries: Vec<TrajectoryEntry>,
    pub max_abs_z: f64,
}

pub fn trajectory_report(
    params: &SystemParams,
    cfg: &TrajectoryConfig,
) -> Result<TrajectoryReport> {
    let dd = build_drift_diffusion(params)?;
    let lyap = solve_steady_state(&dd)?;
    let est = simulate_covariance(&dd, cfg)?;
    let z = est.z_scores(&lyap);
    let entries: Vec<TrajectoryEntry> = UPPER
        .iter()
        .map(|&(i, j)| {
            let (emp, reference) = (est.sigma.get(i, j), lyap.get(i, j));
            TrajectoryEntry {
                entry: entry_name(i, j),
                empirical: emp,
                stderr: est.stderr[(i, j)],
                lyapunov: reference,
                z: z[(i, j)],
                relative_error: if reference == 0.0 {
                    0.0
                } else {
                    (emp - reference).abs() / reference.abs()
                },
                within_3_stderr: z[(i, j)].abs() <= 3.0,
            }
        })
        .collect();
    let max_abs_z = entries.iter().map(|e| e.z.abs()).fold(0.0, f64::max);
    Ok(TrajectoryReport {
        params: *params,
        config: *cfg,
        rng_algorithm: est.rng_algorithm,
        n_batches: est.n_batches,
        steps_per_trajectory: est.steps_per_trajectory,
        step_warning: est.step_warning,
        sigma_empirical: est.sigma,
        sigma_lyapunov: lyap,
        entries,
        max_abs_z,
    })
}

impl TrajectoryReport {
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(
            out,
            "entry,empirical,stderr,lyapunov,z,relative_error,within_3_stderr"
        )?;
        for e in &self.entries {
            // Exactly-zero reference entries with zero stderr give z = 0/0.
            let z = if e.z.is_finite() {
                fmt_f64(e.z)
            } else {
                String::new()
            };
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                e.entry,
                fmt_f64(e.empirical),
                fmt_f64(e.stderr),
                fmt_f64(e.lyapunov),
                z,
                fmt_f64(e.relative_error),
                e.within_3_stderr
            )?;
        }
        Ok(())
    }
}
