//! Randomized property suite behind the `verify` subcommand.

use std::io::Write;

use anyhow::Result;
use rayon::prelude::*;
use serde::Serialize;
use twomode::closedform::total_current_closed;
use twomode::ensemble::{stable_ensemble, EnsembleRanges};
use twomode::{
    build_drift_diffusion, check_stability, coefficients, decompose, rel_diff, simulate_covariance,
    solve_steady_state, symplectic_eigenvalues, SystemParams, TrajectoryConfig,
};

use crate::sweep::fmt_f64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub n_samples: usize,
    pub seed: u64,
    pub tol: f64,
    /// Parameter sets run through the stochastic oracle.
    pub trajectory_samples: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            n_samples: 1000,
            seed: 1,
            tol: 1e-10,
            trajectory_samples: 4,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PropertyResult {
    pub name: &'static str,
    pub passed: usize,
    pub total: usize,
    pub max_residual: f64,
    /// Fraction of samples that must pass.
    pub required_fraction: f64,
}

impl PropertyResult {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            passed: 0,
            total: 0,
            max_residual: 0.0,
            required_fraction: 1.0,
        }
    }

    fn record(&mut self, residual: f64, pass: bool) {
        self.total += 1;
        if pass {
            self.passed += 1;
        }
        // NaN residuals count as the worst case.
        if residual.is_nan() {
            self.max_residual = f64::INFINITY;
        } else {
            self.max_residual = self.max_residual.max(residual);
        }
    }

    pub fn ok(&self) -> bool {
        self.passed as f64 >= (self.required_fraction * self.total as f64).ceil()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub n_samples: usize,
    pub seed: u64,
    pub tol: f64,
    pub properties: Vec<PropertyResult>,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.properties.iter().all(PropertyResult::ok)
    }

    pub fn property(&self, name: &str) -> Option<&PropertyResult> {
        self.properties.iter().find(|p| p.name == name)
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "property,passed,total,max_residual,status")?;
        for p in &self.properties {
            let residual = if p.max_residual.is_finite() {
                fmt_f64(p.max_residual)
            } else {
                String::new()
            };
            writeln!(
                out,
                "{},{},{},{},{}",
                p.name,
                p.passed,
                p.total,
                residual,
                if p.ok() { "pass" } else { "fail" }
            )?;
        }
        Ok(())
    }
}

/// Per-sample residuals, in `PROPERTY_NAMES` order. Each entry is
/// (residual, pass at `tol`).
type Sample = Vec<(f64, bool)>;

const PROPERTY_NAMES: [&str; 14] = [
    "pi_s_three_routes_agree",
    "closed_form_sigma14",
    "closed_form_sigma23",
    "closed_form_sigma34",
    "pi12_equals_pi21",
    "a22_identity",
    "d1_positive",
    "a11_positive",
    "a31_positive",
    "pi1_non_negative",
    "total_current_sign",
    "opposite_currents_when_driven",
    "second_law",
    "physicality",
];

/// Relative residual, with pairs that are both below `floor` counted as equal.
fn rel(a: f64, b: f64, floor: f64) -> f64 {
    if a.abs().max(b.abs()) <= floor {
        0.0
    } else {
        rel_diff(a, b)
    }
}

/// Residual of a sign requirement `x > 0` (or `x ≥ 0`): how far below zero.
fn below_zero(x: f64, scale: f64) -> f64 {
    (-x / scale).max(0.0)
}

fn check_sample(p: &SystemParams, tol: f64) -> Result<Sample> {
    let dd = build_drift_diffusion(p)?;
    let sigma = solve_steady_state(&dd)?;
    let cf = coefficients(p)?;
    let b = decompose(p, &cf, &dd, &sigma)?;
    let (n1, n2) = (p.n1(), p.n2());
    let g = p.big_g();
    let split = p.omega_split();
    let mut out = Vec::with_capacity(PROPERTY_NAMES.len());
    let mut push = |residual: f64, pass: bool| out.push((residual, pass));
    let identity = |r: f64| (r, r <= tol);

    let r = b.max_route_disagreement();
    push(r, r <= tol);

    let (s14, s23, s34) = cf.offdiag_covariances(n1, n2);
    let floor = 1e-300;
    for (closed, numeric) in [
        (s14, sigma.get(0, 3)),
        (s23, sigma.get(1, 2)),
        (s34, sigma.get(2, 3)),
    ] {
        let (r, ok) = identity(rel(closed, numeric, floor));
        push(r, ok);
    }

    let (r, ok) = identity(rel(b.pi12(), b.pi21(), floor));
    push(r, ok);

    let lhs = g * cf.a22;
    let rhs = g * cf.a11 - split * cf.a31;
    let scale = lhs
        .abs()
        .max((g * cf.a11).abs())
        .max((split * cf.a31).abs());
    let r = if scale == 0.0 {
        0.0
    } else {
        (lhs - rhs).abs() / scale
    };
    push(r, r <= tol);

    for x in [cf.d1, cf.a11, cf.a31] {
        let r = below_zero(x, 1.0);
        // Strict positivity; values within `tol` of zero are tolerated.
        push(r, x > 0.0 || r <= tol);
    }

    let r = below_zero(b.pi1, b.pi0.abs().max(1.0));
    push(r, r <= tol);

    let total = b.j12 + b.jp12;
    let dn = n1 - n2;
    let closed_total = total_current_closed(p, &cf);
    let mismatch = total != 0.0 && dn != 0.0 && total.signum() != dn.signum();
    let r = if mismatch {
        total.abs() / closed_total.abs().max(1.0)
    } else {
        0.0
    };
    push(r, r <= tol);

    if p.lambda_drive > 0.0 && dn != 0.0 && g > 0.0 {
        let prod = b.j12 * b.jp12;
        let r = (prod / (b.j12.abs().max(b.jp12.abs()).powi(2))).max(0.0);
        push(r, r <= tol);
    } else {
        push(0.0, true);
    }

    let r = below_zero(b.pi_s_trace, 1.0);
    push(r, r <= tol);

    let (_, nu_minus) = symplectic_eigenvalues(&sigma)?;
    let r = (0.5 - nu_minus).max(0.0);
    push(r, r <= tol);

    Ok(out)
}

/// Reduced stochastic-oracle configuration for one parameter set: step at
/// 0.5% of the fastest time scale, horizon of 400 slowest relaxation times.
pub fn reduced_trajectory_config(p: &SystemParams, seed: u64) -> Result<TrajectoryConfig> {
    let report = check_stability(p)?;
    let rho = report
        .eigenvalues
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    let slowest = -report.max_real_eigenvalue;
    Ok(TrajectoryConfig {
        dt: 0.005 / rho.max(1e-12),
        burn_in: 20.0 / slowest,
        sample_time: 400.0 / slowest,
        n_trajectories: 4,
        seed,
        batches_per_trajectory: 8,
    })
}

/// Largest |z| over the upper triangle for the reduced oracle, ignoring
/// entries whose reference and standard error are both exactly zero.
fn trajectory_max_z(p: &SystemParams, seed: u64) -> Result<f64> {
    let dd = build_drift_diffusion(p)?;
    let lyap = solve_steady_state(&dd)?;
    let est = simulate_covariance(&dd, &reduced_trajectory_config(p, seed)?)?;
    let z = est.z_scores(&lyap);
    Ok(z.iter()
        .filter(|v| !v.is_nan())
        .map(|v| v.abs())
        .fold(0.0, f64::max))
}

pub fn run_verify(opts: &VerifyOptions) -> VerifyReport {
    let ranges = EnsembleRanges::default();
    let ensemble = stable_ensemble(opts.n_samples, opts.seed, &ranges);
    let samples: Vec<Result<Sample>> = ensemble
        .par_iter()
        .map(|p| check_sample(p, opts.tol))
        .collect();

    let mut props: Vec<PropertyResult> = PROPERTY_NAMES
        .iter()
        .map(|n| PropertyResult::new(n))
        .collect();
    let mut pipeline = PropertyResult::new("pipeline_completes");
    for (p, s) in ensemble.iter().zip(&samples) {
        match s {
            Ok(values) => {
                pipeline.record(0.0, true);
                for (prop, &(r, ok)) in props.iter_mut().zip(values) {
                    prop.record(r, ok);
                }
            }
            Err(e) => {
                log::warn!("sample {p:?} failed: {e}");
                pipeline.record(f64::INFINITY, false);
            }
        }
    }
    props.insert(0, pipeline);

    // Stochastic oracle on a cheaper sub-ensemble (rates ≥ 0.1), |z| < 4 on
    // every entry in at least 95% of the sets.
    let traj_ranges = EnsembleRanges {
        rate: (0.1, 1.0),
        ..ranges
    };
    let traj_set = stable_ensemble(opts.trajectory_samples, opts.seed, &traj_ranges);
    let mut traj = PropertyResult::new("trajectory_oracle_z_below_4");
    traj.required_fraction = 0.95;
    for (k, p) in traj_set.iter().enumerate() {
        match trajectory_max_z(p, opts.seed.wrapping_add(k as u64)) {
            Ok(z) => traj.record(z, z < 4.0),
            Err(e) => {
                log::warn!("trajectory oracle failed for {p:?}: {e}");
                traj.record(f64::INFINITY, false);
            }
        }
    }
    props.push(traj);

    VerifyReport {
        n_samples: opts.n_samples,
        seed: opts.seed,
        tol: opts.tol,
        properties: props,
    }
}
