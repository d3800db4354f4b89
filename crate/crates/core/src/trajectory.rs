//! Stochastic oracle for the steady-state covariance.
//!
//! The quadrature Langevin equations are integrated as a classical linear SDE
//! `du = A u dt + S dW` with `S Sᵀ = D`, whose stationary covariance solves
//! the same Lyapunov equation as the quantum steady state. Only symmetrized
//! second moments are compared, so classical white noise with matching
//! symmetrized correlations is sufficient.

use nalgebra::{Matrix4, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::lyapunov::CovarianceMatrix;
use crate::model::DriftDiffusion;

/// Name of the random stream recorded in every estimate.
pub const RNG_ALGORITHM: &str =
    "ChaCha8 (rand_chacha), one stream per trajectory; standard normals via rand_distr ziggurat";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryConfig {
    pub dt: f64,
    /// Discarded transient per trajectory.
    pub burn_in: f64,
    /// Averaging horizon per trajectory.
    pub sample_time: f64,
    pub n_trajectories: usize,
    pub seed: u64,
    /// Batch means per trajectory used for the standard error.
    pub batches_per_trajectory: usize,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            dt: 2e-3,
            burn_in: 100.0,
            sample_time: 1e4,
            n_trajectories: 16,
            seed: 1,
            batches_per_trajectory: 8,
        }
    }
}

impl TrajectoryConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter {
                name: "dt",
                value: self.dt,
                reason: "time step must be positive and finite",
            });
        }
        if !(self.burn_in >= 0.0) || !self.burn_in.is_finite() {
            return Err(Error::InvalidParameter {
                name: "burn_in",
                value: self.burn_in,
                reason: "must be non-negative and finite",
            });
        }
        if !(self.sample_time > 0.0) || !self.sample_time.is_finite() {
            return Err(Error::InvalidParameter {
                name: "sample_time",
                value: self.sample_time,
                reason: "must be positive and finite",
            });
        }
        if self.n_trajectories == 0 {
            return Err(Error::InvalidParameter {
                name: "n_trajectories",
                value: 0.0,
                reason: "need at least one trajectory",
            });
        }
        if self.batches_per_trajectory == 0 || self.n_trajectories * self.batches_per_trajectory < 2
        {
            return Err(Error::InvalidParameter {
                name: "batches_per_trajectory",
                value: self.batches_per_trajectory as f64,
                reason: "need at least two batches in total for a standard error",
            });
        }
        if self.sample_steps() < self.batches_per_trajectory {
            return Err(Error::InvalidParameter {
                name: "sample_time",
                value: self.sample_time,
                reason: "fewer sampling steps than batches",
            });
        }
        Ok(())
    }

    fn burn_steps(&self) -> usize {
        (self.burn_in / self.dt).round() as usize
    }

    fn sample_steps(&self) -> usize {
        (self.sample_time / self.dt).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryEstimate {
    /// Ensemble- and time-averaged covariance.
    pub sigma: CovarianceMatrix,
    /// Standard error of each entry from batch means.
    #[serde(serialize_with = "serialize_matrix")]
    pub stderr: Matrix4<f64>,
    pub rng_algorithm: &'static str,
    pub n_batches: usize,
    pub steps_per_trajectory: usize,
    /// Set when dt · ρ(A) ≥ 0.1.
    pub step_warning: Option<String>,
}

fn serialize_matrix<S: serde::Serializer>(
    m: &Matrix4<f64>,
    serializer: S,
) -> std::result::Result<S::Ok, S::Error> {
    CovarianceMatrix::new(*m).serialize(serializer)
}

impl TrajectoryEstimate {
    /// Standardized residuals (σ_emp − σ_ref)/stderr, entrywise.
    pub fn z_scores(&self, reference: &CovarianceMatrix) -> Matrix4<f64> {
        (self.sigma.matrix() - reference.matrix()).component_div(&self.stderr)
    }
}

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

const UPPER: [(usize, usize); 10] = [
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

fn run_trajectory(
    dd: &DriftDiffusion,
    cfg: &TrajectoryConfig,
    index: usize,
) -> Result<Vec<[f64; 10]>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);

    let a = dd.a_matrix;
    let noise = dd.diffusion_diag().map(|d| (d * cfg.dt).sqrt());
    let mut u = Vector4::zeros();
    let mut time = 0.0;

    let mut advance = |u: &mut Vector4<f64>, rng: &mut ChaCha8Rng| -> Result<()> {
        let z = Vector4::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
        *u += a * *u * cfg.dt + noise.component_mul(&z);
        time += cfg.dt;
        if !u.iter().all(|v| v.is_finite()) {
            return Err(Error::Divergence { time });
        }
        Ok(())
    };

    for _ in 0..cfg.burn_steps() {
        advance(&mut u, &mut rng)?;
    }

    let total = cfg.sample_steps();
    let nb = cfg.batches_per_trajectory;
    let mut batches = Vec::with_capacity(nb);
    for b in 0..nb {
        // split `total` steps as evenly as possible
        let len = (b + 1) * total / nb - b * total / nb;
        let mut acc = [CompensatedSum::default(); 10];
        for _ in 0..len {
            advance(&mut u, &mut rng)?;
            for (slot, &(i, j)) in acc.iter_mut().zip(UPPER.iter()) {
                slot.add(u[i] * u[j]);
            }
        }
        let mut mean = [0.0; 10];
        for (m, s) in mean.iter_mut().zip(acc.iter()) {
            *m = s.value() / len as f64;
        }
        batches.push(mean);
    }
    Ok(batches)
}

/// Empirical stationary covariance from an ensemble of Euler–Maruyama
/// trajectories. Deterministic for a fixed `cfg.seed`.
pub fn simulate_covariance(
    dd: &DriftDiffusion,
    cfg: &TrajectoryConfig,
) -> Result<TrajectoryEstimate> {
    cfg.validate()?;
    let eigen = linalg::eigenvalues4(&dd.a_matrix);
    let max_real = eigen.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    if !(max_real < 0.0) {
        return Err(Error::Unstable { max_real });
    }
    let spectral_radius = eigen.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let step_warning = (cfg.dt * spectral_radius >= 0.1).then(|| {
        let msg = format!(
            "dt·ρ(A) = {:.3} exceeds the recommended 0.1",
            cfg.dt * spectral_radius
        );
        log::warn!("{msg}");
        msg
    });

    let per_trajectory = (0..cfg.n_trajectories)
        .into_par_iter()
        .map(|k| run_trajectory(dd, cfg, k))
        .collect::<Result<Vec<_>>>()?;
    let batches: Vec<[f64; 10]> = per_trajectory.into_iter().flatten().collect();
    let nb = batches.len() as f64;

    let mut mean = Matrix4::zeros();
    let mut stderr = Matrix4::zeros();
    for (k, &(i, j)) in UPPER.iter().enumerate() {
        let mut s = CompensatedSum::default();
        for b in &batches {
            s.add(b[k]);
        }
        let m = s.value() / nb;
        let mut v = CompensatedSum::default();
        for b in &batches {
            v.add((b[k] - m).powi(2));
        }
        let se = (v.value() / (nb - 1.0) / nb).sqrt();
        mean[(i, j)] = m;
        mean[(j, i)] = m;
        stderr[(i, j)] = se;
        stderr[(j, i)] = se;
    }

    Ok(TrajectoryEstimate {
        sigma: CovarianceMatrix::new(mean),
        stderr,
        rng_algorithm: RNG_ALGORITHM,
        n_batches: batches.len(),
        steps_per_trajectory: cfg.burn_steps() + cfg.sample_steps(),
        step_warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lyapunov::solve_steady_state;
    use crate::model::{build_drift_diffusion, SystemParams};

    fn vacuum_params() -> SystemParams {
        SystemParams {
            delta: 1.0,
            omega0: 1.0,
            lambda_drive: 0.0,
            g_coupling: 0.0,
            kappa: 0.5,
            gamma: 0.5,
            nbar1: 0.0,
            nbar2: 0.0,
        }
    }

    fn small_cfg(seed: u64) -> TrajectoryConfig {
        TrajectoryConfig {
            dt: 1e-3,
            burn_in: 20.0,
            sample_time: 400.0,
            n_trajectories: 4,
            seed,
            batches_per_trajectory: 8,
        }
    }

    #[test]
    fn vacuum_fixed_point() {
        let dd = build_drift_diffusion(&vacuum_params()).unwrap();
        let est = simulate_covariance(&dd, &small_cfg(3)).unwrap();
        let z = est.z_scores(&CovarianceMatrix::vacuum());
        assert!(z.amax() < 4.0, "{z}");
        assert_eq!(est.n_batches, 32);
        assert!(est.step_warning.is_none());
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let dd = build_drift_diffusion(&vacuum_params()).unwrap();
        let cfg = TrajectoryConfig {
            sample_time: 50.0,
            ..small_cfg(11)
        };
        let a = simulate_covariance(&dd, &cfg).unwrap();
        let b = simulate_covariance(&dd, &cfg).unwrap();
        assert_eq!(a, b);
        let c = simulate_covariance(&dd, &TrajectoryConfig { seed: 12, ..cfg }).unwrap();
        assert_ne!(a.sigma, c.sigma);
    }

    #[test]
    fn unstable_drift_is_rejected() {
        let p = SystemParams {
            g_coupling: 2.0,
            lambda_drive: 0.1,
            ..vacuum_params()
        };
        let dd = build_drift_diffusion(&p).unwrap();
        assert!(matches!(
            simulate_covariance(&dd, &small_cfg(1)),
            Err(Error::Unstable { .. })
        ));
    }

    #[test]
    fn coarse_step_warns() {
        let dd = build_drift_diffusion(&vacuum_params()).unwrap();
        let cfg = TrajectoryConfig {
            dt: 0.2,
            sample_time: 20.0,
            ..small_cfg(1)
        };
        assert!(simulate_covariance(&dd, &cfg)
            .unwrap()
            .step_warning
            .is_some());
    }

    #[test]
    fn invalid_configs() {
        let dd = build_drift_diffusion(&vacuum_params()).unwrap();
        for cfg in [
            TrajectoryConfig {
                dt: 0.0,
                ..small_cfg(1)
            },
            TrajectoryConfig {
                n_trajectories: 0,
                ..small_cfg(1)
            },
            TrajectoryConfig {
                sample_time: -1.0,
                ..small_cfg(1)
            },
            TrajectoryConfig {
                n_trajectories: 1,
                batches_per_trajectory: 1,
                ..small_cfg(1)
            },
        ] {
            assert!(simulate_covariance(&dd, &cfg).is_err());
        }
    }

    #[test]
    fn coupled_driven_point_within_statistical_error() {
        let p = SystemParams {
            delta: 0.9,
            omega0: 1.0,
            lambda_drive: 0.1,
            g_coupling: 0.1,
            kappa: 0.4,
            gamma: 0.3,
            nbar1: 0.5,
            nbar2: 0.0,
        };
        let dd = build_drift_diffusion(&p).unwrap();
        let exact = solve_steady_state(&dd).unwrap();
        let est = simulate_covariance(&dd, &small_cfg(5)).unwrap();
        let z = est.z_scores(&exact);
        assert!(z.amax() < 4.5, "{z}");
    }
}
