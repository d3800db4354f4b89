//! Randomized stable parameter sets for property checks.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::{check_stability, derive_constants, SystemParams};

/// Sampling box. κ and γ are drawn log-uniformly, everything else uniformly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleRanges {
    pub rate: (f64, f64),
    pub g_coupling: (f64, f64),
    pub lambda_drive: (f64, f64),
    pub nbar: (f64, f64),
    pub delta: (f64, f64),
    pub omega0: f64,
}

impl Default for EnsembleRanges {
    fn default() -> Self {
        Self {
            rate: (0.01, 1.0),
            g_coupling: (0.0, 0.5),
            lambda_drive: (0.0, 0.4),
            nbar: (0.0, 10.0),
            delta: (0.1, 2.0),
            omega0: 1.0,
        }
    }
}

fn log_uniform(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    (rng.gen_range(lo.ln()..=hi.ln())).exp()
}

/// Draws one candidate without checking stability.
pub fn draw(rng: &mut impl Rng, ranges: &EnsembleRanges) -> SystemParams {
    SystemParams {
        delta: rng.gen_range(ranges.delta.0..=ranges.delta.1),
        omega0: ranges.omega0,
        lambda_drive: rng.gen_range(ranges.lambda_drive.0..=ranges.lambda_drive.1),
        g_coupling: rng.gen_range(ranges.g_coupling.0..=ranges.g_coupling.1),
        kappa: log_uniform(rng, ranges.rate),
        gamma: log_uniform(rng, ranges.rate),
        nbar1: rng.gen_range(ranges.nbar.0..=ranges.nbar.1),
        nbar2: rng.gen_range(ranges.nbar.0..=ranges.nbar.1),
    }
}

/// `n` parameter sets with ω > 0, η > 0 and a stable drift matrix, by
/// rejection sampling. Deterministic in `seed`.
pub fn stable_ensemble(n: usize, seed: u64, ranges: &EnsembleRanges) -> Vec<SystemParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let p = draw(&mut rng, ranges);
        let Ok(c) = derive_constants(&p) else {
            continue;
        };
        if !(c.omega_minus > 0.0 && c.eta > 0.0) {
            continue;
        }
        if check_stability(&p).is_ok_and(|r| r.stable) {
            out.push(p);
        }
    }
    out
}
