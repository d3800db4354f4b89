//! Two-dimensional parameter sweeps written as CSV.

use std::fmt::Write as _;
use std::io::Write;
use std::str::FromStr;

use anyhow::{anyhow, bail, Result};
use rayon::prelude::*;
use twomode::{
    build_drift_diffusion, check_stability, coefficients, decompose, entropy_production_trace,
    solve_steady_state, symplectic_eigenvalues, EntropyBudget, SystemParams,
};

use crate::settings::{delta_from_ratio, lambda_from_ratio, Settings};

/// Parameters a sweep axis can drive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisParam {
    /// Δ/√(Ωω); resolved after every other assignment at the point.
    DeltaRatio,
    /// Λ/ω with ω = ω₀ − 2Λ.
    LambdaRatio,
    Delta,
    Lambda,
    /// g; `big_g` sets G = 2g.
    G,
    BigG,
    Kappa,
    Gamma,
    Nbar1,
    Nbar2,
    Omega0,
}

impl AxisParam {
    pub const ALL: [(&'static str, AxisParam); 11] = [
        ("delta_ratio", AxisParam::DeltaRatio),
        ("lambda_ratio", AxisParam::LambdaRatio),
        ("delta", AxisParam::Delta),
        ("lambda", AxisParam::Lambda),
        ("g", AxisParam::G),
        ("big_g", AxisParam::BigG),
        ("kappa", AxisParam::Kappa),
        ("gamma", AxisParam::Gamma),
        ("nbar1", AxisParam::Nbar1),
        ("nbar2", AxisParam::Nbar2),
        ("omega0", AxisParam::Omega0),
    ];

    pub fn name(self) -> &'static str {
        Self::ALL
            .iter()
            .find(|(_, p)| *p == self)
            .map(|(n, _)| *n)
            .unwrap()
    }

    /// Order in which assignments are applied: derived axes go last.
    fn rank(self) -> u8 {
        match self {
            AxisParam::DeltaRatio => 2,
            AxisParam::LambdaRatio => 1,
            _ => 0,
        }
    }
}

impl FromStr for AxisParam {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .find(|(n, _)| *n == s)
            .map(|(_, p)| *p)
            .ok_or_else(|| anyhow!("unknown axis parameter `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub param: AxisParam,
    pub start: f64,
    pub end: f64,
    pub points: usize,
}

impl Axis {
    pub fn value(&self, i: usize) -> f64 {
        if self.points <= 1 {
            return self.start;
        }
        let t = i as f64 / (self.points - 1) as f64;
        self.start + t * (self.end - self.start)
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.value(i)).collect()
    }

    pub fn step(&self) -> f64 {
        if self.points <= 1 {
            0.0
        } else {
            (self.end - self.start) / (self.points - 1) as f64
        }
    }
}

/// Columns a sweep can emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    PiS,
    Pi0,
    Pi1,
    Pi11,
    Pi12,
    Pi21,
    Pi22,
    J12,
    Jp12,
    J1,
    J2,
    J3,
    N1s,
    N2s,
    Eta,
    Stable,
    NuMinus,
}

impl Quantity {
    pub const ALL: [(&'static str, Quantity); 17] = [
        ("pi_s", Quantity::PiS),
        ("pi0", Quantity::Pi0),
        ("pi1", Quantity::Pi1),
        ("pi_11", Quantity::Pi11),
        ("pi_12", Quantity::Pi12),
        ("pi_21", Quantity::Pi21),
        ("pi_22", Quantity::Pi22),
        ("J12", Quantity::J12),
        ("Jp12", Quantity::Jp12),
        ("j1", Quantity::J1),
        ("j2", Quantity::J2),
        ("j3", Quantity::J3),
        ("N1s", Quantity::N1s),
        ("N2s", Quantity::N2s),
        ("eta", Quantity::Eta),
        ("stable", Quantity::Stable),
        ("nu_minus", Quantity::NuMinus),
    ];

    pub fn name(self) -> &'static str {
        Self::ALL
            .iter()
            .find(|(_, q)| *q == self)
            .map(|(n, _)| *n)
            .unwrap()
    }

    pub fn all() -> Vec<Quantity> {
        Self::ALL.iter().map(|(_, q)| *q).collect()
    }

    /// Parses a comma-separated list; an empty string gives no quantities.
    pub fn parse_list(s: &str) -> Result<Vec<Quantity>> {
        s.split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| t.parse())
            .collect()
    }
}

impl FromStr for Quantity {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .find(|(n, _)| *n == s)
            .map(|(_, q)| *q)
            .ok_or_else(|| anyhow!("unknown quantity `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub x_axis: Axis,
    pub y_axis: Axis,
    pub fixed: SystemParams,
    pub quantities: Vec<Quantity>,
}

impl SweepSpec {
    /// Default grid: Δ/√(Ωω) ∈ [0.5, 1.5] by Λ/ω ∈ [0, 0.4], 101 × 101.
    pub fn default_axes() -> (Axis, Axis) {
        (
            Axis {
                param: AxisParam::DeltaRatio,
                start: 0.5,
                end: 1.5,
                points: 101,
            },
            Axis {
                param: AxisParam::LambdaRatio,
                start: 0.0,
                end: 0.4,
                points: 101,
            },
        )
    }

    /// Reads `x_axis`, `x_min`, `x_max`, `x_points` (and the `y_` analogues)
    /// and `quantities` on top of the resolved parameters.
    pub fn from_settings(settings: &Settings) -> Result<Self> {
        let (dx, dy) = Self::default_axes();
        let axis = |prefix: &str, d: Axis| -> Result<Axis> {
            let param = match settings.get(&format!("{prefix}_axis")) {
                Some(name) => name.parse()?,
                None => d.param,
            };
            Ok(Axis {
                param,
                start: settings.f64(&format!("{prefix}_min"))?.unwrap_or(d.start),
                end: settings.f64(&format!("{prefix}_max"))?.unwrap_or(d.end),
                points: settings
                    .usize(&format!("{prefix}_points"))?
                    .unwrap_or(d.points),
            })
        };
        let x_axis = axis("x", dx)?;
        let y_axis = axis("y", dy)?;
        if x_axis.param == y_axis.param {
            bail!("x and y axes both drive `{}`", x_axis.param.name());
        }
        let quantities = match settings.get("quantities") {
            Some(list) => Quantity::parse_list(list)?,
            None => Quantity::all(),
        };
        let fixed = settings.params()?;
        Ok(Self {
            x_axis,
            y_axis,
            fixed,
            quantities,
        })
    }

    /// Parameters at grid point (`x`, `y`).
    pub fn params_at(&self, x: f64, y: f64) -> Result<SystemParams> {
        let mut assignments = [(self.x_axis.param, x), (self.y_axis.param, y)];
        assignments.sort_by_key(|(p, _)| p.rank());
        let mut p = self.fixed;
        for (param, v) in assignments {
            match param {
                AxisParam::DeltaRatio => p.delta = delta_from_ratio(v, &p)?,
                AxisParam::LambdaRatio => p.lambda_drive = lambda_from_ratio(v, p.omega0)?,
                AxisParam::Delta => p.delta = v,
                AxisParam::Lambda => p.lambda_drive = v,
                AxisParam::G => p.g_coupling = v,
                AxisParam::BigG => p.g_coupling = v / 2.0,
                AxisParam::Kappa => p.kappa = v,
                AxisParam::Gamma => p.gamma = v,
                AxisParam::Nbar1 => p.nbar1 = v,
                AxisParam::Nbar2 => p.nbar2 = v,
                AxisParam::Omega0 => p.omega0 = v,
            }
        }
        p.validate()?;
        Ok(p)
    }

    pub fn header(&self) -> String {
        let mut h = format!("{},{}", self.y_axis.param.name(), self.x_axis.param.name());
        for q in &self.quantities {
            h.push(',');
            h.push_str(q.name());
        }
        h
    }

    /// Evaluates the grid in y-major order. Rows run in parallel; the result
    /// order is fixed by the grid.
    pub fn evaluate(&self) -> Vec<PointResult> {
        let ys = self.y_axis.values();
        let xs = self.x_axis.values();
        ys.par_iter()
            .flat_map_iter(|&y| {
                xs.iter()
                    .map(|&x| evaluate_point(x, y, self.params_at(x, y)))
                    .collect::<Vec<_>>()
            })
            .collect()
    }

    /// Writes the CSV; with no quantities only the header is written.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "{}", self.header())?;
        if self.quantities.is_empty() {
            return Ok(());
        }
        let mut line = String::new();
        for r in self.evaluate() {
            line.clear();
            line.push_str(&fmt_f64(r.y));
            line.push(',');
            line.push_str(&fmt_f64(r.x));
            for q in &self.quantities {
                line.push(',');
                write!(line, "{}", r.cell(*q))?;
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

impl SweepSpec {
    /// JSON array of row objects; empty cells become `null`.
    pub fn write_json<W: Write>(&self, out: &mut W) -> Result<()> {
        use serde_json::{Map, Value};
        let rows: Vec<Value> = if self.quantities.is_empty() {
            Vec::new()
        } else {
            self.evaluate()
                .iter()
                .map(|r| {
                    let mut m = Map::new();
                    m.insert(self.y_axis.param.name().into(), r.y.into());
                    m.insert(self.x_axis.param.name().into(), r.x.into());
                    for q in &self.quantities {
                        let v = match r.cell(*q) {
                            Cell::Num(v) => v.into(),
                            Cell::Flag(b) => b.into(),
                            Cell::Empty => Value::Null,
                        };
                        m.insert(q.name().into(), v);
                    }
                    Value::Object(m)
                })
                .collect()
        };
        serde_json::to_writer_pretty(&mut *out, &rows)?;
        writeln!(out)?;
        Ok(())
    }
}

/// Everything computed at one grid point. Missing values are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub x: f64,
    pub y: f64,
    pub params: Option<SystemParams>,
    pub eta: Option<f64>,
    pub stable: bool,
    pub pi_s: Option<f64>,
    pub nu: Option<(f64, f64)>,
    pub budget: Option<EntropyBudget>,
}

pub fn evaluate_point(x: f64, y: f64, params: Result<SystemParams>) -> PointResult {
    let mut r = PointResult {
        x,
        y,
        params: None,
        eta: None,
        stable: false,
        pi_s: None,
        nu: None,
        budget: None,
    };
    let Ok(p) = params else { return r };
    r.params = Some(p);
    let Ok(report) = check_stability(&p) else {
        return r;
    };
    r.eta = Some(report.routh_hurwitz_eta).filter(|v| v.is_finite());
    r.stable = report.stable;
    if !report.stable {
        return r;
    }
    let Ok(dd) = build_drift_diffusion(&p) else {
        return r;
    };
    let Ok(sigma) = solve_steady_state(&dd) else {
        r.stable = false;
        return r;
    };
    r.pi_s = Some(entropy_production_trace(&dd, &sigma).0);
    r.nu = symplectic_eigenvalues(&sigma).ok();
    // The decomposition needs the closed-form coefficients, which require
    // ω > 0 and Δ > 0; outside that domain those cells stay empty.
    r.budget = coefficients(&p)
        .ok()
        .and_then(|cf| decompose(&p, &cf, &dd, &sigma).ok());
    r
}

/// A CSV cell: a number, a flag, or empty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Num(f64),
    Flag(bool),
    Empty,
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::Num(v) => f.write_str(&fmt_f64(*v)),
            Cell::Flag(b) => write!(f, "{b}"),
            Cell::Empty => Ok(()),
        }
    }
}

impl PointResult {
    pub fn value(&self, q: Quantity) -> Option<f64> {
        match self.cell(q) {
            Cell::Num(v) => Some(v),
            _ => None,
        }
    }

    pub fn cell(&self, q: Quantity) -> Cell {
        let num = |v: Option<f64>| match v {
            Some(v) if v.is_finite() => Cell::Num(v),
            _ => Cell::Empty,
        };
        let b = self.budget.as_ref();
        match q {
            Quantity::Stable => Cell::Flag(self.stable),
            Quantity::Eta => num(self.eta),
            _ if !self.stable => Cell::Empty,
            Quantity::PiS => num(self.pi_s),
            Quantity::NuMinus => num(self.nu.map(|n| n.1)),
            Quantity::Pi0 => num(b.map(|b| b.pi0)),
            Quantity::Pi1 => num(b.map(|b| b.pi1)),
            Quantity::Pi11 => num(b.map(|b| b.pi11())),
            Quantity::Pi12 => num(b.map(|b| b.pi12())),
            Quantity::Pi21 => num(b.map(|b| b.pi21())),
            Quantity::Pi22 => num(b.map(|b| b.pi22())),
            Quantity::J12 => num(b.map(|b| b.j12)),
            Quantity::Jp12 => num(b.map(|b| b.jp12)),
            Quantity::J1 => num(b.map(|b| b.j1)),
            Quantity::J2 => num(b.map(|b| b.j2)),
            Quantity::J3 => num(b.map(|b| b.j3)),
            Quantity::N1s => num(b.map(|b| b.occupations.0)),
            Quantity::N2s => num(b.map(|b| b.occupations.1)),
        }
    }
}

/// 17 significant digits, enough to round-trip an f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
