//! Layered key-value settings: preset < config file < command-line flags.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use twomode::SystemParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Layer {
    Default,
    Preset,
    File,
    Flag,
}

/// Named parameter presets reconstructing the figure captions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    /// κ = γ = 0.2, G = 0.05, ω₀ = 1, vacuum baths.
    Fig3,
    /// κ = γ = 0.2, G = 0.5, ω₀ = 1, vacuum baths.
    Fig4,
}

impl Preset {
    pub fn entries(self) -> Vec<(&'static str, &'static str)> {
        let big_g = match self {
            Preset::Fig3 => "0.05",
            Preset::Fig4 => "0.5",
        };
        let lambda = match self {
            Preset::Fig3 => "0.2",
            Preset::Fig4 => "0.1",
        };
        vec![
            ("kappa", "0.2"),
            ("gamma", "0.2"),
            ("big_g", big_g),
            ("omega0", "1"),
            ("nbar1", "0"),
            ("nbar2", "0"),
            ("lambda", lambda),
            ("delta_ratio", "1"),
        ]
    }
}

#[derive(Debug, Clone, Default)]
pub struct Settings {
    values: BTreeMap<String, (String, Layer)>,
}

const PARAM_DEFAULTS: [(&str, &str); 7] = [
    ("delta", "1"),
    ("omega0", "1"),
    ("lambda", "0"),
    ("g", "0"),
    ("kappa", "0.2"),
    ("gamma", "0.2"),
    ("nbar1", "0"),
];

impl Settings {
    pub fn new() -> Self {
        let mut s = Self::default();
        for (k, v) in PARAM_DEFAULTS {
            s.set(k, v, Layer::Default);
        }
        s.set("nbar2", "0", Layer::Default);
        s
    }

    /// Sets `key` unless a higher layer already holds it.
    pub fn set(&mut self, key: &str, value: &str, layer: Layer) {
        let key = key.trim().to_ascii_lowercase();
        match self.values.get(&key) {
            Some((_, existing)) if *existing > layer => {}
            _ => {
                self.values.insert(key, (value.trim().to_string(), layer));
            }
        }
    }

    pub fn apply_preset(&mut self, preset: Preset) {
        for (k, v) in preset.entries() {
            self.set(k, v, Layer::Preset);
        }
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn load_str(&mut self, text: &str, layer: Layer) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`", lineno + 1))?;
            if k.trim().is_empty() {
                bail!("line {}: empty key", lineno + 1);
            }
            self.set(k, v, layer);
        }
        Ok(())
    }

    pub fn load_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        self.load_str(&text, Layer::File)
            .with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|(v, _)| v.as_str())
    }

    pub fn layer(&self, key: &str) -> Option<Layer> {
        self.values.get(key).map(|(_, l)| *l)
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>> {
        self.get(key)
            .map(|v| {
                v.parse::<f64>()
                    .with_context(|| format!("`{key}` = `{v}` is not a number"))
            })
            .transpose()
    }

    pub fn usize(&self, key: &str) -> Result<Option<usize>> {
        self.get(key)
            .map(|v| {
                v.parse::<usize>()
                    .with_context(|| format!("`{key}` = `{v}` is not a non-negative integer"))
            })
            .transpose()
    }

    pub fn u64(&self, key: &str) -> Result<Option<u64>> {
        self.get(key)
            .map(|v| {
                v.parse::<u64>()
                    .with_context(|| format!("`{key}` = `{v}` is not a non-negative integer"))
            })
            .transpose()
    }

    /// Picks whichever of two alternative keys sits on the higher layer.
    fn pick<'a>(&self, plain: &'a str, alt: &'a str) -> Result<Option<&'a str>> {
        match (self.layer(plain), self.layer(alt)) {
            (None, None) => Ok(None),
            (Some(_), None) => Ok(Some(plain)),
            (None, Some(_)) => Ok(Some(alt)),
            (Some(a), Some(b)) if a > b => Ok(Some(plain)),
            (Some(a), Some(b)) if b > a => Ok(Some(alt)),
            _ => bail!("both `{plain}` and `{alt}` given at the same level"),
        }
    }

    pub fn params(&self) -> Result<SystemParams> {
        let need = |k: &str| -> Result<f64> {
            self.f64(k)?
                .ok_or_else(|| anyhow!("missing parameter `{k}`"))
        };
        let omega0 = need("omega0")?;
        let lambda = match self.pick("lambda", "lambda_ratio")? {
            Some("lambda_ratio") => lambda_from_ratio(need("lambda_ratio")?, omega0)?,
            _ => need("lambda")?,
        };
        let g_coupling = match self.pick("g", "big_g")? {
            Some("big_g") => need("big_g")? / 2.0,
            _ => need("g")?,
        };
        let mut params = SystemParams {
            delta: 0.0,
            omega0,
            lambda_drive: lambda,
            g_coupling,
            kappa: need("kappa")?,
            gamma: need("gamma")?,
            nbar1: need("nbar1")?,
            nbar2: need("nbar2")?,
        };
        params.delta = match self.pick("delta", "delta_ratio")? {
            Some("delta_ratio") => delta_from_ratio(need("delta_ratio")?, &params)?,
            _ => need("delta")?,
        };
        params.validate()?;
        Ok(params)
    }
}

/// Λ such that Λ/ω = ratio with ω = ω₀ − 2Λ.
pub fn lambda_from_ratio(ratio: f64, omega0: f64) -> Result<f64> {
    let denom = 1.0 + 2.0 * ratio;
    if denom == 0.0 {
        bail!("Λ/ω = -1/2 has no solution");
    }
    Ok(ratio * omega0 / denom)
}

/// Δ = ratio · √(Ωω).
pub fn delta_from_ratio(ratio: f64, params: &SystemParams) -> Result<f64> {
    let prod = params.omega_minus() * params.omega_plus();
    if !(prod > 0.0) {
        bail!("Δ/√(Ωω) is undefined for ωΩ = {prod}");
    }
    Ok(ratio * prod.sqrt())
}
