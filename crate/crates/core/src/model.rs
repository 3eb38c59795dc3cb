//! Run configuration and the eight cat-state packet labels.
//!
//! A [`ModelConfig`] is built from defaults, a `key = value` text file, or
//! individual overrides through [`ModelConfig::set`], then checked once with
//! [`ModelConfig::validate`]. After validation it is treated as immutable.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Couplings used for the reference run.
pub const PRESET_OMEGAS: [f64; 3] = [0.305, 0.1, 0.202];

/// Sample times of the reference run.
pub const PRESET_TIMES: [f64; 10] = [
    0.005, 0.705, 1.405, 2.105, 2.805, 4.205, 5.605, 205.605, 2000.005, 5000.005,
];

/// Packets whose particle-1 centre starts at the origin.
pub const GROUP_ORIGIN: [usize; 4] = [0, 2, 3, 6];
/// Packets whose particle-1 centre starts at `d[0]`.
pub const GROUP_DISPLACED: [usize; 4] = [1, 4, 5, 7];

/// Bit pattern of each packet label: entry `k` lists which particles are displaced.
const LABEL_BITS: [[bool; 3]; 8] = [
    [false, false, false],
    [true, false, false],
    [false, true, false],
    [false, false, true],
    [true, true, false],
    [true, false, true],
    [false, true, true],
    [true, true, true],
];

/// A uniform grid `min..=max` with `count` points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformGrid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl UniformGrid {
    pub fn new(min: f64, max: f64, count: usize) -> Self {
        Self { min, max, count }
    }

    pub fn step(&self) -> f64 {
        (self.max - self.min) / (self.count - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        if i + 1 == self.count {
            self.max
        } else {
            self.min + i as f64 * self.step()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.point(i)).collect()
    }
}

/// Sampling grid: either an explicit range or one sized per time sample from
/// the evolved packets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridSpec {
    Auto { count: usize },
    Fixed(UniformGrid),
}

impl GridSpec {
    pub fn count(&self) -> usize {
        match self {
            GridSpec::Auto { count } => *count,
            GridSpec::Fixed(g) => g.count,
        }
    }

    /// Same kind of grid with the point count replaced (kept odd).
    pub fn with_count(&self, count: usize) -> Self {
        let count = count | 1;
        match self {
            GridSpec::Auto { .. } => GridSpec::Auto { count },
            GridSpec::Fixed(g) => GridSpec::Fixed(UniformGrid { count, ..*g }),
        }
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridSpec::Auto { count } => write!(f, "auto:{count}"),
            GridSpec::Fixed(g) => write!(f, "{}, {}, {}", g.min, g.max, g.count),
        }
    }
}

impl FromStr for GridSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("auto") {
            let rest = rest.trim();
            if rest.is_empty() {
                return Ok(GridSpec::Auto { count: 257 });
            }
            let n = rest
                .strip_prefix(':')
                .ok_or_else(|| format!("expected `auto:<count>`, got `{s}`"))?;
            let count = n.trim().parse().map_err(|e| format!("bad count `{n}`: {e}"))?;
            return Ok(GridSpec::Auto { count });
        }
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(format!("expected `auto[:count]` or `min, max, count`, got `{s}`"));
        }
        let min = parse_f64(parts[0])?;
        let max = parse_f64(parts[1])?;
        let count = parts[2]
            .parse()
            .map_err(|e| format!("bad count `{}`: {e}", parts[2]))?;
        Ok(GridSpec::Fixed(UniformGrid { min, max, count }))
    }
}

/// Physical parameters, time samples and sampling grids of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Common particle mass.
    pub mass: f64,
    pub omega12: f64,
    pub omega13: f64,
    pub omega23: f64,
    pub hbar: f64,
    /// Gaussian width of each particle's cat components.
    pub sigma: [f64; 3],
    /// Separation of the two cat components of each particle.
    pub d: [f64; 3],
    pub t0: f64,
    pub times: Vec<f64>,
    /// Particle-1 output grid.
    pub x1_grid: GridSpec,
    /// Per-axis quadrature grid for the (x2, x3) marginalization.
    pub quad_grid: GridSpec,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            mass: 1.0,
            omega12: PRESET_OMEGAS[0],
            omega13: PRESET_OMEGAS[1],
            omega23: PRESET_OMEGAS[2],
            hbar: 1.0,
            sigma: [1.0; 3],
            d: [8.0; 3],
            t0: 0.0,
            times: PRESET_TIMES.to_vec(),
            x1_grid: GridSpec::Auto { count: 801 },
            quad_grid: GridSpec::Auto { count: 257 },
        }
    }
}

/// Keys accepted by [`ModelConfig::set`] and the config file.
pub const CONFIG_KEYS: [&str; 11] = [
    "mass", "omega12", "omega13", "omega23", "hbar", "sigma", "d", "t0", "times", "x1_grid",
    "quad_grid",
];

fn parse_f64(s: &str) -> std::result::Result<f64, String> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| format!("bad number `{}`: {e}", s.trim()))
}

fn parse_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(parse_f64)
        .collect()
}

/// Accepts one value (broadcast) or exactly three.
fn parse_triple(s: &str) -> std::result::Result<[f64; 3], String> {
    match parse_list(s)?.as_slice() {
        [v] => Ok([*v; 3]),
        [a, b, c] => Ok([*a, *b, *c]),
        other => Err(format!("expected 1 or 3 values, got {}", other.len())),
    }
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

impl ModelConfig {
    pub fn omegas(&self) -> [f64; 3] {
        [self.omega12, self.omega13, self.omega23]
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma.iter().copied().fold(0.0, f64::max)
    }

    pub fn d_max(&self) -> f64 {
        self.d.iter().map(|x| x.abs()).fold(0.0, f64::max)
    }

    /// Assign one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), Error> {
        let bad = |reason: String| Error::Parse { line: 0, reason: format!("{key}: {reason}") };
        match key {
            "mass" => self.mass = parse_f64(value).map_err(bad)?,
            "omega12" => self.omega12 = parse_f64(value).map_err(bad)?,
            "omega13" => self.omega13 = parse_f64(value).map_err(bad)?,
            "omega23" => self.omega23 = parse_f64(value).map_err(bad)?,
            "hbar" => self.hbar = parse_f64(value).map_err(bad)?,
            "sigma" => self.sigma = parse_triple(value).map_err(bad)?,
            "d" => self.d = parse_triple(value).map_err(bad)?,
            "t0" => self.t0 = parse_f64(value).map_err(bad)?,
            "times" => self.times = parse_list(value).map_err(bad)?,
            "x1_grid" => self.x1_grid = value.parse().map_err(bad)?,
            "quad_grid" => self.quad_grid = value.parse().map_err(bad)?,
            _ => return Err(Error::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Textual form of one field, inverse of [`ModelConfig::set`].
    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "mass" => self.mass.to_string(),
            "omega12" => self.omega12.to_string(),
            "omega13" => self.omega13.to_string(),
            "omega23" => self.omega23.to_string(),
            "hbar" => self.hbar.to_string(),
            "sigma" => fmt_list(&self.sigma),
            "d" => fmt_list(&self.d),
            "t0" => self.t0.to_string(),
            "times" => fmt_list(&self.times),
            "x1_grid" => self.x1_grid.to_string(),
            "quad_grid" => self.quad_grid.to_string(),
            _ => return None,
        })
    }

    /// Parse a `key = value` file on top of the defaults. `#` starts a comment.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_config_str(text)?;
        Ok(cfg)
    }

    pub fn apply_config_str(&mut self, text: &str) -> Result<()> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: idx + 1,
                reason: format!("expected `key = value`, got `{line}`"),
            })?;
            self.set(key.trim(), value.trim()).map_err(|e| match e {
                Error::Parse { reason, .. } => Error::Parse { line: idx + 1, reason },
                other => other,
            })?;
        }
        Ok(())
    }

    /// Render as a config file that [`ModelConfig::from_config_str`] reads back.
    pub fn to_config_string(&self) -> String {
        CONFIG_KEYS
            .iter()
            .map(|k| format!("{k} = {}\n", self.get(k).unwrap_or_default()))
            .collect()
    }

    /// Check every invariant; returns the config unchanged on success.
    pub fn validate(self) -> Result<Self> {
        let positive = |field: &'static str, value: f64| {
            if value > 0.0 && value.is_finite() {
                Ok(())
            } else {
                Err(Error::NonPositiveParameter { field, value })
            }
        };
        positive("mass", self.mass)?;
        positive("hbar", self.hbar)?;
        for (field, s) in ["sigma1", "sigma2", "sigma3"].into_iter().zip(self.sigma) {
            positive(field, s)?;
        }
        for (field, w) in ["omega12", "omega13", "omega23"].into_iter().zip(self.omegas()) {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::NonPositiveParameter { field, value: w });
            }
        }
        if self.omegas().iter().all(|&w| w == 0.0) {
            return Err(Error::NoCoupling);
        }
        for (field, v) in ["d1", "d2", "d3"].into_iter().zip(self.d) {
            if !v.is_finite() {
                return Err(Error::InvalidGrid { field, reason: format!("not finite: {v}") });
            }
        }
        if !self.t0.is_finite() {
            return Err(Error::InvalidGrid { field: "t0", reason: "not finite".into() });
        }
        if self.times.is_empty() {
            return Err(Error::EmptyTimeGrid);
        }
        for &t in &self.times {
            if !(t > self.t0) || !t.is_finite() {
                return Err(Error::TimeNotAfterT0 { time: t, t0: self.t0 });
            }
        }
        if self.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid {
                field: "times",
                reason: "sample times must be strictly increasing".into(),
            });
        }
        check_grid("x1_grid", &self.x1_grid)?;
        check_grid("quad_grid", &self.quad_grid)?;
        if let GridSpec::Fixed(g) = self.quad_grid {
            let need = 4.0 * self.sigma_max() + self.d_max();
            if g.min > -need || g.max < need {
                return Err(Error::QuadratureSpanTooSmall {
                    field: "quad_grid",
                    detail: format!("[{}, {}] does not contain [{}, {}]", g.min, g.max, -need, need),
                });
            }
        }
        Ok(self)
    }
}

fn check_grid(field: &'static str, spec: &GridSpec) -> Result<()> {
    let count = spec.count();
    if count < 3 || count % 2 == 0 {
        return Err(Error::InvalidGrid {
            field,
            reason: format!("count must be odd and at least 3 for Simpson weights, got {count}"),
        });
    }
    if let GridSpec::Fixed(g) = spec {
        if !(g.min < g.max) || !g.min.is_finite() || !g.max.is_finite() {
            return Err(Error::InvalidGrid {
                field,
                reason: format!("need finite min < max, got [{}, {}]", g.min, g.max),
            });
        }
    }
    Ok(())
}

/// One of the eight product Gaussians making up the initial state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketLabel {
    pub k: usize,
    /// Centre of the packet: each entry is either 0 or the particle's `d`.
    pub disp: [f64; 3],
}

impl PacketLabel {
    /// Whether particle 1 starts displaced in this packet.
    pub fn particle1_displaced(&self) -> bool {
        LABEL_BITS[self.k][0]
    }

    pub fn bits(&self) -> [bool; 3] {
        LABEL_BITS[self.k]
    }
}

/// The eight packet labels in canonical order.
pub fn packet_labels(config: &ModelConfig) -> [PacketLabel; 8] {
    std::array::from_fn(|k| {
        let bits = LABEL_BITS[k];
        PacketLabel {
            k,
            disp: std::array::from_fn(|i| if bits[i] { config.d[i] } else { 0.0 }),
        }
    })
}

/// Whether packets `k` and `l` share particle 1's initial centre.
pub fn same_group(k: usize, l: usize) -> bool {
    LABEL_BITS[k][0] == LABEL_BITS[l][0]
}
