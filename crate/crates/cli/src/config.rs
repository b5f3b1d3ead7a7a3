//! Sweep configuration: presets for the published experiments and a flat
//! `key = value` text format that mirrors the command-line flags.

use std::collections::BTreeMap;
use std::fmt::{self, Display, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    Scalar,
    Projection,
    Bsc,
}

impl SweepKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Scalar => "scalar",
            Self::Projection => "projection",
            Self::Bsc => "bsc",
        }
    }
}

impl FromStr for SweepKind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scalar" => Ok(Self::Scalar),
            "projection" => Ok(Self::Projection),
            "bsc" => Ok(Self::Bsc),
            _ => Err(CliError::Config(format!("unknown sweep kind `{s}` (scalar, projection, bsc)"))),
        }
    }
}

impl Display for SweepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Named parameter sets. The `-caption` and `-text` variants differ where the
/// figure captions and the surrounding prose list different grids; the bare
/// `fig3`/`fig4`/`fig5` names select the caption variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Fig3Caption,
    Fig3Text,
    Fig4Caption,
    Fig4Text,
    Fig5Caption,
    Fig5Text,
    Fig6,
    Custom,
}

impl Preset {
    pub const ALL: [Preset; 8] = [
        Self::Fig3Caption,
        Self::Fig3Text,
        Self::Fig4Caption,
        Self::Fig4Text,
        Self::Fig5Caption,
        Self::Fig5Text,
        Self::Fig6,
        Self::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Fig3Caption => "fig3-caption",
            Self::Fig3Text => "fig3-text",
            Self::Fig4Caption => "fig4-caption",
            Self::Fig4Text => "fig4-text",
            Self::Fig5Caption => "fig5-caption",
            Self::Fig5Text => "fig5-text",
            Self::Fig6 => "fig6",
            Self::Custom => "custom",
        }
    }

    pub fn kind(self) -> Option<SweepKind> {
        match self {
            Self::Fig3Caption | Self::Fig3Text => Some(SweepKind::Scalar),
            Self::Fig4Caption | Self::Fig4Text | Self::Fig5Caption | Self::Fig5Text => Some(SweepKind::Projection),
            Self::Fig6 => Some(SweepKind::Bsc),
            Self::Custom => None,
        }
    }
}

impl FromStr for Preset {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig3" => return Ok(Self::Fig3Caption),
            "fig4" => return Ok(Self::Fig4Caption),
            "fig5" => return Ok(Self::Fig5Caption),
            _ => {}
        }
        Self::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Self::ALL.iter().map(|p| p.name()).collect();
            CliError::Config(format!("unknown preset `{s}` (one of {}, fig3, fig4, fig5)", names.join(", ")))
        })
    }
}

impl Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub preset: Preset,
    pub kind: SweepKind,
    /// Scalar sweeps: source variances, noise variances, budgets (ascending).
    pub a2: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub d: Vec<f64>,
    /// Projection sweeps: source dimensions and `n/m` ratios.
    pub m: Vec<usize>,
    pub alpha: Vec<f64>,
    /// Budgets as fractions of `||H||_F^2`, in `(0, 1]`.
    pub d_fractions: Vec<f64>,
    /// Budgets in absolute units, used alongside the fractions.
    pub d_absolute: Vec<f64>,
    /// Binary sweeps: joints `(a, b, c, d)` and budgets (ascending).
    pub joints: Vec<[f64; 4]>,
    pub eps: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Seeding mesh of the scalar solver.
    pub grid: usize,
    /// Mesh of the brute-force comparison (scalar, binary); 0 skips it.
    pub oracle_grid: usize,
    /// Adds a wall-clock column, which makes the output nondeterministic.
    pub timing: bool,
    pub out: Option<PathBuf>,
}

fn tenths(lo: u32, hi: u32) -> Vec<f64> {
    (lo..=hi).map(|i| f64::from(i) / 10.0).collect()
}

impl SweepConfig {
    /// Empty grids of the given kind with default solver settings.
    pub fn custom(kind: SweepKind) -> Self {
        Self {
            preset: Preset::Custom,
            kind,
            a2: vec![],
            sigma2: vec![],
            d: vec![],
            m: vec![],
            alpha: vec![],
            d_fractions: vec![],
            d_absolute: vec![],
            joints: vec![],
            eps: vec![],
            seeds: vec![0],
            grid: 200,
            oracle_grid: 0,
            timing: false,
            out: None,
        }
    }

    pub fn preset(preset: Preset) -> Result<Self> {
        let Some(kind) = preset.kind() else {
            return Err(CliError::Config("the custom preset needs explicit grids".into()));
        };
        let mut c = Self::custom(kind);
        c.preset = preset;
        match preset {
            Preset::Fig3Caption | Preset::Fig3Text => {
                c.a2 =
                    if preset == Preset::Fig3Caption { vec![1.0, 0.75, 0.5, 0.25] } else { vec![0.1, 0.3, 0.7, 0.9] };
                c.sigma2 = tenths(1, 10);
                c.d = tenths(1, 10);
                c.oracle_grid = 200;
            }
            Preset::Fig4Caption | Preset::Fig4Text | Preset::Fig5Caption | Preset::Fig5Text => {
                c.m = if matches!(preset, Preset::Fig4Caption | Preset::Fig5Caption) {
                    vec![50, 250, 1250, 2500]
                } else {
                    vec![10, 50, 250, 1250]
                };
                c.alpha = if matches!(preset, Preset::Fig4Caption | Preset::Fig4Text) {
                    tenths(1, 9)
                } else {
                    tenths(11, 19)
                };
                c.d_fractions = tenths(1, 10);
            }
            Preset::Fig6 => {
                c.joints = vec![
                    [0.45, 0.05, 0.05, 0.45],
                    [0.4, 0.1, 0.1, 0.4],
                    // listed as (0.3, 0.1, 0.1, 0.3), which sums to 0.8
                    [0.375, 0.125, 0.125, 0.375],
                    [0.25, 0.25, 0.25, 0.25],
                ];
                c.eps = (0..=10).map(|i| f64::from(i) / 20.0).collect();
            }
            Preset::Custom => unreachable!("handled above"),
        }
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        let ascending = |v: &[f64]| v.windows(2).all(|w| w[0] <= w[1]);
        if let Some(k) = self.preset.kind() {
            if k != self.kind {
                return bad(format!("preset {} runs a {} sweep, not {}", self.preset, k, self.kind));
            }
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        match self.kind {
            SweepKind::Scalar => {
                for (name, v) in [("a2", &self.a2), ("sigma2", &self.sigma2), ("d", &self.d)] {
                    if v.is_empty() {
                        return bad(format!("{name} must not be empty"));
                    }
                    if v.iter().any(|x| !x.is_finite()) {
                        return bad(format!("{name} must be finite"));
                    }
                }
                if self.a2.iter().chain(&self.sigma2).any(|x| *x <= 0.0) {
                    return bad("a2 and sigma2 must be positive".into());
                }
                if self.d.iter().any(|x| *x < 0.0) || !ascending(&self.d) {
                    return bad("d must be nonnegative and ascending".into());
                }
                if self.grid < 2 {
                    return bad("grid must be at least 2".into());
                }
            }
            SweepKind::Projection => {
                if self.m.is_empty() || self.alpha.is_empty() {
                    return bad("m and alpha must not be empty".into());
                }
                if self.m.contains(&0) {
                    return bad("m must be positive".into());
                }
                if self.alpha.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
                    return bad("alpha must be positive".into());
                }
                if self.d_fractions.is_empty() && self.d_absolute.is_empty() {
                    return bad("need d_fractions or d_absolute".into());
                }
                if self.d_fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
                    return bad("d_fractions must lie in (0, 1]".into());
                }
                if self.d_absolute.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
                    return bad("d_absolute must be positive".into());
                }
            }
            SweepKind::Bsc => {
                if self.joints.is_empty() || self.eps.is_empty() {
                    return bad("joints and eps must not be empty".into());
                }
                for j in &self.joints {
                    miattack_core::bsc::BscJoint::new(j[0], j[1], j[2], j[3])?;
                }
                if self.eps.iter().any(|e| !(e.is_finite() && *e >= 0.0)) || !ascending(&self.eps) {
                    return bad("eps must be nonnegative and ascending".into());
                }
            }
        }
        if self.oracle_grid == 1 {
            return bad("oracle_grid must be 0 (off) or at least 2".into());
        }
        Ok(())
    }

    /// Serializes every field as `key = value`, one per line.
    pub fn to_kv(&self) -> String {
        fn list<T: Display>(v: &[T]) -> String {
            v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
        }
        let joints: Vec<String> = self.joints.iter().map(|j| list(j.as_slice())).collect();
        let mut s = String::new();
        let mut put = |k: &str, v: String| writeln!(s, "{k} = {v}").expect("writing to a String");
        put("preset", self.preset.to_string());
        put("kind", self.kind.to_string());
        put("a2", list(&self.a2));
        put("sigma2", list(&self.sigma2));
        put("d", list(&self.d));
        put("m", list(&self.m));
        put("alpha", list(&self.alpha));
        put("d_fractions", list(&self.d_fractions));
        put("d_absolute", list(&self.d_absolute));
        put("joints", joints.join(";"));
        put("eps", list(&self.eps));
        put("seeds", list(&self.seeds));
        put("grid", self.grid.to_string());
        put("oracle_grid", self.oracle_grid.to_string());
        put("timing", self.timing.to_string());
        put("out", self.out.as_ref().map(|p| p.display().to_string()).unwrap_or_default());
        s
    }

    /// Parses the `key = value` format. A `preset` key supplies defaults that
    /// the remaining keys override; without one, `kind` is required.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            if entries.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                return Err(CliError::Config(format!("line {}: duplicate key `{}`", lineno + 1, k.trim())));
            }
        }
        let preset = match entries.remove("preset") {
            Some(p) => p.parse()?,
            None => Preset::Custom,
        };
        let mut c = match preset {
            Preset::Custom => {
                let kind = entries
                    .get("kind")
                    .ok_or_else(|| CliError::Config("custom sweeps need a `kind`".into()))?
                    .parse()?;
                Self::custom(kind)
            }
            p => Self::preset(p)?,
        };
        for (k, v) in entries {
            c.set(&k, &v)?;
        }
        Ok(c)
    }

    /// Overrides one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "preset" => self.preset = value.parse()?,
            "kind" => self.kind = value.parse()?,
            "a2" => self.a2 = parse_list(key, value)?,
            "sigma2" => self.sigma2 = parse_list(key, value)?,
            "d" => self.d = parse_list(key, value)?,
            "m" => self.m = parse_list(key, value)?,
            "alpha" => self.alpha = parse_list(key, value)?,
            "d_fractions" => self.d_fractions = parse_list(key, value)?,
            "d_absolute" => self.d_absolute = parse_list(key, value)?,
            "joints" => {
                self.joints = value
                    .split(';')
                    .filter(|s| !s.trim().is_empty())
                    .map(|j| {
                        let v: Vec<f64> = parse_list(key, j)?;
                        <[f64; 4]>::try_from(v)
                            .map_err(|_| CliError::Config(format!("joint `{}` needs four entries", j.trim())))
                    })
                    .collect::<Result<_>>()?
            }
            "eps" => self.eps = parse_list(key, value)?,
            "seeds" => self.seeds = parse_list(key, value)?,
            "grid" => self.grid = parse_one(key, value)?,
            "oracle_grid" => self.oracle_grid = parse_one(key, value)?,
            "timing" => self.timing = parse_one(key, value)?,
            "out" => self.out = (!value.is_empty()).then(|| PathBuf::from(value)),
            _ => return Err(CliError::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_kv(&text)
    }
}

fn parse_one<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| CliError::Config(format!("{key}: cannot parse `{}`", value.trim())))
}

/// Comma-separated values; an empty string is an empty list.
pub fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| parse_one(key, s)).collect()
}
