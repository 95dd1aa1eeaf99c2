//! Experiment configuration: a TOML file with one table per module.
//!
//! Every key has a default, unknown keys are rejected, and all module
//! preconditions are checked by [`ExperimentConfig::validate`] before any
//! work starts.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::critical::SectorLabel;
use crate::error::{invalid, Result, VortexError};
use crate::flow::{stability_bound, MAX_SCAN_EPS, MIN_TIME_NODES};
use crate::index::{resolve_sector, IndexQuery};
use crate::space::{CircleSpace, Point};
use crate::spectral::PeriodicGrid;
use crate::webs::EnergyModel;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub space: SpaceConfig,
    pub grid: GridConfig,
    pub crit: CritConfig,
    pub flow: FlowConfig,
    pub scan: ScanConfig,
    pub period: PeriodConfig,
    pub energy: EnergyConfig,
    pub index: IndexConfig,
    pub webs: WebsConfig,
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpaceConfig {
    pub weights: Vec<i64>,
    pub tau: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub n_theta: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CritConfig {
    /// Seed point as `[re, im]` pairs; empty means all ones.
    pub seed: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowConfig {
    pub dt: f64,
    pub t_end: f64,
    pub floor: f64,
    pub record_stride: usize,
    /// Relative radial offset of the start from the trivial critical point.
    pub offset: f64,
    pub tail_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanConfig {
    pub eps: f64,
    pub samples: usize,
    pub rng_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PeriodConfig {
    pub max_winding: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyConfig {
    /// Number of random smooth fields.
    pub fields: usize,
    pub n_t: usize,
    /// Length of the flow segment used for the vortex field.
    pub t_flow: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IndexConfig {
    pub queries: Vec<QueryConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryConfig {
    /// Defaults to the space weights.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<i64>>,
    #[serde(default)]
    pub genus: u32,
    pub class: i64,
    /// Sector labels `"m:k"`, one per end.
    pub sectors: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WebsConfig {
    pub classes: Vec<i64>,
    pub ends: Vec<usize>,
    pub genera: Vec<u32>,
    pub sphere_classes_trivial: bool,
    pub quantum: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Write every n-th recorded flow state as a loop file; 0 disables.
    pub snapshot_stride: usize,
}

impl Default for SpaceConfig {
    fn default() -> Self {
        Self { weights: vec![1], tau: 0.5 }
    }
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { n_theta: 64 }
    }
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self { dt: 1e-3, t_end: 40.0, floor: 1e-9, record_stride: 10, offset: 3e-5, tail_fraction: 0.5 }
    }
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self { eps: 0.1, samples: 1000, rng_seed: 1 }
    }
}

impl Default for PeriodConfig {
    fn default() -> Self {
        Self { max_winding: 3 }
    }
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self { fields: 20, n_t: 64, t_flow: 2.0 }
    }
}

impl Default for IndexConfig {
    fn default() -> Self {
        Self { queries: vec![QueryConfig { weights: None, genus: 0, class: 1, sectors: vec!["1:0".into()] }] }
    }
}

impl Default for WebsConfig {
    fn default() -> Self {
        Self { classes: vec![1, 2, 3], ends: vec![1], genera: vec![0], sphere_classes_trivial: true, quantum: 1 }
    }
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), snapshot_stride: 0 }
    }
}

/// Parses `"m:k"`.
pub fn parse_sector_label(s: &str) -> Option<(u32, u32)> {
    let (m, k) = s.trim().split_once(':')?;
    Some((m.trim().parse().ok()?, k.trim().parse().ok()?))
}

/// Dotted key path of the TOML entry on the line holding byte `offset`.
fn key_at(source: &str, offset: usize) -> Option<String> {
    let before = &source[..offset.min(source.len())];
    let line_start = before.rfind('\n').map_or(0, |i| i + 1);
    let line_end = source[line_start..].find('\n').map_or(source.len(), |i| line_start + i);
    let line = &source[line_start..line_end];
    let section = source[..line_start].lines().rev().find_map(|l| {
        let l = l.trim();
        l.strip_prefix('[').and_then(|l| l.strip_suffix(']')).map(|s| s.trim_matches(['[', ']']).trim().to_string())
    });
    let key = line.split_once('=').map(|(k, _)| k.trim().to_string());
    match (section, key) {
        (Some(s), Some(k)) => Some(format!("{s}.{k}")),
        (None, Some(k)) => Some(k),
        (Some(s), None) => Some(s),
        (None, None) => None,
    }
}

impl ExperimentConfig {
    pub fn from_toml(source: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(source).map_err(|e| {
            let reason = e.message().replace('\n', " ");
            // unknown keys are named in the message; other errors by position
            let field = reason
                .strip_prefix("unknown field `")
                .and_then(|r| r.split('`').next())
                .map(|k| {
                    let section = e.span().and_then(|s| key_at(source, s.start));
                    match section {
                        Some(s) if !s.ends_with(k) => format!("{}.{k}", s.split('.').next().unwrap_or(&s)),
                        Some(s) => s,
                        None => k.to_string(),
                    }
                })
                .or_else(|| e.span().and_then(|s| key_at(source, s.start)))
                .unwrap_or_else(|| "config".to_string());
            invalid(&field, reason)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let source = std::fs::read_to_string(path)
            .map_err(|e| invalid("config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&source)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn circle_space(&self) -> Result<CircleSpace> {
        CircleSpace::new(self.space.weights.clone(), self.space.tau)
    }

    pub fn periodic_grid(&self) -> Result<PeriodicGrid> {
        PeriodicGrid::new(self.grid.n_theta)
    }

    pub fn crit_seed(&self) -> Result<Point> {
        let n = self.space.weights.len();
        if self.crit.seed.is_empty() {
            return Ok(Point(vec![num_complex::Complex64::new(1.0, 0.0); n]));
        }
        if self.crit.seed.len() != n {
            return Err(invalid("crit.seed", format!("expected {n} entries, found {}", self.crit.seed.len())));
        }
        Ok(Point(self.crit.seed.iter().map(|[re, im]| num_complex::Complex64::new(*re, *im)).collect()))
    }

    pub fn energy_model(&self) -> Result<EnergyModel> {
        EnergyModel::new(self.webs.sphere_classes_trivial, self.webs.quantum)
    }

    pub fn index_queries(&self) -> Result<Vec<IndexQuery>> {
        let mut out = Vec::new();
        for (i, q) in self.index.queries.iter().enumerate() {
            let field = format!("index.queries[{i}]");
            let weights = q.weights.clone().unwrap_or_else(|| self.space.weights.clone());
            let space = CircleSpace::new(weights, self.space.tau).map_err(|e| match e {
                VortexError::InvalidParameter { reason, .. } => invalid(&format!("{field}.weights"), reason),
                other => other,
            })?;
            let mut sectors: Vec<SectorLabel> = Vec::new();
            for label in &q.sectors {
                let (m, k) = parse_sector_label(label)
                    .ok_or_else(|| invalid(&format!("{field}.sectors"), format!("expected `m:k`, found `{label}`")))?;
                sectors.push(
                    resolve_sector(&space, m, k).map_err(|e| invalid(&format!("{field}.sectors"), e.to_string()))?,
                );
            }
            if sectors.is_empty() {
                return Err(invalid(&format!("{field}.sectors"), "need at least one cylindrical end"));
            }
            if q.class < 1 {
                return Err(invalid(&format!("{field}.class"), format!("must be at least 1, found {}", q.class)));
            }
            out.push(IndexQuery { space, genus: q.genus, class: q.class, sectors });
        }
        Ok(out)
    }

    /// Checks every module precondition.
    pub fn validate(&self) -> Result<()> {
        self.circle_space()?;
        let grid = self.periodic_grid()?;
        self.crit_seed()?;
        let f = &self.flow;
        let bound = stability_bound(&grid);
        if !(f.dt.is_finite() && f.dt > 0.0 && f.dt <= bound) {
            return Err(invalid("flow.dt", format!("must lie in (0, {bound:.6e}], found {}", f.dt)));
        }
        if !(f.t_end.is_finite() && f.t_end >= 0.0) {
            return Err(invalid("flow.t_end", format!("must be finite and non-negative, found {}", f.t_end)));
        }
        if !(f.floor.is_finite() && f.floor > 0.0) {
            return Err(invalid("flow.floor", format!("must be positive, found {}", f.floor)));
        }
        if f.record_stride == 0 {
            return Err(invalid("flow.record_stride", "must be at least 1"));
        }
        if !(f.offset.is_finite() && f.offset.abs() < 0.5) {
            return Err(invalid("flow.offset", format!("must satisfy |offset| < 0.5, found {}", f.offset)));
        }
        if !(f.tail_fraction > 0.0 && f.tail_fraction <= 1.0) {
            return Err(invalid("flow.tail_fraction", format!("must lie in (0, 1], found {}", f.tail_fraction)));
        }
        let s = &self.scan;
        if !(s.eps > 0.0 && s.eps <= MAX_SCAN_EPS) {
            return Err(invalid("scan.eps", format!("must lie in (0, {MAX_SCAN_EPS}], found {}", s.eps)));
        }
        if s.samples == 0 {
            return Err(invalid("scan.samples", "must be at least 1"));
        }
        if self.period.max_winding < 1 {
            return Err(invalid("period.max_winding", "must be at least 1"));
        }
        let e = &self.energy;
        if e.n_t < MIN_TIME_NODES {
            return Err(invalid("energy.n_t", format!("must be at least {MIN_TIME_NODES}, found {}", e.n_t)));
        }
        if !(e.t_flow.is_finite() && e.t_flow > 0.0) {
            return Err(invalid("energy.t_flow", format!("must be positive, found {}", e.t_flow)));
        }
        if (e.t_flow / f.dt).round() < ((MIN_TIME_NODES - 1) * f.record_stride) as f64 {
            return Err(invalid(
                "energy.t_flow",
                format!("too short for {MIN_TIME_NODES} recorded states at dt {} and stride {}", f.dt, f.record_stride),
            ));
        }
        self.index_queries()?;
        let w = &self.webs;
        if let Some(b) = w.classes.iter().find(|&&b| b < 1) {
            return Err(invalid("webs.classes", format!("classes must be at least 1, found {b}")));
        }
        if w.ends.contains(&0) {
            return Err(invalid("webs.ends", "every web needs at least one end"));
        }
        self.energy_model()?;
        if self.output.dir.as_os_str().is_empty() {
            return Err(invalid("output.dir", "must not be empty"));
        }
        Ok(())
    }
}
