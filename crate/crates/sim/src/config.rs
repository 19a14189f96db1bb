//! Experiment configuration: a versioned TOML schema plus named presets.
//!
//! The canonical text of a config is `toml::to_string` of the parsed value with
//! every default filled in and the seed written out. Its SHA-256 is the config
//! hash that every artifact of a run refers to.

use ed_core::stochastic::{Process, Scheme};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{field, Result, SimError};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Evolve,
    Ensemble,
    GeometryCheck,
    Limits,
    EntropicStep,
    Report,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Evolve => "evolve",
            Kind::Ensemble => "ensemble",
            Kind::GeometryCheck => "geometry-check",
            Kind::Limits => "limits",
            Kind::EntropicStep => "entropic-step",
            Kind::Report => "report",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub name: String,
    pub kind: Kind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub numerics: Option<NumericsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<SamplingConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<GeometryConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limits: Option<LimitsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entropic: Option<EntropicConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<ReportConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub points: Vec<usize>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub periodic: Vec<bool>,
}

fn one() -> f64 {
    1.0
}
fn three() -> f64 {
    3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub masses: Vec<f64>,
    #[serde(default)]
    pub charges: Vec<f64>,
    pub spatial_dim: usize,
    #[serde(default = "one")]
    pub hbar: f64,
    #[serde(default = "one")]
    pub light_speed: f64,
    #[serde(default = "one")]
    pub eta: f64,
    #[serde(default = "three")]
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialConfig {
    Free,
    Harmonic { omega: f64, center: Vec<f64> },
    DoubleWell { depth: f64, a: f64 },
    /// Constant vector potential on a periodic grid.
    Ring { a: Vec<f64> },
    /// Regularized flux tube through the origin of a 2D grid.
    Vortex2d { flux: f64, core: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialConfig {
    Gaussian { center: Vec<f64>, sigma: Vec<f64>, k: Vec<f64> },
    TwoPacket { center: f64, separation: f64, sigma: f64, k: f64 },
    PlaneWave { k: Vec<f64> },
    Vortex { winding: i32, center: Vec<f64>, core: f64, width: f64 },
    GroundState { tolerance: f64 },
}

fn default_solver_tolerance() -> f64 {
    1e-14
}
fn default_solver_iterations() -> usize {
    2000
}
fn default_rho_floor() -> f64 {
    1e-6
}
fn default_every() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsConfig {
    pub dt: f64,
    pub steps: usize,
    #[serde(default = "default_solver_tolerance")]
    pub solver_tolerance: f64,
    #[serde(default = "default_solver_iterations")]
    pub solver_max_iterations: usize,
    /// Density floor (relative to the maximum) for the residual mask.
    #[serde(default = "default_rho_floor")]
    pub rho_floor: f64,
    #[serde(default = "default_every")]
    pub observe_every: usize,
    /// 0 keeps only the first and last snapshot.
    #[serde(default)]
    pub snapshot_every: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialDraw {
    Iid,
    Stratified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessConfig {
    pub process: Process,
    pub eta: f64,
    pub scheme: Scheme,
}

fn default_draws() -> usize {
    200
}
fn default_coarsen() -> usize {
    4
}
fn default_max_terminated() -> f64 {
    0.01
}
fn default_stratified() -> InitialDraw {
    InitialDraw::Stratified
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    pub members: usize,
    /// Number of evenly spaced checkpoints after the initial state.
    pub checkpoints: usize,
    #[serde(default = "default_stratified")]
    pub initial: InitialDraw,
    #[serde(default = "default_draws")]
    pub calibration_draws: usize,
    /// Histogram bins are blocks of `coarsen` cells per axis.
    #[serde(default = "default_coarsen")]
    pub coarsen: usize,
    #[serde(default = "default_max_terminated")]
    pub max_terminated: f64,
    pub processes: Vec<ProcessConfig>,
}

fn default_probes() -> usize {
    100
}
fn default_kernels() -> usize {
    20
}
fn default_info_dt() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    /// Simplex sizes `k`; points carry `k + 1` outcomes.
    pub simplex: Vec<usize>,
    #[serde(default = "default_probes")]
    pub probes: usize,
    #[serde(default = "default_kernels")]
    pub kernels: usize,
    #[serde(default = "one")]
    pub hbar: f64,
    /// Step of the information-metric quadrature check; its `dt`-scaling uses `2 dt`.
    #[serde(default = "default_info_dt")]
    pub information_dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitsConfig {
    pub fluctuation_dt: f64,
    pub fluctuation_draws: usize,
    pub gammas: Vec<f64>,
    pub scaling_dts: Vec<f64>,
    pub scaling_trials: usize,
    /// Members of the OU ensemble whose velocity increments are measured.
    pub increment_members: usize,
    pub bohmian_etas: Vec<f64>,
    pub bohmian_starts: Vec<f64>,
    pub cm_particles: Vec<usize>,
    pub cm_dt: f64,
    pub cm_draws: usize,
    pub cm_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntropicConfig {
    pub dt: f64,
    /// Per-axis kernel variance of the composition check.
    pub variance: f64,
    pub perturbations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportConfig {
    pub runs: Vec<String>,
}

impl ExperimentConfig {
    /// A report run over the given run directories, seed 0.
    pub fn report(runs: Vec<String>) -> Self {
        let mut c = base("report", Kind::Report);
        c.seed = Some(0);
        c.report = Some(ReportConfig { runs });
        c
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        use crate::error::IoContext;
        let text = std::fs::read_to_string(path).at(path)?;
        Self::parse(&text)
    }

    /// Canonical text. Fails only if a value cannot be represented in TOML.
    pub fn canonical(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| field("<root>", e.to_string()))
    }

    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.canonical()?.as_bytes())))
    }

    /// Fill in the seed: an override wins, then the file, then a value derived
    /// from the hash of the seedless canonical text.
    pub fn resolve_seed(mut self, seed_override: Option<u64>) -> Result<Self> {
        if let Some(s) = seed_override {
            self.seed = Some(s);
        }
        if self.seed.is_none() {
            let digest = Sha256::digest(self.canonical()?.as_bytes());
            let mut b = [0u8; 8];
            b.copy_from_slice(&digest[..8]);
            self.seed = Some(u64::from_le_bytes(b));
        }
        Ok(self)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA_VERSION {
            return Err(field(
                "schema",
                format!("version {} is not supported (expected {SCHEMA_VERSION})", self.schema),
            ));
        }
        if self.name.is_empty() {
            return Err(field("name", "must not be empty"));
        }
        let need = |present: bool, name: &str| {
            if present {
                Ok(())
            } else {
                Err(field(name, format!("section is required for kind `{}`", self.kind.as_str())))
            }
        };
        match self.kind {
            Kind::Evolve | Kind::Ensemble => {
                need(self.grid.is_some(), "grid")?;
                need(self.system.is_some(), "system")?;
                need(self.potential.is_some(), "potential")?;
                need(self.initial.is_some(), "initial")?;
                need(self.numerics.is_some(), "numerics")?;
                if self.kind == Kind::Ensemble {
                    need(self.sampling.is_some(), "sampling")?;
                }
            }
            Kind::GeometryCheck => need(self.geometry.is_some(), "geometry")?,
            Kind::Limits => {
                need(self.grid.is_some(), "grid")?;
                need(self.system.is_some(), "system")?;
                need(self.initial.is_some(), "initial")?;
                need(self.numerics.is_some(), "numerics")?;
                need(self.limits.is_some(), "limits")?;
            }
            Kind::EntropicStep => {
                need(self.grid.is_some(), "grid")?;
                need(self.system.is_some(), "system")?;
                need(self.initial.is_some(), "initial")?;
                need(self.entropic.is_some(), "entropic")?;
            }
            Kind::Report => need(self.report.is_some(), "report")?,
        }
        if let Some(g) = &self.grid {
            let d = g.points.len();
            if d == 0 {
                return Err(field("grid.points", "at least one axis is required"));
            }
            if g.lower.len() != d || g.upper.len() != d || g.periodic.len() != d {
                return Err(field("grid", "points, lower, upper and periodic must have the same length"));
            }
            if let Some(a) = (0..d).find(|&a| !(g.upper[a] > g.lower[a])) {
                return Err(field(&format!("grid.upper[{a}]"), "must exceed grid.lower"));
            }
        }
        if let Some(s) = &self.system {
            if s.masses.is_empty() {
                return Err(field("system.masses", "at least one particle is required"));
            }
            if !s.charges.is_empty() && s.charges.len() != s.masses.len() {
                return Err(field("system.charges", "one charge per particle (or none)"));
            }
            if let Some(g) = &self.grid {
                if g.points.len() != s.masses.len() * s.spatial_dim {
                    return Err(field(
                        "system.spatial_dim",
                        format!(
                            "{} particles in {} dimensions need a {}-axis grid, got {}",
                            s.masses.len(),
                            s.spatial_dim,
                            s.masses.len() * s.spatial_dim,
                            g.points.len()
                        ),
                    ));
                }
            }
        }
        if let Some(n) = &self.numerics {
            if !(n.dt > 0.0) {
                return Err(field("numerics.dt", "must be positive"));
            }
            if n.steps == 0 {
                return Err(field("numerics.steps", "must be positive"));
            }
            if n.observe_every == 0 {
                return Err(field("numerics.observe_every", "must be positive"));
            }
        }
        if let Some(s) = &self.sampling {
            if s.members == 0 {
                return Err(field("sampling.members", "must be positive"));
            }
            if s.checkpoints == 0 {
                return Err(field("sampling.checkpoints", "must be positive"));
            }
            if let Some(n) = &self.numerics {
                if s.checkpoints > n.steps {
                    return Err(field("sampling.checkpoints", "cannot exceed numerics.steps"));
                }
            }
            if s.processes.is_empty() {
                return Err(field("sampling.processes", "at least one process is required"));
            }
            if s.coarsen == 0 {
                return Err(field("sampling.coarsen", "must be positive"));
            }
        }
        if let Some(g) = &self.geometry {
            if g.simplex.is_empty() || g.simplex.contains(&0) {
                return Err(field("geometry.simplex", "sizes must be positive"));
            }
        }
        if let Some(l) = &self.limits {
            if l.bohmian_etas.len() < 2 {
                return Err(field("limits.bohmian_etas", "at least two noise strengths are required"));
            }
            if l.scaling_dts.len() < 4 {
                return Err(field("limits.scaling_dts", "at least four step sizes are required"));
            }
        }
        if let (Some(e), Some(s), Some(g)) = (&self.entropic, &self.system, &self.grid) {
            if !(e.dt > 0.0) {
                return Err(field("entropic.dt", "must be positive"));
            }
            if !(e.variance > 0.0) {
                return Err(field("entropic.variance", "must be positive"));
            }
            // a kernel narrower than a cell falls between grid points and loses mass
            let m = s.masses.iter().cloned().fold(f64::MIN, f64::max);
            let width = (s.eta * e.dt.powf(s.gamma) / m).sqrt();
            let h = (0..g.points.len())
                .map(|a| (g.upper[a] - g.lower[a]) / g.points[a] as f64)
                .fold(0.0, f64::max);
            if width < h {
                return Err(field(
                    "entropic.dt",
                    format!("transition width {width:.3e} is below the grid spacing {h:.3e}; raise dt or refine the grid"),
                ));
            }
        }
        if let Some(r) = &self.report {
            if r.runs.is_empty() {
                return Err(field("report.runs", "at least one run directory is required"));
            }
        }
        Ok(())
    }
}

pub const PRESETS: &[&str] = &[
    "free-1d",
    "harmonic",
    "double-well",
    "ring",
    "vortex-2d",
    "free-1d-ensemble",
    "harmonic-ensemble",
    "two-packet",
    "geometry-k8",
    "geometry-sweep",
    "limits",
    "entropic-step",
];

fn base(name: &str, kind: Kind) -> ExperimentConfig {
    ExperimentConfig {
        schema: SCHEMA_VERSION,
        name: name.to_string(),
        kind,
        seed: None,
        grid: None,
        system: None,
        potential: None,
        initial: None,
        numerics: None,
        sampling: None,
        geometry: None,
        limits: None,
        entropic: None,
        report: None,
    }
}

fn line(points: usize, lo: f64, hi: f64, periodic: bool) -> GridConfig {
    GridConfig {
        points: vec![points],
        lower: vec![lo],
        upper: vec![hi],
        periodic: vec![periodic],
    }
}

fn particle(dim: usize, mass: f64, charge: f64) -> SystemConfig {
    SystemConfig {
        masses: vec![mass],
        charges: vec![charge],
        spatial_dim: dim,
        hbar: 1.0,
        light_speed: 1.0,
        eta: 1.0,
        gamma: 3.0,
    }
}

fn numerics(dt: f64, steps: usize, observe_every: usize) -> NumericsConfig {
    NumericsConfig {
        dt,
        steps,
        solver_tolerance: default_solver_tolerance(),
        solver_max_iterations: default_solver_iterations(),
        rho_floor: default_rho_floor(),
        observe_every,
        snapshot_every: 0,
    }
}

fn gaussian(center: f64, sigma: f64, k: f64) -> InitialConfig {
    InitialConfig::Gaussian {
        center: vec![center],
        sigma: vec![sigma],
        k: vec![k],
    }
}

fn ou_and_es(es_scheme: Scheme) -> Vec<ProcessConfig> {
    vec![
        ProcessConfig {
            process: Process::Ou,
            eta: 1.0,
            scheme: Scheme::Midpoint,
        },
        ProcessConfig {
            process: Process::Es,
            eta: 1.0,
            scheme: es_scheme,
        },
    ]
}

fn sampling(members: usize, processes: Vec<ProcessConfig>) -> SamplingConfig {
    SamplingConfig {
        members,
        checkpoints: 8,
        initial: InitialDraw::Stratified,
        calibration_draws: default_draws(),
        coarsen: default_coarsen(),
        max_terminated: default_max_terminated(),
        processes,
    }
}

/// Named presets. Seeds are left for [`ExperimentConfig::resolve_seed`].
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let mut c;
    match name {
        "free-1d" => {
            // sigma = 1 spreads by sqrt(10) in three characteristic times 2 m sigma^2 / hbar
            c = base(name, Kind::Evolve);
            c.grid = Some(line(512, -14.0, 14.0, false));
            c.system = Some(particle(1, 1.0, 0.0));
            c.potential = Some(PotentialConfig::Free);
            c.initial = Some(gaussian(0.0, 1.0, 0.0));
            c.numerics = Some(NumericsConfig {
                snapshot_every: 400,
                ..numerics(0.005, 1200, 40)
            });
        }
        "harmonic" => {
            c = base(name, Kind::Evolve);
            c.grid = Some(line(256, -8.0, 8.0, false));
            c.system = Some(particle(1, 1.0, 0.0));
            c.potential = Some(PotentialConfig::Harmonic {
                omega: 1.0,
                center: vec![0.0],
            });
            c.initial = Some(gaussian(1.5, 0.5, 0.0));
            c.numerics = Some(numerics(0.01, 1000, 10));
        }
        "double-well" => {
            c = base(name, Kind::Evolve);
            c.grid = Some(line(256, -4.0, 4.0, false));
            c.system = Some(particle(1, 1.0, 0.0));
            c.potential = Some(PotentialConfig::DoubleWell { depth: 2.0, a: 1.5 });
            c.initial = Some(gaussian(-1.5, 0.4, 0.0));
            c.numerics = Some(numerics(0.01, 500, 10));
        }
        "ring" => {
            let l = 20.0;
            let k = 2.0 * std::f64::consts::PI * 3.0 / l;
            c = base(name, Kind::Evolve);
            c.grid = Some(line(256, 0.0, l, true));
            c.system = Some(particle(1, 1.0, 1.0));
            c.potential = Some(PotentialConfig::Ring { a: vec![0.35] });
            c.initial = Some(InitialConfig::PlaneWave { k: vec![k] });
            c.numerics = Some(numerics(0.01, 200, 10));
        }
        "vortex-2d" => {
            c = base(name, Kind::Evolve);
            c.grid = Some(GridConfig {
                points: vec![64, 64],
                lower: vec![-8.0, -8.0],
                upper: vec![8.0, 8.0],
                periodic: vec![false, false],
            });
            c.system = Some(particle(2, 1.0, 1.0));
            c.potential = Some(PotentialConfig::Vortex2d { flux: 1.0, core: 0.5 });
            c.initial = Some(InitialConfig::Vortex {
                winding: 1,
                center: vec![0.0, 0.0],
                core: 1.0,
                width: 3.0,
            });
            c.numerics = Some(numerics(0.02, 100, 10));
        }
        "free-1d-ensemble" => {
            c = base(name, Kind::Ensemble);
            c.grid = Some(line(512, -30.0, 30.0, false));
            c.system = Some(particle(1, 1.0, 0.0));
            c.potential = Some(PotentialConfig::Free);
            c.initial = Some(gaussian(-3.0, 1.0, 1.0));
            c.numerics = Some(numerics(0.01, 400, 8));
            c.sampling = Some(sampling(100_000, ou_and_es(Scheme::Euler)));
        }
        "harmonic-ensemble" => {
            c = base(name, Kind::Ensemble);
            c.grid = Some(line(256, -8.0, 8.0, false));
            c.system = Some(particle(1, 1.0, 0.0));
            c.potential = Some(PotentialConfig::Harmonic {
                omega: 1.0,
                center: vec![0.0],
            });
            c.initial = Some(gaussian(1.5, 0.5, 0.0));
            c.numerics = Some(numerics(0.01, 400, 8));
            c.sampling = Some(sampling(100_000, ou_and_es(Scheme::Euler)));
        }
        "two-packet" => {
            // the ES osmotic drift is singular at the interference nodes and its
            // interpolation error shows up in the histograms unless h is small;
            // the box is as tight as the spreading packets allow
            c = base(name, Kind::Ensemble);
            c.grid = Some(line(512, -12.0, 12.0, false));
            c.system = Some(particle(1, 1.0, 0.0));
            c.potential = Some(PotentialConfig::Free);
            c.initial = Some(InitialConfig::TwoPacket {
                center: 0.0,
                separation: 8.0,
                sigma: 1.0,
                k: 2.0,
            });
            c.numerics = Some(numerics(0.0025, 1600, 40));
            c.sampling = Some(sampling(100_000, ou_and_es(Scheme::Euler)));
        }
        "geometry-k8" | "geometry-sweep" => {
            c = base(name, Kind::GeometryCheck);
            let simplex = if name == "geometry-k8" {
                vec![8]
            } else {
                vec![1, 3, 8, 16, 32, 64]
            };
            c.geometry = Some(GeometryConfig {
                simplex,
                probes: default_probes(),
                kernels: default_kernels(),
                hbar: 1.0,
                information_dt: default_info_dt(),
            });
        }
        "limits" => {
            c = base(name, Kind::Limits);
            c.grid = Some(line(400, -10.0, 10.0, false));
            c.system = Some(particle(1, 1.0, 0.0));
            c.initial = Some(gaussian(-1.0, 1.0, 1.0));
            c.numerics = Some(numerics(0.02, 50, 1));
            c.limits = Some(LimitsConfig {
                fluctuation_dt: 0.1,
                fluctuation_draws: 400_000,
                gammas: vec![1.0, 3.0, 4.0],
                scaling_dts: (0..7).map(|i| 10f64.powf(-3.0 + 0.4 * i as f64)).collect(),
                scaling_trials: 20_000,
                increment_members: 10_000,
                bohmian_etas: vec![1e-2, 1e-3, 1e-4],
                bohmian_starts: (0..20).map(|i| -2.5 + 0.15 * i as f64).collect(),
                cm_particles: vec![1, 2, 4, 8],
                cm_dt: 0.05,
                cm_draws: 200_000,
                cm_sigma: 1.0,
            });
        }
        "entropic-step" => {
            c = base(name, Kind::EntropicStep);
            c.grid = Some(line(256, -8.0, 8.0, false));
            c.system = Some(particle(1, 1.0, 0.0));
            c.initial = Some(gaussian(0.0, 1.0, 1.5));
            // variance dt^3 / m: at dt 0.4 the kernel spans about four cells
            c.entropic = Some(EntropicConfig {
                dt: 0.4,
                variance: 0.02,
                perturbations: 200,
            });
        }
        _ => return Err(SimError::UnknownPreset(name.to_string())),
    }
    c.validate()?;
    Ok(c)
}
