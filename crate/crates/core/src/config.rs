//! Line-based `key = value` configuration with `[section]` headers.
//!
//! Defaults depend on the system, so `[system] name` is read before any
//! other key is applied. Unknown sections and keys are rejected.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::morse::Enclosure;
use crate::neural::TrainConfig;
use crate::systems::PendulumParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SystemKind {
    Pendulum,
    Bistable,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DataConfig {
    pub n_traj: usize,
    pub horizon: usize,
    pub tau: usize,
    /// Fraction of trajectories in the train split.
    pub train_ratio: f64,
    /// Fraction of the train split actually used for training.
    pub fraction: f64,
    /// Initial-state box; the whole system domain when empty.
    pub sampler_lower: Vec<f64>,
    pub sampler_upper: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalysisConfig {
    /// Latent grid has `2^grid_k` intervals per axis.
    pub grid_k: u32,
    /// Applications of the latent dynamics per map step.
    pub steps: usize,
    /// Fixed Lipschitz bound; estimated from samples when `None`.
    pub lipschitz: Option<f64>,
    pub lipschitz_mult: f64,
    pub lipschitz_samples: usize,
    /// Whether an estimated bound is taken per cell or as one global maximum.
    pub lipschitz_scope: LipschitzScope,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LipschitzScope {
    /// Each cell uses `max(1, estimate in that cell)`.
    #[default]
    Local,
    /// Every cell uses `max(1, largest estimate over all cells)`.
    Global,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Partition {
    /// `2^grid_k` intervals per axis over the system domain.
    Uniform,
    /// The 5 x 3 x ... x 3 partition of the bistable domain.
    Bistable,
    Explicit(Vec<Vec<f64>>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DirectConfig {
    pub partition: Partition,
    pub grid_k: u32,
    pub steps: usize,
    pub lipschitz: f64,
    pub enclosure: Enclosure,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub seed: u64,
    /// Worker threads; 0 means all available cores.
    pub workers: usize,
    pub system: SystemKind,
    pub pendulum: PendulumParams,
    pub bistable_dim: usize,
    pub data: DataConfig,
    pub train: TrainConfig,
    pub analysis: AnalysisConfig,
    pub direct: DirectConfig,
    /// Seeds per ablation row.
    pub eval_seeds: usize,
}

/// Breakpoints of the 5 x 3 x ... x 3 partition of the bistable domain.
pub fn bistable_partition(dim: usize) -> Vec<Vec<f64>> {
    let mut edges = vec![vec![-3.0, -2.0, -0.5, 0.5, 2.0, 3.0]];
    edges.extend((1..dim).map(|_| vec![-2.0, -0.5, 0.5, 2.0]));
    edges
}

impl Config {
    pub fn defaults(system: SystemKind) -> Self {
        let pendulum = PendulumParams::default();
        let bistable_dim = 12;
        let (data, direct) = match system {
            SystemKind::Pendulum => (
                DataConfig {
                    n_traj: 1280,
                    horizon: 1000,
                    tau: 50,
                    train_ratio: 0.8,
                    fraction: 1.0,
                    sampler_lower: vec![-PI, -4.0],
                    sampler_upper: vec![PI, 4.0],
                },
                DirectConfig {
                    partition: Partition::Uniform,
                    grid_k: 6,
                    steps: 1,
                    lipschitz: 1.0,
                    enclosure: Enclosure::Corners,
                },
            ),
            SystemKind::Bistable => (
                DataConfig {
                    n_traj: 6000,
                    horizon: 3,
                    tau: 1,
                    train_ratio: 0.8,
                    fraction: 1.0,
                    sampler_lower: Vec::new(),
                    sampler_upper: Vec::new(),
                },
                DirectConfig {
                    partition: Partition::Bistable,
                    grid_k: 4,
                    steps: 3,
                    lipschitz: 0.0,
                    enclosure: Enclosure::Hull,
                },
            ),
        };
        Self {
            seed: 0,
            workers: 0,
            system,
            pendulum,
            bistable_dim: if system == SystemKind::Bistable {
                bistable_dim
            } else {
                2
            },
            data,
            train: TrainConfig {
                shared_scale: system == SystemKind::Bistable,
                ..TrainConfig::default()
            },
            analysis: AnalysisConfig {
                grid_k: 6,
                steps: 5,
                lipschitz: None,
                lipschitz_mult: 1.0,
                lipschitz_samples: 8,
                lipschitz_scope: LipschitzScope::Local,
            },
            direct,
            eval_seeds: 3,
        }
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let entries = entries(text, path)?;
        let system = match entries
            .iter()
            .find(|e| e.section == "system" && e.key == "name")
        {
            Some(e) => {
                parse_system(&e.value).ok_or_else(|| Error::parse(path, "system.name", &e.value))?
            }
            None => SystemKind::Pendulum,
        };
        let mut cfg = Self::defaults(system);
        for e in &entries {
            if e.section == "system" && e.key == "name" {
                continue;
            }
            cfg.set(&e.section, &e.key, &e.value).map_err(|msg| {
                Error::parse(
                    path,
                    format!("{}.{} (line {})", e.section, e.key, e.line),
                    msg,
                )
            })?;
        }
        cfg.validate()
            .map_err(|e| Error::parse(path, "config", e.to_string()))?;
        Ok(cfg)
    }

    /// Applies one `section.key = value` assignment.
    pub fn set(
        &mut self,
        section: &str,
        key: &str,
        value: &str,
    ) -> std::result::Result<(), String> {
        let v = value.trim();
        match (section, key) {
            ("run", "seed") => self.seed = num(v)?,
            ("run", "workers") => self.workers = num(v)?,
            ("system", "name") => {
                let kind = parse_system(v).ok_or_else(|| format!("unknown system `{v}`"))?;
                if kind != self.system {
                    return Err("system.name cannot change after defaults are chosen".into());
                }
            }
            ("system", "dim") => self.bistable_dim = num(v)?,
            ("system", "mass") => self.pendulum.mass = num(v)?,
            ("system", "length") => self.pendulum.length = num(v)?,
            ("system", "gravity") => self.pendulum.gravity = num(v)?,
            ("system", "friction") => self.pendulum.friction = num(v)?,
            ("system", "torque_limit") => self.pendulum.torque_limit = num(v)?,
            ("system", "dt") => self.pendulum.dt = num(v)?,
            ("system", "max_speed") => self.pendulum.max_speed = num(v)?,
            ("data", "n_traj") => self.data.n_traj = num(v)?,
            ("data", "horizon") => self.data.horizon = num(v)?,
            ("data", "tau") => self.data.tau = num(v)?,
            ("data", "train_ratio") => self.data.train_ratio = num(v)?,
            ("data", "fraction") => self.data.fraction = num(v)?,
            ("data", "sampler_lower") => {
                self.data.sampler_lower = if v == "domain" { Vec::new() } else { list(v)? }
            }
            ("data", "sampler_upper") => {
                self.data.sampler_upper = if v == "domain" { Vec::new() } else { list(v)? }
            }
            ("train", "latent_dim") => self.train.latent_dim = num(v)?,
            ("train", "hidden") => self.train.hidden = list(v)?,
            ("train", "batch_size") => self.train.batch_size = num(v)?,
            ("train", "epochs") => self.train.epochs = num(v)?,
            ("train", "learning_rate") => self.train.learning_rate = num(v)?,
            ("train", "final_lr_fraction") => self.train.final_lr_fraction = num(v)?,
            ("train", "normalization") => {
                self.train.shared_scale = match v {
                    "per_axis" => false,
                    "shared" => true,
                    _ => return Err(format!("expected `per_axis` or `shared`, got `{v}`")),
                }
            }
            ("train", "lambda1") => self.train.weights.reconstruction = num(v)?,
            ("train", "lambda2") => self.train.weights.image_reconstruction = num(v)?,
            ("train", "lambda3") => self.train.weights.dynamics = num(v)?,
            ("train", "lambda4") => self.train.weights.separation = num(v)?,
            ("train", "sigmoid_scale") => self.train.weights.sigmoid_scale = num(v)?,
            ("train", "l4") => self.train.use_separation = on_off(v)?,
            ("train", "restarts") => self.train.restarts = num(v)?,
            ("analysis", "grid_k") => self.analysis.grid_k = num(v)?,
            ("analysis", "steps") => self.analysis.steps = num(v)?,
            ("analysis", "lipschitz") => {
                self.analysis.lipschitz = if v == "auto" { None } else { Some(num(v)?) }
            }
            ("analysis", "lipschitz_mult") => self.analysis.lipschitz_mult = num(v)?,
            ("analysis", "lipschitz_samples") => self.analysis.lipschitz_samples = num(v)?,
            ("analysis", "lipschitz_scope") => {
                self.analysis.lipschitz_scope = match v {
                    "local" => LipschitzScope::Local,
                    "global" => LipschitzScope::Global,
                    _ => return Err(format!("expected `local` or `global`, got `{v}`")),
                }
            }
            ("direct", "grid_k") => self.direct.grid_k = num(v)?,
            ("direct", "steps") => self.direct.steps = num(v)?,
            ("direct", "lipschitz") => self.direct.lipschitz = num(v)?,
            ("direct", "enclosure") => {
                self.direct.enclosure = match v {
                    "corners" => Enclosure::Corners,
                    "hull" => Enclosure::Hull,
                    _ => return Err(format!("expected `corners` or `hull`, got `{v}`")),
                }
            }
            ("direct", "partition") => {
                self.direct.partition = match v {
                    "uniform" => Partition::Uniform,
                    "bistable" => Partition::Bistable,
                    "explicit" => Partition::Explicit(Vec::new()),
                    _ => {
                        return Err(format!(
                            "expected `uniform`, `bistable` or `explicit`, got `{v}`"
                        ))
                    }
                }
            }
            ("direct", k) if k.starts_with("edges_") => {
                let axis: usize = k["edges_".len()..]
                    .parse()
                    .map_err(|_| format!("bad axis in `{k}`"))?;
                let Partition::Explicit(edges) = &mut self.direct.partition else {
                    return Err("edges_* needs `partition = explicit` first".into());
                };
                if axis != edges.len() {
                    return Err(format!("expected edges_{} next", edges.len()));
                }
                edges.push(list(v)?);
            }
            ("eval", "seeds") => self.eval_seeds = num(v)?,
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.system == SystemKind::Pendulum {
            self.pendulum.validate()?;
        }
        if self.bistable_dim < 2 {
            return bad("system.dim must be >= 2".into());
        }
        let d = &self.data;
        let state_dim = match self.system {
            SystemKind::Pendulum => 2,
            SystemKind::Bistable => self.bistable_dim,
        };
        let domain_sampler = d.sampler_lower.is_empty() && d.sampler_upper.is_empty();
        if !domain_sampler
            && (d.sampler_lower.len() != state_dim || d.sampler_upper.len() != state_dim)
        {
            return bad(format!("sampler bounds need {state_dim} entries"));
        }
        if d.sampler_lower
            .iter()
            .zip(&d.sampler_upper)
            .any(|(a, b)| !(a <= b))
        {
            return bad("sampler_lower must not exceed sampler_upper".into());
        }
        if d.n_traj == 0 || d.tau == 0 || d.horizon == 0 || !d.horizon.is_multiple_of(d.tau) {
            return bad("need n_traj >= 1 and horizon a positive multiple of tau".into());
        }
        if !(d.train_ratio > 0.0 && d.train_ratio < 1.0) {
            return bad("train_ratio must lie in (0, 1)".into());
        }
        if !(d.fraction > 0.0 && d.fraction <= 1.0) {
            return bad("fraction must lie in (0, 1]".into());
        }
        self.train.validate()?;
        let obs_dim = match self.system {
            SystemKind::Pendulum => 4,
            SystemKind::Bistable => self.bistable_dim,
        };
        if self.train.latent_dim == 0 || self.train.latent_dim >= obs_dim {
            return bad(format!("latent_dim must lie in 1..{obs_dim}"));
        }
        let a = &self.analysis;
        if a.steps == 0 || a.lipschitz_samples < 2 || a.grid_k > 12 {
            return bad("analysis needs steps >= 1, lipschitz_samples >= 2, grid_k <= 12".into());
        }
        if a.lipschitz.is_some_and(|l| !(l.is_finite() && l > 0.0))
            || !(a.lipschitz_mult.is_finite() && a.lipschitz_mult > 0.0)
        {
            return bad("lipschitz and lipschitz_mult must be > 0".into());
        }
        let dr = &self.direct;
        if dr.steps == 0 || !(dr.lipschitz.is_finite() && dr.lipschitz >= 0.0) {
            return bad("direct needs steps >= 1 and lipschitz >= 0".into());
        }
        match &dr.partition {
            Partition::Explicit(e) if e.len() != state_dim => {
                return bad(format!(
                    "direct partition needs {state_dim} axes, found {}",
                    e.len()
                ))
            }
            Partition::Bistable if self.system != SystemKind::Bistable => {
                return bad("the bistable partition needs the bistable system".into())
            }
            _ => {}
        }
        if self.eval_seeds == 0 {
            return bad("eval.seeds must be >= 1".into());
        }
        Ok(())
    }

    /// Text form that parses back to an identical config.
    pub fn to_text(&self) -> String {
        let f = |x: f64| format!("{x:?}");
        let fl = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x:?}"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        let mut s = String::new();
        let w = &mut s;
        writeln!(
            w,
            "[run]\nseed = {}\nworkers = {}\n",
            self.seed, self.workers
        )
        .unwrap();
        let p = &self.pendulum;
        writeln!(
            w,
            "[system]\nname = {}\ndim = {}\nmass = {}\nlength = {}\ngravity = {}\nfriction = {}\ntorque_limit = {}\ndt = {}\nmax_speed = {}\n",
            match self.system {
                SystemKind::Pendulum => "pendulum",
                SystemKind::Bistable => "bistable",
            },
            self.bistable_dim,
            f(p.mass),
            f(p.length),
            f(p.gravity),
            f(p.friction),
            f(p.torque_limit),
            f(p.dt),
            f(p.max_speed)
        )
        .unwrap();
        let d = &self.data;
        writeln!(
            w,
            "[data]\nn_traj = {}\nhorizon = {}\ntau = {}\ntrain_ratio = {}\nfraction = {}\nsampler_lower = {}\nsampler_upper = {}\n",
            d.n_traj,
            d.horizon,
            d.tau,
            f(d.train_ratio),
            f(d.fraction),
            if d.sampler_lower.is_empty() { "domain".into() } else { fl(&d.sampler_lower) },
            if d.sampler_upper.is_empty() { "domain".into() } else { fl(&d.sampler_upper) }
        )
        .unwrap();
        let t = &self.train;
        writeln!(
            w,
            "[train]\nlatent_dim = {}\nhidden = {}\nbatch_size = {}\nepochs = {}\nlearning_rate = {}\nfinal_lr_fraction = {}\nlambda1 = {}\nlambda2 = {}\nlambda3 = {}\nlambda4 = {}\nsigmoid_scale = {}\nl4 = {}\nnormalization = {}\nrestarts = {}\n",
            t.latent_dim,
            t.hidden.iter().map(usize::to_string).collect::<Vec<_>>().join(", "),
            t.batch_size,
            t.epochs,
            f(t.learning_rate),
            f(t.final_lr_fraction),
            f(t.weights.reconstruction),
            f(t.weights.image_reconstruction),
            f(t.weights.dynamics),
            f(t.weights.separation),
            f(t.weights.sigmoid_scale),
            if t.use_separation { "on" } else { "off" },
            if t.shared_scale { "shared" } else { "per_axis" },
            t.restarts
        )
        .unwrap();
        let a = &self.analysis;
        writeln!(
            w,
            "[analysis]\ngrid_k = {}\nsteps = {}\nlipschitz = {}\nlipschitz_mult = {}\nlipschitz_samples = {}\nlipschitz_scope = {}\n",
            a.grid_k,
            a.steps,
            a.lipschitz.map_or("auto".into(), f),
            f(a.lipschitz_mult),
            a.lipschitz_samples,
            match a.lipschitz_scope {
                LipschitzScope::Local => "local",
                LipschitzScope::Global => "global",
            }
        )
        .unwrap();
        let dr = &self.direct;
        writeln!(
            w,
            "[direct]\npartition = {}\ngrid_k = {}\nsteps = {}\nlipschitz = {}\nenclosure = {}",
            match dr.partition {
                Partition::Uniform => "uniform",
                Partition::Bistable => "bistable",
                Partition::Explicit(_) => "explicit",
            },
            dr.grid_k,
            dr.steps,
            f(dr.lipschitz),
            match dr.enclosure {
                Enclosure::Corners => "corners",
                Enclosure::Hull => "hull",
            }
        )
        .unwrap();
        if let Partition::Explicit(edges) = &dr.partition {
            for (i, e) in edges.iter().enumerate() {
                writeln!(w, "edges_{i} = {}", fl(e)).unwrap();
            }
        }
        writeln!(w, "\n[eval]\nseeds = {}", self.eval_seeds).unwrap();
        s
    }
}

fn parse_system(v: &str) -> Option<SystemKind> {
    match v.trim() {
        "pendulum" => Some(SystemKind::Pendulum),
        "bistable" => Some(SystemKind::Bistable),
        _ => None,
    }
}

fn num<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse().map_err(|_| format!("cannot parse `{v}`"))
}

fn list<T: std::str::FromStr>(v: &str) -> std::result::Result<Vec<T>, String> {
    v.split(',').map(|t| num(t.trim())).collect()
}

fn on_off(v: &str) -> std::result::Result<bool, String> {
    match v {
        "on" | "true" => Ok(true),
        "off" | "false" => Ok(false),
        _ => Err(format!("expected `on` or `off`, got `{v}`")),
    }
}

struct Entry {
    section: String,
    key: String,
    value: String,
    line: usize,
}

fn entries(text: &str, path: &Path) -> Result<Vec<Entry>> {
    let mut section = String::new();
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = name.trim().to_string();
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::parse(path, format!("line {}", i + 1), "expected `key = value`")
        })?;
        if section.is_empty() {
            return Err(Error::parse(
                path,
                format!("line {}", i + 1),
                "key outside of a [section]",
            ));
        }
        out.push(Entry {
            section: section.clone(),
            key: key.trim().to_string(),
            value: value.trim().to_string(),
            line: i + 1,
        });
    }
    Ok(out)
}
