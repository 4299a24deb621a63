//! End-to-end runs: data collection, training with restarts, latent and
//! direct Morse analysis, scoring and ablations.

use rayon::prelude::*;

use crate::config::{bistable_partition, Config, LipschitzScope, Partition, SystemKind};
use crate::dataset::{
    collect, CollectConfig, Label, SuccessPredicate, TrajectoryDataset, UniformBox,
};
use crate::error::{Error, Result};
use crate::eval::{score, AblationRow, Metrics};
use crate::grid::CubicalGrid;
use crate::morse::{
    build_map, build_map_with_bounds, estimate_cell_lipschitz, retract_avoiding, BistableGraph,
    CellAnalysis, Enclosure, MapParams,
};
use crate::neural::{train, AutoencoderModel, EpochLosses, TrainConfig};
use crate::systems::{propagate, Bistable, Dynamics, Pendulum, System};

pub fn make_system(cfg: &Config) -> Result<System> {
    Ok(match cfg.system {
        SystemKind::Pendulum => System::Pendulum(Pendulum::with_default_lqr(cfg.pendulum.clone())?),
        SystemKind::Bistable => System::Bistable(Bistable::new(cfg.bistable_dim)?),
    })
}

pub fn success_predicate(cfg: &Config) -> SuccessPredicate {
    match cfg.system {
        SystemKind::Pendulum => SuccessPredicate::PendulumUpright {
            length: cfg.pendulum.length,
        },
        SystemKind::Bistable => SuccessPredicate::PositiveFirstAxis,
    }
}

pub fn collect_config(cfg: &Config, system: &System) -> CollectConfig {
    let d = &cfg.data;
    let sampler = if d.sampler_lower.is_empty() {
        UniformBox {
            lower: system.domain().lower().to_vec(),
            upper: system.domain().upper().to_vec(),
        }
    } else {
        UniformBox {
            lower: d.sampler_lower.clone(),
            upper: d.sampler_upper.clone(),
        }
    };
    CollectConfig {
        n_traj: d.n_traj,
        horizon: d.horizon,
        tau: d.tau,
        sampler,
        success: success_predicate(cfg),
        seed: cfg.seed,
    }
}

/// Collects `n_traj` rollouts and splits them by `train_ratio`.
pub fn generate(cfg: &Config) -> Result<(TrajectoryDataset, TrajectoryDataset)> {
    let system = make_system(cfg)?;
    let all = collect(&system, &collect_config(cfg, &system))?;
    if all.len() < 2 {
        return Ok((
            all,
            TrajectoryDataset {
                dim: system.observation_dim(),
                trajectories: Vec::new(),
            },
        ));
    }
    all.split(cfg.data.train_ratio, cfg.seed)
}

/// The part of the train split used for training.
pub fn training_subset(cfg: &Config, train_set: &TrajectoryDataset) -> Result<TrajectoryDataset> {
    if cfg.data.fraction >= 1.0 {
        Ok(train_set.clone())
    } else {
        train_set.subset(cfg.data.fraction, cfg.seed)
    }
}

pub fn train_config(cfg: &Config, seed: u64) -> TrainConfig {
    TrainConfig {
        seed,
        ..cfg.train.clone()
    }
}

/// Latent grid, map and decomposition for one trained model.
#[derive(Debug)]
pub struct LatentAnalysis {
    pub analysis: CellAnalysis,
    pub lipschitz_estimate: f64,
    pub bistable: Result<BistableGraph>,
}

impl LatentAnalysis {
    /// At least two attractors besides the out-of-domain node, and a desired one.
    pub fn is_acceptable(&self) -> std::result::Result<(), String> {
        let n = self.analysis.attractors().len();
        if n < 2 {
            return Err(Error::TooFewAttractors { found: n }.to_string());
        }
        self.bistable
            .as_ref()
            .map(|_| ())
            .map_err(|e| e.to_string())
    }

    /// Success prediction for an original-space state; always false without a
    /// desired attractor.
    pub fn predict(&self, model: &AutoencoderModel, x: &[f64]) -> bool {
        let Ok(b) = &self.bistable else {
            return false;
        };
        model
            .encode(x)
            .map(|z| self.analysis.classify_point(b, &z).is_success())
            .unwrap_or(false)
    }
}

/// One-step latent map that turns evaluation errors into NaN images.
pub fn latent_step(model: &AutoencoderModel) -> impl Fn(&[f64]) -> Vec<f64> + Sync + '_ {
    move |z: &[f64]| {
        model
            .latent_step(z)
            .unwrap_or_else(|_| vec![f64::NAN; model.latent_dim])
    }
}

/// Grid over `[-1, 1]^D` validated by the encoded training states.
pub fn latent_grid(
    model: &AutoencoderModel,
    train_set: &TrajectoryDataset,
    grid_k: u32,
) -> Result<CubicalGrid> {
    let mut grid = CubicalGrid::latent(&vec![grid_k; model.latent_dim])?;
    let states: Vec<&[f64]> = train_set.all_states().collect();
    let z = model.encode_many(&states)?;
    let v = grid.validate(z.iter_rows());
    if v.degenerate {
        return Err(Error::InvalidInput(
            "no encoded training state falls inside the latent box".into(),
        ));
    }
    Ok(grid)
}

/// Lipschitz bound actually used: the configured value, or `max(1, estimate)`,
/// times the multiplier.
pub fn lipschitz_bound(cfg: &Config, estimate: f64) -> f64 {
    cfg.analysis.lipschitz.unwrap_or(estimate.max(1.0)) * cfg.analysis.lipschitz_mult
}

/// Bound for each valid cell given per-cell estimates. A fixed configured
/// bound or the global scope gives every cell the same value.
pub fn cell_bounds(cfg: &Config, per_cell: &[f64]) -> Vec<f64> {
    let global = per_cell.iter().copied().fold(0.0, f64::max);
    match (cfg.analysis.lipschitz, cfg.analysis.lipschitz_scope) {
        (None, LipschitzScope::Local) => per_cell
            .iter()
            .map(|e| e.max(1.0) * cfg.analysis.lipschitz_mult)
            .collect(),
        _ => vec![lipschitz_bound(cfg, global); per_cell.len()],
    }
}

pub fn analyze_latent(
    model: &AutoencoderModel,
    train_set: &TrajectoryDataset,
    cfg: &Config,
) -> Result<LatentAnalysis> {
    let grid = latent_grid(model, train_set, cfg.analysis.grid_k)?;
    analyze_latent_on(model, train_set, cfg, grid)
}

/// As [`analyze_latent`] on an already validated grid.
pub fn analyze_latent_on(
    model: &AutoencoderModel,
    train_set: &TrajectoryDataset,
    cfg: &Config,
    grid: CubicalGrid,
) -> Result<LatentAnalysis> {
    let step = latent_step(model);
    let a = &cfg.analysis;
    let per_cell = estimate_cell_lipschitz(&grid, &step, a.steps, a.lipschitz_samples, cfg.seed)?;
    let lipschitz_estimate = per_cell.iter().copied().fold(0.0, f64::max);
    let bounds = cell_bounds(cfg, &per_cell);
    let params = MapParams {
        lipschitz: bounds.iter().copied().fold(0.0, f64::max),
        steps: a.steps,
        enclosure: Enclosure::Corners,
    };
    let analysis = CellAnalysis::new(build_map_with_bounds(&grid, &step, params, &bounds)?);
    let finals = train_set.finals(Label::Success);
    let z = model.encode_many(&finals)?;
    let success: Vec<usize> = z
        .iter_rows()
        .filter_map(|z| analysis.map.vertex_of_point(z))
        .collect();
    let bistable = retract_avoiding(
        &analysis.decomposition,
        success,
        analysis.out_of_domain_node(),
    );
    Ok(LatentAnalysis {
        analysis,
        lipschitz_estimate,
        bistable,
    })
}

#[derive(Debug)]
pub struct PipelineRun {
    pub model: AutoencoderModel,
    pub history: Vec<EpochLosses>,
    pub latent: LatentAnalysis,
    /// Seed of the accepted attempt.
    pub seed: u64,
    pub attempts: usize,
}

/// Trains and analyzes, retraining with `seed + 1, seed + 2, ...` while
/// the analysis finds fewer than two attractors or no desired one.
pub fn train_and_analyze(
    train_set: &TrajectoryDataset,
    cfg: &Config,
    seed: u64,
) -> Result<PipelineRun> {
    let mut last = String::new();
    let budget = cfg.train.restarts + 1;
    for attempt in 0..budget {
        let s = seed + attempt as u64;
        let outcome = match train(train_set, &train_config(cfg, s)) {
            Ok(o) => o,
            Err(e @ Error::Diverged { .. }) => {
                last = e.to_string();
                continue;
            }
            Err(e) => return Err(e),
        };
        let latent = match analyze_latent(&outcome.model, train_set, cfg) {
            Ok(l) => l,
            Err(e @ Error::InvalidInput(_)) => {
                last = e.to_string();
                continue;
            }
            Err(e) => return Err(e),
        };
        match latent.is_acceptable() {
            Ok(()) => {
                return Ok(PipelineRun {
                    model: outcome.model,
                    history: outcome.history,
                    latent,
                    seed: s,
                    attempts: attempt + 1,
                })
            }
            Err(reason) => last = reason,
        }
    }
    Err(Error::RestartsExhausted {
        attempts: budget,
        last,
    })
}

pub fn score_run(
    model: &AutoencoderModel,
    latent: &LatentAnalysis,
    set: &TrajectoryDataset,
) -> Metrics {
    score(|x| latent.predict(model, x), set)
}

/// Grid for the direct analysis in the system's own coordinates.
pub fn direct_grid(cfg: &Config, system: &System) -> Result<CubicalGrid> {
    let dim = system.state_dim();
    match &cfg.direct.partition {
        Partition::Uniform => CubicalGrid::uniform(system.domain(), &vec![cfg.direct.grid_k; dim]),
        Partition::Bistable => CubicalGrid::from_edges(bistable_partition(dim)),
        Partition::Explicit(e) => CubicalGrid::from_edges(e.clone()),
    }
}

#[derive(Debug)]
pub struct DirectAnalysis {
    pub analysis: CellAnalysis,
    /// Split by cells whose center satisfies the success predicate.
    pub bistable: Result<BistableGraph>,
}

/// Morse analysis of the true system map over `data.tau` integrator steps,
/// applied `direct.steps` times, with every cell valid.
pub fn analyze_direct(cfg: &Config) -> Result<DirectAnalysis> {
    let system = make_system(cfg)?;
    let grid = direct_grid(cfg, &system)?;
    let tau = cfg.data.tau;
    let step = |x: &[f64]| match propagate(&system, x, tau) {
        Ok(p) => p.state,
        Err(_) => vec![f64::NAN; x.len()],
    };
    let params = MapParams {
        lipschitz: cfg.direct.lipschitz,
        steps: cfg.direct.steps,
        enclosure: cfg.direct.enclosure,
    };
    let analysis = CellAnalysis::new(build_map(&grid, &step, params)?);
    let predicate = success_predicate(cfg);
    let success: Vec<usize> = (0..grid.num_cells())
        .filter(|&c| {
            let (lo, hi) = grid.cell_bounds(c);
            let center: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
            predicate.evaluate(&system.observe(&center)).is_success()
        })
        .filter_map(|c| analysis.map.vertex_of(c))
        .collect();
    let bistable = retract_avoiding(
        &analysis.decomposition,
        success,
        analysis.out_of_domain_node(),
    );
    Ok(DirectAnalysis { analysis, bistable })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AblationAxis {
    Fraction,
    Lipschitz,
    L4,
    LatentDim,
}

impl AblationAxis {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "fraction" => Self::Fraction,
            "lipschitz" => Self::Lipschitz,
            "l4" => Self::L4,
            "latent_dim" => Self::LatentDim,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Fraction => "fraction",
            Self::Lipschitz => "lipschitz",
            Self::L4 => "l4",
            Self::LatentDim => "latent_dim",
        }
    }

    pub fn settings(self) -> &'static [&'static str] {
        match self {
            Self::Fraction => &["0.1", "0.5", "1"],
            Self::Lipschitz => &["1", "2", "4"],
            Self::L4 => &["on", "off"],
            Self::LatentDim => &["1", "2"],
        }
    }

    pub const ALL: [AblationAxis; 4] = [Self::Fraction, Self::Lipschitz, Self::L4, Self::LatentDim];
}

/// Seeds tried for each ablation row, spaced past the restart budget.
pub fn ablation_seeds(cfg: &Config) -> Vec<u64> {
    let stride = cfg.train.restarts as u64 + 1;
    (0..cfg.eval_seeds as u64)
        .map(|i| cfg.seed + i * stride)
        .collect()
}

/// Train-split and test-split metrics of one seed.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedResult {
    pub seed: u64,
    pub train: Metrics,
    pub test: Metrics,
}

/// Runs the pipeline for every seed of one setting, returning per-seed
/// results (or errors).
pub fn run_seeds(
    cfg: &Config,
    train_set: &TrajectoryDataset,
    test_set: &TrajectoryDataset,
) -> Vec<std::result::Result<SeedResult, String>> {
    ablation_seeds(cfg)
        .par_iter()
        .map(|&seed| {
            let mut c = cfg.clone();
            c.seed = seed;
            let subset = training_subset(&c, train_set).map_err(|e| e.to_string())?;
            let run = train_and_analyze(&subset, &c, seed).map_err(|e| e.to_string())?;
            Ok(SeedResult {
                seed: run.seed,
                train: score_run(&run.model, &run.latent, train_set),
                test: score_run(&run.model, &run.latent, test_set),
            })
        })
        .collect()
}

/// Highest train-split F; ties go to the earlier seed.
pub fn best_by_train_f(
    results: &[std::result::Result<SeedResult, String>],
) -> std::result::Result<SeedResult, String> {
    let mut best: Option<&SeedResult> = None;
    for r in results.iter().flatten() {
        if best.is_none_or(|b| r.train.f_score > b.train.f_score) {
            best = Some(r);
        }
    }
    best.cloned().ok_or_else(|| {
        results
            .iter()
            .filter_map(|r| r.as_ref().err().cloned())
            .next_back()
            .unwrap_or_else(|| "no seeds".into())
    })
}

fn row(
    axis: AblationAxis,
    setting: &str,
    best: std::result::Result<SeedResult, String>,
    n_test: usize,
) -> AblationRow {
    AblationRow {
        axis: axis.name().into(),
        setting: setting.into(),
        seed: best.as_ref().map_or(0, |b| b.seed),
        outcome: best.map(|b| b.test),
        n_test,
    }
}

/// One row per setting of `axis`, each the best of `eval_seeds` seeds by
/// train-split F. Lipschitz settings reuse the model trained at the base
/// setting for each seed.
pub fn ablate(
    cfg: &Config,
    axis: AblationAxis,
    train_set: &TrajectoryDataset,
    test_set: &TrajectoryDataset,
) -> Vec<AblationRow> {
    let n_test = test_set.len();
    if axis == AblationAxis::Lipschitz {
        return ablate_lipschitz(cfg, train_set, test_set);
    }
    axis.settings()
        .iter()
        .map(|&setting| {
            let mut c = cfg.clone();
            match axis {
                AblationAxis::Fraction => c.data.fraction = setting.parse().unwrap(),
                AblationAxis::L4 => c.train.use_separation = setting == "on",
                AblationAxis::LatentDim => c.train.latent_dim = setting.parse().unwrap(),
                AblationAxis::Lipschitz => unreachable!(),
            }
            let best = c
                .validate()
                .map_err(|e| e.to_string())
                .and_then(|()| best_by_train_f(&run_seeds(&c, train_set, test_set)));
            row(axis, setting, best, n_test)
        })
        .collect()
}

/// Per-seed results for each Lipschitz multiplier on one trained model per seed.
pub fn lipschitz_sweep(
    cfg: &Config,
    multipliers: &[f64],
    train_set: &TrajectoryDataset,
    test_set: &TrajectoryDataset,
) -> Vec<Vec<std::result::Result<SeedResult, String>>> {
    let per_seed: Vec<Vec<std::result::Result<SeedResult, String>>> = ablation_seeds(cfg)
        .par_iter()
        .map(|&seed| {
            let mut c = cfg.clone();
            c.seed = seed;
            let run = training_subset(&c, train_set)
                .and_then(|s| train_and_analyze(&s, &c, seed).map(|r| (r, s)));
            multipliers
                .iter()
                .map(|&m| {
                    let (run, subset) = run.as_ref().map_err(|e| e.to_string())?;
                    let mut cm = c.clone();
                    cm.analysis.lipschitz_mult = cfg.analysis.lipschitz_mult * m;
                    let latent =
                        analyze_latent(&run.model, subset, &cm).map_err(|e| e.to_string())?;
                    Ok(SeedResult {
                        seed: run.seed,
                        train: score_run(&run.model, &latent, train_set),
                        test: score_run(&run.model, &latent, test_set),
                    })
                })
                .collect()
        })
        .collect();
    (0..multipliers.len())
        .map(|i| per_seed.iter().map(|s| s[i].clone()).collect())
        .collect()
}

fn ablate_lipschitz(
    cfg: &Config,
    train_set: &TrajectoryDataset,
    test_set: &TrajectoryDataset,
) -> Vec<AblationRow> {
    let settings = AblationAxis::Lipschitz.settings();
    let mults: Vec<f64> = settings.iter().map(|s| s.parse().unwrap()).collect();
    lipschitz_sweep(cfg, &mults, train_set, test_set)
        .into_iter()
        .zip(settings)
        .map(|(results, setting)| {
            row(
                AblationAxis::Lipschitz,
                setting,
                best_by_train_f(&results),
                test_set.len(),
            )
        })
        .collect()
}
