//! Labeled trajectory datasets: rollouts, `(x, Im(x))` windowing, splits and CSV I/O.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::systems::{propagate, Dynamics};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Failure = 0,
    Success = 1,
}

impl Label {
    pub fn from_bool(success: bool) -> Self {
        if success {
            Label::Success
        } else {
            Label::Failure
        }
    }

    pub fn is_success(self) -> bool {
        self == Label::Success
    }
}

/// One rollout, stored every `tau` steps in observation coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub id: usize,
    pub states: Vec<Vec<f64>>,
    pub label: Label,
}

impl Trajectory {
    pub fn initial(&self) -> &[f64] {
        &self.states[0]
    }

    pub fn last(&self) -> &[f64] {
        self.states
            .last()
            .expect("trajectory has at least two states")
    }
}

/// Consecutive-state pairs of a trajectory.
pub fn window(traj: &Trajectory) -> Vec<(&[f64], &[f64])> {
    traj.states
        .windows(2)
        .map(|w| (w[0].as_slice(), w[1].as_slice()))
        .collect()
}

/// Predicate labelling the final observation of a rollout.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SuccessPredicate {
    /// Near-upright and near-rest pendulum with the given pole length.
    PendulumUpright { length: f64 },
    /// First coordinate strictly positive.
    PositiveFirstAxis,
}

impl SuccessPredicate {
    pub fn evaluate(&self, obs: &[f64]) -> Label {
        match *self {
            SuccessPredicate::PendulumUpright { length } => pendulum_success(obs, length),
            SuccessPredicate::PositiveFirstAxis => Label::from_bool(obs[0] > 0.0),
        }
    }
}

/// Success iff `y > 0.995 l`, `|x_dot| < 0.5` and `|y_dot| < 0.5`.
pub fn pendulum_success(obs: &[f64], length: f64) -> Label {
    Label::from_bool(obs[1] > 0.995 * length && obs[2].abs() < 0.5 && obs[3].abs() < 0.5)
}

/// Uniform sampler over a box of internal states.
#[derive(Clone, Debug, PartialEq)]
pub struct UniformBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl UniformBox {
    fn sample(&self, rng: &mut impl Rng) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&lo, &hi)| if lo < hi { rng.gen_range(lo..hi) } else { lo })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CollectConfig {
    pub n_traj: usize,
    /// Integrator steps per rollout; must be a multiple of `tau`.
    pub horizon: usize,
    /// Integrator steps between stored states.
    pub tau: usize,
    pub sampler: UniformBox,
    pub success: SuccessPredicate,
    pub seed: u64,
}

const MAX_RESAMPLES: usize = 1000;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrajectoryDataset {
    pub dim: usize,
    pub trajectories: Vec<Trajectory>,
}

/// Rolls out `n_traj` trajectories. Each trajectory draws its initial state
/// from its own RNG stream, so the result does not depend on how rayon
/// schedules the rollouts.
pub fn collect<S: Dynamics + ?Sized>(system: &S, cfg: &CollectConfig) -> Result<TrajectoryDataset> {
    if cfg.n_traj == 0 {
        return Err(Error::InvalidInput("n_traj must be >= 1".into()));
    }
    if cfg.tau == 0 || cfg.horizon == 0 || !cfg.horizon.is_multiple_of(cfg.tau) {
        return Err(Error::InvalidInput(format!(
            "horizon {} must be a positive multiple of tau {}",
            cfg.horizon, cfg.tau
        )));
    }
    if cfg.sampler.lower.len() != system.state_dim()
        || cfg.sampler.upper.len() != system.state_dim()
    {
        return Err(Error::DimensionMismatch {
            expected: system.state_dim(),
            found: cfg.sampler.lower.len(),
        });
    }
    let strides = cfg.horizon / cfg.tau;
    let trajectories = (0..cfg.n_traj)
        .into_par_iter()
        .map(|id| rollout(system, cfg, id, strides))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrajectoryDataset {
        dim: system.observation_dim(),
        trajectories,
    })
}

fn rollout<S: Dynamics + ?Sized>(
    system: &S,
    cfg: &CollectConfig,
    id: usize,
    strides: usize,
) -> Result<Trajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(id as u64);
    for _ in 0..MAX_RESAMPLES {
        let x0 = cfg.sampler.sample(&mut rng);
        if !system.domain().contains(&x0) {
            continue;
        }
        let mut internal = x0;
        let mut states = vec![system.observe(&internal)];
        for _ in 0..strides {
            let out = propagate(system, &internal, cfg.tau)?;
            if out.left_domain {
                break;
            }
            internal = out.state;
            states.push(system.observe(&internal));
        }
        if states.len() < 2 {
            continue;
        }
        let label = cfg.success.evaluate(states.last().unwrap());
        return Ok(Trajectory { id, states, label });
    }
    Err(Error::Sampling(format!(
        "trajectory {id}: no usable initial state after {MAX_RESAMPLES} draws"
    )))
}

impl TrajectoryDataset {
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn num_pairs(&self) -> usize {
        self.trajectories.iter().map(|t| t.states.len() - 1).sum()
    }

    /// All `(x, Im(x))` pairs in trajectory order.
    pub fn pairs(&self) -> Vec<(&[f64], &[f64])> {
        self.trajectories.iter().flat_map(window).collect()
    }

    pub fn all_states(&self) -> impl Iterator<Item = &[f64]> {
        self.trajectories
            .iter()
            .flat_map(|t| t.states.iter().map(Vec::as_slice))
    }

    pub fn finals(&self, label: Label) -> Vec<&[f64]> {
        self.trajectories
            .iter()
            .filter(|t| t.label == label)
            .map(Trajectory::last)
            .collect()
    }

    pub fn success_rate(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let s = self
            .trajectories
            .iter()
            .filter(|t| t.label.is_success())
            .count();
        s as f64 / self.len() as f64
    }

    /// Random split by whole trajectories; `ratio` is the train share.
    pub fn split(&self, ratio: f64, seed: u64) -> Result<(TrajectoryDataset, TrajectoryDataset)> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::InvalidInput(format!(
                "split ratio {ratio} not in (0, 1)"
            )));
        }
        let n = self.len();
        if n < 2 {
            return Err(Error::InvalidInput(format!(
                "cannot split {n} trajectories into two nonempty parts"
            )));
        }
        let n_train = ((n as f64 * ratio).round() as usize).clamp(1, n - 1);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut train_idx = order[..n_train].to_vec();
        let mut test_idx = order[n_train..].to_vec();
        train_idx.sort_unstable();
        test_idx.sort_unstable();
        Ok((self.select(&train_idx), self.select(&test_idx)))
    }

    /// Seeded random subset with `round(fraction * len)` trajectories (at least one).
    pub fn subset(&self, fraction: f64, seed: u64) -> Result<TrajectoryDataset> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "fraction {fraction} not in (0, 1]"
            )));
        }
        let n = self.len();
        let k = ((n as f64 * fraction).round() as usize).clamp(1, n.max(1));
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut idx = order[..k.min(n)].to_vec();
        idx.sort_unstable();
        Ok(self.select(&idx))
    }

    fn select(&self, idx: &[usize]) -> TrajectoryDataset {
        TrajectoryDataset {
            dim: self.dim,
            trajectories: idx.iter().map(|&i| self.trajectories[i].clone()).collect(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("traj_id,step,label");
        for i in 0..self.dim {
            write!(out, ",x_{i}").unwrap();
        }
        out.push('\n');
        let mut trajs: Vec<&Trajectory> = self.trajectories.iter().collect();
        trajs.sort_by_key(|t| t.id);
        for t in trajs {
            for (step, s) in t.states.iter().enumerate() {
                write!(out, "{},{},{}", t.id, step, t.label as u8).unwrap();
                for v in s {
                    write!(out, ",{v:.16e}").unwrap();
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv())
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::parse_csv(&text, path)
    }

    pub fn parse_csv(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse(path, "header", "empty file"))?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.len() < 4 || cols[..3] != ["traj_id", "step", "label"] {
            return Err(Error::parse(
                path,
                "header",
                format!("unexpected header `{header}`"),
            ));
        }
        let dim = cols.len() - 3;
        for (i, c) in cols[3..].iter().enumerate() {
            if *c != format!("x_{i}") {
                return Err(Error::parse(
                    path,
                    "header",
                    format!("column {} is `{c}`", i + 3),
                ));
            }
        }
        let mut trajectories: Vec<Trajectory> = Vec::new();
        for (lineno, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let row = lineno + 2;
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != dim + 3 {
                return Err(Error::parse(
                    path,
                    format!("row {row}"),
                    format!("expected {} fields, found {}", dim + 3, fields.len()),
                ));
            }
            let id: usize = fields[0]
                .parse()
                .map_err(|_| Error::parse(path, format!("row {row}: traj_id"), fields[0]))?;
            let step: usize = fields[1]
                .parse()
                .map_err(|_| Error::parse(path, format!("row {row}: step"), fields[1]))?;
            let label = match fields[2] {
                "0" => Label::Failure,
                "1" => Label::Success,
                other => return Err(Error::parse(path, format!("row {row}: label"), other)),
            };
            let state = fields[3..]
                .iter()
                .enumerate()
                .map(|(i, f)| {
                    f.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| Error::parse(path, format!("row {row}: x_{i}"), *f))
                })
                .collect::<Result<Vec<f64>>>()?;
            match trajectories.last_mut() {
                Some(t) if t.id == id => {
                    if step != t.states.len() || label != t.label {
                        return Err(Error::parse(
                            path,
                            format!("row {row}"),
                            "step out of order or label changes within a trajectory",
                        ));
                    }
                    t.states.push(state);
                }
                last => {
                    if last.is_some_and(|t| t.id >= id) || step != 0 {
                        return Err(Error::parse(
                            path,
                            format!("row {row}: traj_id"),
                            "rows not sorted by (traj_id, step)",
                        ));
                    }
                    trajectories.push(Trajectory {
                        id,
                        states: vec![state],
                        label,
                    });
                }
            }
        }
        if let Some(t) = trajectories.iter().find(|t| t.states.len() < 2) {
            return Err(Error::parse(
                path,
                format!("traj_id {}", t.id),
                "trajectory has fewer than 2 states",
            ));
        }
        Ok(Self { dim, trajectories })
    }
}
