//! Benchmark controlled dynamical systems.
//!
//! Every system exposes a fixed-step map on its internal state. Composing that
//! map `tau` times gives the time-`tau` image used for data collection and for
//! direct (non-latent) Morse analysis.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix3, RowVector2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box `[lower_i, upper_i]` in `R^N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::InvalidInput(format!(
                "box bounds have lengths {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(Error::InvalidInput(format!(
                    "axis {i}: bounds [{lo}, {hi}] are not a finite nonempty interval"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MapKind {
    ContinuousOde,
    DiscreteMap,
}

/// Shared interface of the benchmark systems.
pub trait Dynamics: Sync {
    fn state_dim(&self) -> usize;

    fn domain(&self) -> &BoxDomain;

    fn map_kind(&self) -> MapKind;

    /// One fixed step of the closed-loop dynamics.
    fn step(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// Observation of an internal state. Identity unless overridden.
    fn observe(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }

    fn observation_dim(&self) -> usize {
        self.state_dim()
    }
}

/// Result of composing a system's step map.
#[derive(Clone, Debug, PartialEq)]
pub struct Propagation {
    pub state: Vec<f64>,
    /// Number of steps actually taken.
    pub steps: usize,
    /// Set when the trajectory left the domain; `state` is then the last in-domain state.
    pub left_domain: bool,
}

/// Composes `system.step` `tau` times starting from `x0`.
pub fn propagate<S: Dynamics + ?Sized>(system: &S, x0: &[f64], tau: usize) -> Result<Propagation> {
    if x0.len() != system.state_dim() {
        return Err(Error::DimensionMismatch {
            expected: system.state_dim(),
            found: x0.len(),
        });
    }
    let mut state = x0.to_vec();
    for steps in 0..tau {
        let next = system.step(&state)?;
        if !system.domain().contains(&next) {
            return Ok(Propagation {
                state,
                steps,
                left_domain: true,
            });
        }
        state = next;
    }
    Ok(Propagation {
        state,
        steps: tau,
        left_domain: false,
    })
}

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(2.0 * PI);
    if t > PI {
        t - 2.0 * PI
    } else {
        t
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PendulumParams {
    pub mass: f64,
    pub length: f64,
    pub gravity: f64,
    pub friction: f64,
    pub torque_limit: f64,
    pub dt: f64,
    /// Bound on |theta_dot| defining the domain box.
    pub max_speed: f64,
}

impl Default for PendulumParams {
    fn default() -> Self {
        Self {
            mass: 1.0,
            length: 1.0,
            gravity: 9.8,
            friction: 0.1,
            torque_limit: 2.0,
            dt: 0.01,
            max_speed: 4.0 * PI,
        }
    }
}

impl PendulumParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mass", self.mass),
            ("length", self.length),
            ("gravity", self.gravity),
            ("dt", self.dt),
            ("torque_limit", self.torque_limit),
            ("max_speed", self.max_speed),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "pendulum {name} must be > 0, got {v}"
                )));
            }
        }
        if !(self.friction.is_finite() && self.friction >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "pendulum friction must be >= 0, got {}",
                self.friction
            )));
        }
        Ok(())
    }

    fn inertia(&self) -> f64 {
        self.mass * self.length * self.length
    }

    /// Angular acceleration for a given applied torque.
    fn acceleration(&self, theta: f64, theta_dot: f64, torque: f64) -> f64 {
        (self.mass * self.gravity * self.length * theta.sin() - self.friction * theta_dot + torque)
            / self.inertia()
    }
}

/// State-feedback gain `u = -k . (theta, theta_dot)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LqrGain {
    pub k: [f64; 2],
}

impl LqrGain {
    pub const ZERO: LqrGain = LqrGain { k: [0.0, 0.0] };

    pub fn control(&self, theta: f64, theta_dot: f64) -> f64 {
        -(self.k[0] * theta + self.k[1] * theta_dot)
    }
}

/// Zero-order-hold discretization `(A_d, B_d)` of the pendulum linearized at upright.
pub fn discretize_upright(params: &PendulumParams) -> (Matrix2<f64>, Vector2<f64>) {
    let inertia = params.inertia();
    let a = Matrix2::new(
        0.0,
        1.0,
        params.gravity / params.length,
        -params.friction / inertia,
    );
    let b = Vector2::new(0.0, 1.0 / inertia);
    let mut aug = Matrix3::zeros();
    aug.fixed_view_mut::<2, 2>(0, 0).copy_from(&a);
    aug.fixed_view_mut::<2, 1>(0, 2).copy_from(&b);
    let e = (aug * params.dt).exp();
    let ad: Matrix2<f64> = e.fixed_view::<2, 2>(0, 0).into_owned();
    let bd: Vector2<f64> = e.fixed_view::<2, 1>(0, 2).into_owned();
    (ad, bd)
}

/// Discrete LQR gain for the upright equilibrium by fixed-point iteration of
/// the Riccati recursion.
pub fn lqr_synthesize(params: &PendulumParams, q: [[f64; 2]; 2], r: f64) -> Result<LqrGain> {
    params.validate()?;
    let q = Matrix2::new(q[0][0], q[0][1], q[1][0], q[1][1]);
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::InvalidInput(format!(
            "input cost must be > 0, got {r}"
        )));
    }
    let sym = (q - q.transpose()).norm();
    let eig = q.symmetric_eigenvalues();
    if sym > 1e-12 || eig.iter().any(|&l| l < -1e-12) {
        return Err(Error::InvalidInput(
            "state cost must be symmetric positive semidefinite".into(),
        ));
    }
    let (a, b) = discretize_upright(params);
    let mut p = q;
    const MAX_ITER: usize = 100_000;
    for _ in 0..MAX_ITER {
        let pb = p * b;
        let denom = r + (b.transpose() * pb)[0];
        let btpa: RowVector2<f64> = pb.transpose() * a;
        let next = q + a.transpose() * p * a - btpa.transpose() * btpa / denom;
        let change = (next - p).norm();
        let scale = next.norm();
        p = next;
        if change <= 1e-10 * scale || (change == 0.0 && scale == 0.0) {
            let pb = p * b;
            let denom = r + (b.transpose() * pb)[0];
            let k: RowVector2<f64> = (pb.transpose() * a) / denom;
            return Ok(LqrGain { k: [k[0], k[1]] });
        }
    }
    Err(Error::Synthesis(format!(
        "Riccati iteration did not converge within {MAX_ITER} iterations"
    )))
}

/// Spectral radius of the discrete closed loop `A_d - B_d k`.
pub fn closed_loop_spectral_radius(params: &PendulumParams, gain: &LqrGain) -> f64 {
    let (a, b) = discretize_upright(params);
    let cl = a - b * RowVector2::new(gain.k[0], gain.k[1]);
    cl.complex_eigenvalues()
        .iter()
        .map(|l| l.norm())
        .fold(0.0, f64::max)
}

/// Torque-limited pendulum under saturated linear state feedback.
///
/// Internal state is `(theta, theta_dot)` with `theta = 0` upright. The
/// control is held constant over each integrator step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pendulum {
    params: PendulumParams,
    gain: LqrGain,
    domain: BoxDomain,
}

impl Pendulum {
    pub fn new(params: PendulumParams, gain: LqrGain) -> Result<Self> {
        params.validate()?;
        if gain.k.iter().any(|k| !k.is_finite()) {
            return Err(Error::InvalidInput("gain has non-finite entries".into()));
        }
        let domain = BoxDomain::new(vec![-PI, -params.max_speed], vec![PI, params.max_speed])?;
        Ok(Self {
            params,
            gain,
            domain,
        })
    }

    /// Pendulum with default constants and the default LQR weighting.
    pub fn with_default_lqr(params: PendulumParams) -> Result<Self> {
        let gain = lqr_synthesize(&params, DEFAULT_STATE_COST, DEFAULT_INPUT_COST)?;
        Self::new(params, gain)
    }

    pub fn params(&self) -> &PendulumParams {
        &self.params
    }

    pub fn gain(&self) -> &LqrGain {
        &self.gain
    }

    pub fn torque(&self, theta: f64, theta_dot: f64) -> f64 {
        let u_max = self.params.torque_limit;
        self.gain.control(theta, theta_dot).clamp(-u_max, u_max)
    }

    /// One RK4 step; `theta` of the result is wrapped to `(-pi, pi]`.
    pub fn rk4_step(&self, theta: f64, theta_dot: f64) -> Result<(f64, f64)> {
        if !theta.is_finite() || !theta_dot.is_finite() {
            return Err(Error::InvalidInput(format!(
                "non-finite pendulum state ({theta}, {theta_dot})"
            )));
        }
        let p = &self.params;
        let u = self.torque(theta, theta_dot);
        let h = p.dt;
        let f = |th: f64, om: f64| (om, p.acceleration(th, om, u));
        let (k1t, k1w) = f(theta, theta_dot);
        let (k2t, k2w) = f(theta + 0.5 * h * k1t, theta_dot + 0.5 * h * k1w);
        let (k3t, k3w) = f(theta + 0.5 * h * k2t, theta_dot + 0.5 * h * k2w);
        let (k4t, k4w) = f(theta + h * k3t, theta_dot + h * k3w);
        let th = theta + h / 6.0 * (k1t + 2.0 * k2t + 2.0 * k3t + k4t);
        let om = theta_dot + h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
        Ok((wrap_angle(th), om))
    }

    /// Maps an observation `[x, y, x_dot, y_dot]` back to `(theta, theta_dot)`.
    pub fn unobserve(&self, obs: &[f64]) -> [f64; 2] {
        let theta = obs[0].atan2(obs[1]);
        let (s, c) = theta.sin_cos();
        let theta_dot = (obs[2] * c - obs[3] * s) / self.params.length;
        [theta, theta_dot]
    }

    /// Total mechanical energy with the upright position as potential maximum.
    pub fn energy(&self, theta: f64, theta_dot: f64) -> f64 {
        let p = &self.params;
        0.5 * p.inertia() * theta_dot * theta_dot + p.mass * p.gravity * p.length * theta.cos()
    }
}

pub const DEFAULT_STATE_COST: [[f64; 2]; 2] = [[10.0, 0.0], [0.0, 1.0]];
pub const DEFAULT_INPUT_COST: f64 = 1.0;

/// Observation map `(l sin th, l cos th, l th' cos th, -l th' sin th)`.
pub fn pendulum_observe(theta: f64, theta_dot: f64, length: f64) -> [f64; 4] {
    let (s, c) = theta.sin_cos();
    [
        length * s,
        length * c,
        length * theta_dot * c,
        -length * theta_dot * s,
    ]
}

impl Dynamics for Pendulum {
    fn state_dim(&self) -> usize {
        2
    }

    fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    fn map_kind(&self) -> MapKind {
        MapKind::ContinuousOde
    }

    fn step(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                found: x.len(),
            });
        }
        let (th, om) = self.rk4_step(x[0], x[1])?;
        Ok(vec![th, om])
    }

    fn observe(&self, x: &[f64]) -> Vec<f64> {
        pendulum_observe(x[0], x[1], self.params.length).to_vec()
    }

    fn observation_dim(&self) -> usize {
        4
    }
}

/// The N-dimensional bistable map `(atan(4 x_1), x_2 / 2, ..., x_N / 2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bistable {
    domain: BoxDomain,
}

impl Bistable {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput(
                "bistable dimension must be >= 1".into(),
            ));
        }
        let mut lower = vec![-2.0; dim];
        let mut upper = vec![2.0; dim];
        lower[0] = -3.0;
        upper[0] = 3.0;
        Ok(Self {
            domain: BoxDomain::new(lower, upper)?,
        })
    }

    pub fn apply(x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(i, &v)| if i == 0 { (4.0 * v).atan() } else { 0.5 * v })
            .collect()
    }
}

impl Dynamics for Bistable {
    fn state_dim(&self) -> usize {
        self.domain.dim()
    }

    fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    fn map_kind(&self) -> MapKind {
        MapKind::DiscreteMap
    }

    fn step(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.state_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.state_dim(),
                found: x.len(),
            });
        }
        Ok(Self::apply(x))
    }
}

/// Any of the benchmark systems, selected at runtime.
#[derive(Clone, Debug, PartialEq)]
pub enum System {
    Pendulum(Pendulum),
    Bistable(Bistable),
}

impl System {
    /// Maps a stored observation back to the internal state.
    pub fn unobserve(&self, obs: &[f64]) -> Vec<f64> {
        match self {
            System::Pendulum(p) => p.unobserve(obs).to_vec(),
            System::Bistable(_) => obs.to_vec(),
        }
    }

    fn inner(&self) -> &dyn Dynamics {
        match self {
            System::Pendulum(p) => p,
            System::Bistable(b) => b,
        }
    }
}

impl Dynamics for System {
    fn state_dim(&self) -> usize {
        self.inner().state_dim()
    }

    fn domain(&self) -> &BoxDomain {
        self.inner().domain()
    }

    fn map_kind(&self) -> MapKind {
        self.inner().map_kind()
    }

    fn step(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.inner().step(x)
    }

    fn observe(&self, x: &[f64]) -> Vec<f64> {
        self.inner().observe(x)
    }

    fn observation_dim(&self) -> usize {
        self.inner().observation_dim()
    }
}
