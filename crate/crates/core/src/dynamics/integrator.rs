//! Dormand–Prince 5(4) with PI step control, run in each time direction.

use serde::Serialize;

use super::monitors::{MonitorAccumulator, Observer};
use super::{
    BlowupCause, Classification, Dynamics, DynamicsError, IntegrationConfig, Sample, TrajectoryResult,
    TrajectoryState,
};
use crate::geometry::GeometryError;
use crate::scalar::{lit, to_f64, Real};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth order weights minus embedded fourth order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectionOutcome {
    pub direction: Direction,
    pub classification: Classification,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub min_step: f64,
    pub max_speed: f64,
    pub marginal: bool,
    pub final_state: TrajectoryState<f64>,
}

struct Stepper<T> {
    k: Vec<Vec<T>>,
    stage: Vec<T>,
    y_new: Vec<T>,
    err: Vec<T>,
}

impl<T: Real> Stepper<T> {
    fn new(dim: usize) -> Self {
        Self { k: vec![vec![T::zero(); dim]; 7], stage: vec![T::zero(); dim], y_new: vec![T::zero(); dim], err: vec![T::zero(); dim] }
    }

    /// One trial step from `(t, y)` with `k[0] = f(t, y)` already filled.
    /// Leaves the candidate in `y_new` and `k[6] = f(t + h, y_new)`.
    fn attempt(&mut self, dynamics: &Dynamics<'_, T>, t: T, y: &[T], h: T) -> Result<(), GeometryError> {
        let dim = y.len();
        for s in 1..7 {
            for i in 0..dim {
                let mut acc = T::zero();
                for j in 0..s {
                    if A[s][j] != 0.0 {
                        acc = acc + lit::<T>(A[s][j]) * self.k[j][i];
                    }
                }
                self.stage[i] = y[i] + h * acc;
            }
            let (done, rest) = self.k.split_at_mut(s);
            let _ = done;
            dynamics.rhs_into(t + lit::<T>(C[s]) * h, &self.stage, &mut rest[0])?;
        }
        // stage 7 is evaluated at the fifth order solution itself
        self.y_new.copy_from_slice(&self.stage);
        for i in 0..dim {
            let mut acc = T::zero();
            for (j, e) in E.iter().enumerate() {
                if *e != 0.0 {
                    acc = acc + lit::<T>(*e) * self.k[j][i];
                }
            }
            self.err[i] = h * acc;
        }
        Ok(())
    }

    fn error_norm(&self, y: &[T], cfg: &IntegrationConfig) -> f64 {
        let (rtol, atol) = (cfg.rtol, cfg.atol);
        let mut sum = 0.0;
        for i in 0..y.len() {
            let yi = to_f64(y[i]).abs().max(to_f64(self.y_new[i]).abs());
            let sc = atol + rtol * yi;
            let r = to_f64(self.err[i]) / sc;
            sum += r * r;
        }
        let e = (sum / y.len() as f64).sqrt();
        if e.is_finite() {
            e
        } else {
            f64::INFINITY
        }
    }
}

fn rms_scaled<T: Real>(v: &[T], y: &[T], cfg: &IntegrationConfig) -> f64 {
    let sum: f64 = v
        .iter()
        .zip(y)
        .map(|(&x, &yy)| {
            let sc = cfg.atol + cfg.rtol * to_f64(yy).abs();
            (to_f64(x) / sc).powi(2)
        })
        .sum();
    (sum / v.len() as f64).sqrt()
}

/// Starting step from the local scale of the solution and its derivative.
fn initial_step<T: Real>(dynamics: &Dynamics<'_, T>, t: T, y: &[T], f0: &[T], sign: f64, cfg: &IntegrationConfig) -> f64 {
    let d0 = rms_scaled(y, y, cfg);
    let d1 = rms_scaled(f0, y, cfg);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(cfg.h_max);
    let y1: Vec<T> = y.iter().zip(f0).map(|(&a, &b)| a + lit::<T>(sign * h0) * b).collect();
    let mut f1 = vec![T::zero(); y.len()];
    if dynamics.rhs_into(t + lit(sign * h0), &y1, &mut f1).is_err() {
        return h0.max(cfg.h_min);
    }
    let diff: Vec<T> = f1.iter().zip(f0).map(|(&a, &b)| a - b).collect();
    let d2 = rms_scaled(&diff, y, cfg) / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    (100.0 * h0).min(h1).min(cfg.h_max).max(cfg.h_min * 2.0)
}

pub(super) struct DirectionRun<T> {
    pub outcome: DirectionOutcome,
    pub samples: Vec<Sample<T>>,
}

fn run_direction<T: Real>(
    dynamics: &Dynamics<'_, T>,
    s0: &TrajectoryState<T>,
    direction: Direction,
    cfg: &IntegrationConfig,
    monitors: &mut MonitorAccumulator,
) -> Result<DirectionRun<T>, DynamicsError> {
    let m = dynamics.manifold();
    let n = m.dim();
    let sign = direction.sign();
    let t_end = to_f64(s0.t) + sign * cfg.horizon;
    let observer = Observer::new(dynamics);

    let mut t = s0.t;
    let mut y: Vec<T> = s0.q.iter().chain(&s0.v).copied().collect();
    let mut stepper = Stepper::new(2 * n);
    dynamics.rhs_into(t, &y, &mut stepper.k[0])?;

    let mut samples = Vec::new();
    monitors.begin_direction();
    let first = observer.observe(&TrajectoryState::new(t, y[..n].to_vec(), y[n..].to_vec()))?;
    monitors.record(&first);
    if cfg.keep_samples {
        samples.push(first.into_sample(TrajectoryState::new(t, y[..n].to_vec(), y[n..].to_vec())));
    }

    let mut h = initial_step(dynamics, t, &y, &stepper.k[0], sign, cfg);
    let mut err_old = 1e-4f64;
    let mut last_rejected = false;
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    let mut min_step = f64::INFINITY;
    let mut max_speed = to_f64(dynamics.auxiliary_speed(&y[..n], &y[n..])?);
    let mut domain_failure = false;

    let classification = loop {
        let t_now = to_f64(t);
        let remaining = (t_end - t_now) * sign;
        if remaining <= 0.0 {
            break Classification::CompleteToHorizon;
        }
        if accepted + rejected >= cfg.max_steps {
            break Classification::StalledAt { t_star: t_now };
        }
        let mut step = h.min(cfg.h_max);
        let last = step >= remaining;
        if last {
            step = remaining;
        }
        if step < cfg.h_min && !last {
            let t_star = t_now + sign * step / 2.0;
            break if domain_failure {
                Classification::LeftDomainAt { t_star, halfwidth: step / 2.0 }
            } else {
                Classification::BlowupAt { t_star, halfwidth: step / 2.0, cause: BlowupCause::StepUnderflow }
            };
        }
        let hs: T = lit(sign * step);

        let err = match stepper.attempt(dynamics, t, &y, hs) {
            Ok(()) => stepper.error_norm(&y, cfg),
            Err(GeometryError::Eval(_)) | Err(GeometryError::Degenerate { .. }) | Err(GeometryError::OutsideDomain) => {
                domain_failure = true;
                rejected += 1;
                h = step * 0.5;
                last_rejected = true;
                continue;
            }
            Err(e) => return Err(e.into()),
        };

        if err > 1.0 {
            rejected += 1;
            let fac = if err.is_finite() { (SAFETY * err.powf(-0.2)).max(MIN_FACTOR) } else { MIN_FACTOR };
            h = step * fac;
            last_rejected = true;
            continue;
        }

        // accepted
        domain_failure = false;
        let t_prev = t_now;
        t = if last { lit(t_end) } else { t + hs };
        y.copy_from_slice(&stepper.y_new);
        accepted += 1;
        min_step = min_step.min(step);

        let (q, v) = y.split_at_mut(n);
        let moved = m.normalize_in_place(q, v);
        if moved {
            dynamics.rhs_into(t, &y, &mut stepper.k[0])?;
        } else {
            let (first_k, rest) = stepper.k.split_at_mut(1);
            first_k[0].copy_from_slice(&rest[5]);
        }

        let t_new = to_f64(t);
        let mid = (t_prev + t_new) / 2.0;
        let halfwidth = (t_new - t_prev).abs() / 2.0;
        if !m.domain().contains(&y[..n]) {
            break Classification::LeftDomainAt { t_star: mid, halfwidth };
        }
        let speed = match dynamics.auxiliary_speed(&y[..n], &y[n..]) {
            Ok(s) => to_f64(s),
            Err(_) => f64::INFINITY,
        };
        let speed = if speed.is_finite() { speed } else { f64::INFINITY };
        max_speed = max_speed.max(speed);
        if speed > cfg.v_max {
            break Classification::BlowupAt { t_star: mid, halfwidth, cause: BlowupCause::SpeedThreshold };
        }

        if accepted.is_multiple_of(cfg.stride) || last {
            let state = TrajectoryState::new(t, y[..n].to_vec(), y[n..].to_vec());
            let obs = observer.observe(&state)?;
            monitors.record(&obs);
            if cfg.keep_samples {
                samples.push(obs.into_sample(state));
            }
        }

        // PI controller
        let fac11 = err.max(1e-300).powf(0.2 - 0.75 * BETA);
        let fac = fac11 / err_old.powf(BETA);
        let fac = (fac / SAFETY).clamp(1.0 / MAX_FACTOR, 1.0 / MIN_FACTOR);
        let mut next = step / fac;
        if last_rejected {
            next = next.min(step);
        }
        err_old = err.max(1e-4);
        last_rejected = false;
        h = next;
    };

    let marginal = match classification {
        Classification::CompleteToHorizon => max_speed >= cfg.v_max / 10.0 || min_step <= 10.0 * cfg.h_min,
        Classification::BlowupAt { cause: BlowupCause::StepUnderflow, .. } => max_speed < cfg.v_max / 10.0,
        _ => false,
    };
    let final_state = TrajectoryState::new(t, y[..n].to_vec(), y[n..].to_vec()).to_f64();
    Ok(DirectionRun {
        outcome: DirectionOutcome {
            direction,
            classification,
            accepted_steps: accepted,
            rejected_steps: rejected,
            min_step: if min_step.is_finite() { min_step } else { 0.0 },
            max_speed,
            marginal,
            final_state,
        },
        samples,
    })
}

pub(super) fn integrate_maximal<T: Real>(
    dynamics: &Dynamics<'_, T>,
    s0: &TrajectoryState<T>,
    cfg: &IntegrationConfig,
) -> Result<TrajectoryResult<T>, DynamicsError> {
    cfg.validate()?;
    let m = dynamics.manifold();
    let n = m.dim();
    if s0.q.len() != n || s0.v.len() != n {
        return Err(DynamicsError::InitialState(format!("state must have {n} coordinates")));
    }
    if s0.q.iter().chain(&s0.v).any(|x| !x.is_finite()) {
        return Err(DynamicsError::InitialState("non-finite initial data".into()));
    }
    let initial = m.normalize(s0);
    if !m.domain().contains(&initial.q) {
        return Err(DynamicsError::InitialState("initial point lies outside the chart domain".into()));
    }
    m.metric_at(&initial.q)?;

    let mut monitors = MonitorAccumulator::new(dynamics, &initial)?;
    let backward = run_direction(dynamics, &initial, Direction::Backward, cfg, &mut monitors)?;
    let forward = run_direction(dynamics, &initial, Direction::Forward, cfg, &mut monitors)?;

    let mut samples: Vec<Sample<T>> = backward.samples.into_iter().rev().collect();
    // both directions start with the initial sample
    let forward_samples = forward.samples.into_iter();
    let skip = usize::from(!samples.is_empty());
    samples.extend(forward_samples.skip(skip));

    let classification = match (forward.outcome.classification, backward.outcome.classification) {
        (f, b) if f.is_complete() => b,
        (f, b) if b.is_complete() => f,
        (f, b) => {
            if f.t_star().unwrap_or(f64::INFINITY).abs() <= b.t_star().unwrap_or(f64::INFINITY).abs() {
                f
            } else {
                b
            }
        }
    };
    let marginal = forward.outcome.marginal || backward.outcome.marginal;
    let report = monitors.finish();
    let certificate = super::monitors::certificate_from(dynamics, &report);
    Ok(TrajectoryResult {
        initial,
        samples,
        forward: forward.outcome,
        backward: backward.outcome,
        classification,
        marginal,
        monitors: report,
        certificate,
    })
}
