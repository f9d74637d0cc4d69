//! Equation of motion on the tangent bundle, maximal integration and the
//! conservation monitors that ride along with it.
//!
//! In coordinates the second order equation `Dγ̇/dt = F(γ̇) + X` (with
//! `X = −∇V` when a potential is given) becomes the first order system
//!
//! ```text
//! q' = v
//! v'^k = −Γ^k_ij v^i v^j + F^k_j v^j + X^k
//! ```
//!
//! whose right-hand side is the vector field on `TM` generated by the
//! equation. Its integral curves are followed in both directions until the
//! horizon or until they stop converging in `TM`.

mod integrator;
mod monitors;

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exprlang::EvalError;
use crate::fields::{unit_timelike, FieldPack, FieldsError};
use crate::geometry::{GeometryError, ManifoldSpec};
use crate::linalg::{Lu, Matrix};
use crate::sampling::{domain_samples, SamplingConfig};
use crate::scalar::{lit, norm, to_f64, Real};

pub use integrator::{Direction, DirectionOutcome};
pub use monitors::{
    certificate, energy_monitor, killing_charge_monitor, BoundCertificate, CertificateRefusal, EnergyRecord,
    KillingRecord, MonitorReport,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("invalid integration config: {0}")]
    Config(String),
    #[error("initial state: {0}")]
    InitialState(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Fields(#[from] FieldsError),
}

impl From<EvalError> for DynamicsError {
    fn from(e: EvalError) -> Self {
        DynamicsError::Geometry(GeometryError::Eval(e))
    }
}

/// A point `(t, q, v)` of `ℝ × TM`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryState<T> {
    pub t: T,
    pub q: Vec<T>,
    pub v: Vec<T>,
}

impl<T: Real> TrajectoryState<T> {
    pub fn new(t: T, q: Vec<T>, v: Vec<T>) -> Self {
        Self { t, q, v }
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    fn to_f64(&self) -> TrajectoryState<f64> {
        TrajectoryState {
            t: to_f64(self.t),
            q: self.q.iter().map(|&x| to_f64(x)).collect(),
            v: self.v.iter().map(|&x| to_f64(x)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrationConfig {
    /// Integrate over `[−horizon, horizon]`.
    pub horizon: f64,
    pub rtol: f64,
    pub atol: f64,
    /// Auxiliary speed above which the solution is declared inextendible.
    pub v_max: f64,
    pub h_min: f64,
    pub h_max: f64,
    /// Monitors and stored samples use every `stride`-th accepted step.
    pub stride: usize,
    pub max_steps: usize,
    /// Keep the sample list (disable for large ensembles).
    pub keep_samples: bool,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        Self {
            horizon: 100.0,
            rtol: 1e-10,
            atol: 1e-12,
            v_max: 1e8,
            h_min: 1e-14,
            h_max: 1.0,
            stride: 1,
            max_steps: 20_000_000,
            keep_samples: true,
        }
    }
}

impl IntegrationConfig {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let positive = [
            ("horizon", self.horizon),
            ("rtol", self.rtol),
            ("atol", self.atol),
            ("v_max", self.v_max),
            ("h_min", self.h_min),
            ("h_max", self.h_max),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(DynamicsError::Config(format!("{name} must be positive and finite, got {value}")));
            }
        }
        if self.rtol < 1e-14 || self.atol < 1e-14 {
            return Err(DynamicsError::Config("tolerances must be at least 1e-14".into()));
        }
        if self.h_min >= self.h_max {
            return Err(DynamicsError::Config("h_min must be below h_max".into()));
        }
        if self.stride == 0 || self.max_steps == 0 {
            return Err(DynamicsError::Config("stride and max_steps must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BlowupCause {
    /// Auxiliary speed of the normalised state exceeded `v_max`.
    SpeedThreshold,
    /// The step controller asked for steps below `h_min`.
    StepUnderflow,
}

/// Outcome of following a solution in one or both directions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum Classification {
    CompleteToHorizon,
    BlowupAt { t_star: f64, halfwidth: f64, cause: BlowupCause },
    LeftDomainAt { t_star: f64, halfwidth: f64 },
    StalledAt { t_star: f64 },
}

impl Classification {
    pub fn name(&self) -> &'static str {
        match self {
            Classification::CompleteToHorizon => "CompleteToHorizon",
            Classification::BlowupAt { .. } => "BlowupAt",
            Classification::LeftDomainAt { .. } => "LeftDomainAt",
            Classification::StalledAt { .. } => "StalledAt",
        }
    }

    pub fn t_star(&self) -> Option<f64> {
        match *self {
            Classification::CompleteToHorizon => None,
            Classification::BlowupAt { t_star, .. }
            | Classification::LeftDomainAt { t_star, .. }
            | Classification::StalledAt { t_star } => Some(t_star),
        }
    }

    pub fn halfwidth(&self) -> Option<f64> {
        match *self {
            Classification::BlowupAt { halfwidth, .. } | Classification::LeftDomainAt { halfwidth, .. } => {
                Some(halfwidth)
            }
            _ => None,
        }
    }

    pub fn is_complete(&self) -> bool {
        matches!(self, Classification::CompleteToHorizon)
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.t_star() {
            None => f.write_str(self.name()),
            Some(t) => write!(f, "{}({t})", self.name()),
        }
    }
}

/// A stored sample with the monitored scalars evaluated at it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample<T> {
    pub state: TrajectoryState<T>,
    /// `g(γ̇,γ̇) + 2V`.
    pub energy: f64,
    /// `g(K,γ̇)` when `K` is given.
    pub killing_charge: Option<f64>,
    /// Auxiliary (g_R or Euclidean chart) norm of the velocity.
    pub gr_speed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryResult<T> {
    /// Normalised initial state.
    pub initial: TrajectoryState<T>,
    /// Stored samples in increasing `t`, both directions merged.
    pub samples: Vec<Sample<T>>,
    pub forward: DirectionOutcome,
    pub backward: DirectionOutcome,
    /// The earlier (in `|t|`) of the two directional failures, if any.
    pub classification: Classification,
    pub marginal: bool,
    pub monitors: MonitorReport,
    pub certificate: Result<BoundCertificate, CertificateRefusal>,
}

/// Precomputed facts about a scenario reused across many integrations.
#[derive(Debug, Clone)]
pub struct MonitorContext {
    /// `F` skew-adjoint on samples, no free `X`, no `t` dependence.
    pub energy_conserved: bool,
    /// `σ = 0`, `V = 0` and `F(K) = 0` on samples: `g(K,γ̇)` should be constant.
    pub charge_conserved: bool,
    /// `max ‖K‖⁻¹` over the domain samples, if `K` is timelike on all of them.
    pub inverse_k_norm_max: Option<f64>,
    pub k_timelike: bool,
}

impl MonitorContext {
    pub fn build(m: &ManifoldSpec, fp: &FieldPack, sampling: &SamplingConfig) -> Result<Self, DynamicsError> {
        let samples = domain_samples(m, sampling);
        let skew = fp.is_skew_adjoint(m, &samples, 0.0)?.holds;
        let energy_conserved = skew && fp.is_potential_driven() && !fp.is_time_dependent();
        let mut charge_conserved = false;
        let mut inverse_k_norm_max = None;
        let mut k_timelike = false;
        if fp.killing().is_some() {
            let conformal = fp.conformal_check(m, &samples)?;
            let annihilated = fp.annihilates(&samples, 0.0)?.holds;
            let potential_free = fp.potential().is_none() && fp.vector().is_none();
            charge_conserved = conformal.killing && annihilated && potential_free && skew;
            let mut worst = 0.0f64;
            k_timelike = true;
            for p in &samples.points {
                let k = fp.killing_at(p)?.expect("K present");
                let kk = m.metric_at(p)?.bilinear(&k, &k);
                if kk >= -crate::fields::TIMELIKE_MARGIN {
                    k_timelike = false;
                    break;
                }
                worst = worst.max(1.0 / (-kk).sqrt());
            }
            if k_timelike {
                inverse_k_norm_max = Some(worst);
            }
        }
        Ok(Self { energy_conserved, charge_conserved, inverse_k_norm_max, k_timelike })
    }
}

/// A scenario prepared for repeated integration.
pub struct Dynamics<'a, T: Real> {
    manifold: &'a ManifoldSpec,
    fields: &'a FieldPack,
    context: MonitorContext,
    constant_lu: Option<Lu<T>>,
    constant_metric: Option<Matrix<T>>,
}

impl<'a, T: Real> Dynamics<'a, T> {
    pub fn new(manifold: &'a ManifoldSpec, fields: &'a FieldPack) -> Result<Self, DynamicsError> {
        Self::with_sampling(manifold, fields, &SamplingConfig::default())
    }

    pub fn with_sampling(
        manifold: &'a ManifoldSpec,
        fields: &'a FieldPack,
        sampling: &SamplingConfig,
    ) -> Result<Self, DynamicsError> {
        if fields.frame().dim() != manifold.dim() {
            return Err(DynamicsError::Geometry(GeometryError::Dimension {
                expected: manifold.dim(),
                found: fields.frame().dim(),
            }));
        }
        let context = MonitorContext::build(manifold, fields, sampling)?;
        let (constant_metric, constant_lu) = if manifold.has_constant_metric() {
            let g = manifold.eval_metric::<T>(&vec![T::zero(); manifold.dim()])?;
            let lu = manifold.factor(&g)?;
            (Some(g), Some(lu))
        } else {
            (None, None)
        };
        Ok(Self { manifold, fields, context, constant_lu, constant_metric })
    }

    pub fn context(&self) -> &MonitorContext {
        &self.context
    }

    pub fn manifold(&self) -> &ManifoldSpec {
        self.manifold
    }

    pub fn fields(&self) -> &FieldPack {
        self.fields
    }

    fn metric(&self, q: &[T]) -> Result<Matrix<T>, EvalError> {
        match &self.constant_metric {
            Some(g) => Ok(g.clone()),
            None => self.manifold.eval_metric(q),
        }
    }

    /// Right-hand side of the first order system, written into `dy`.
    pub(crate) fn rhs_into(&self, t: T, y: &[T], dy: &mut [T]) -> Result<(), GeometryError> {
        let n = self.manifold.dim();
        let (q, v) = y.split_at(n);
        let time = Some(t);
        dy[..n].copy_from_slice(v);

        // covector part, later raised by g⁻¹: −(∂_i g_jl − ½ ∂_l g_ij) v^i v^j − ∂_l V
        let mut covector = vec![T::zero(); n];
        if let Some(dg) = self.manifold.eval_metric_derivatives(q)? {
            let half = lit::<T>(0.5);
            for (l, w) in covector.iter_mut().enumerate() {
                let mut acc = T::zero();
                for i in 0..n {
                    if v[i] == T::zero() {
                        continue;
                    }
                    for j in 0..n {
                        acc = acc + (dg[i][(j, l)] - half * dg[l][(i, j)]) * v[i] * v[j];
                    }
                }
                *w = -acc;
            }
        }
        if let Some(dv) = self.fields.potential_differential(q, time)? {
            for (w, d) in covector.iter_mut().zip(dv) {
                *w = *w - d;
            }
        }
        let raised = if covector.iter().all(|&w| w == T::zero()) {
            covector
        } else {
            match &self.constant_lu {
                Some(lu) => lu.solve(&covector),
                None => {
                    let g = self.manifold.eval_metric(q)?;
                    self.manifold.factor(&g)?.solve(&covector)
                }
            }
        };
        let accel = &mut dy[n..];
        accel.copy_from_slice(&raised);
        if let Some(fv) = self.fields.apply_force(q, time, v)? {
            for (a, f) in accel.iter_mut().zip(fv) {
                *a = *a + f;
            }
        }
        if let Some(x) = self.fields.vector_at(q, time)? {
            for (a, f) in accel.iter_mut().zip(x) {
                *a = *a + f;
            }
        }
        Ok(())
    }

    /// `(dq, dv)` at a state.
    pub fn rhs(&self, s: &TrajectoryState<T>) -> Result<(Vec<T>, Vec<T>), DynamicsError> {
        let n = self.manifold.dim();
        if s.q.len() != n || s.v.len() != n {
            return Err(DynamicsError::InitialState(format!("state must have {n} coordinates")));
        }
        if !self.manifold.domain().contains(&s.q) {
            return Err(GeometryError::OutsideDomain.into());
        }
        let mut y = s.q.clone();
        y.extend_from_slice(&s.v);
        let mut dy = vec![T::zero(); 2 * n];
        self.rhs_into(s.t, &y, &mut dy)?;
        let dv = dy.split_off(n);
        Ok((dy, dv))
    }

    /// Velocity norm used for blowup detection: the `g_R` norm when `K` is
    /// timelike at `q`, the chart Euclidean norm otherwise.
    pub(crate) fn auxiliary_speed(&self, q: &[T], v: &[T]) -> Result<T, EvalError> {
        if self.fields.killing().is_some() {
            let g = self.metric(q)?;
            let k = self.fields.killing_at(q)?.expect("K present");
            if let Some(z) = unit_timelike(&g, &k) {
                let zv = g.bilinear(&z, v);
                let gr = g.bilinear(v, v) + lit::<T>(2.0) * zv * zv;
                return Ok(gr.max(T::zero()).sqrt());
            }
        }
        Ok(norm(v))
    }

    pub fn integrate(&self, s0: &TrajectoryState<T>, cfg: &IntegrationConfig) -> Result<TrajectoryResult<T>, DynamicsError> {
        integrator::integrate_maximal(self, s0, cfg)
    }
}

/// `rhs` as a free function.
pub fn rhs<T: Real>(m: &ManifoldSpec, fp: &FieldPack, s: &TrajectoryState<T>) -> Result<(Vec<T>, Vec<T>), DynamicsError> {
    Dynamics::with_sampling(m, fp, &SamplingConfig { points: 0, ..Default::default() })?.rhs(s)
}

/// Integrates forward to `+horizon` and backward to `−horizon`, classifying
/// each direction.
pub fn integrate_maximal<T: Real>(
    m: &ManifoldSpec,
    fp: &FieldPack,
    s0: &TrajectoryState<T>,
    cfg: &IntegrationConfig,
) -> Result<TrajectoryResult<T>, DynamicsError> {
    Dynamics::new(m, fp)?.integrate(s0, cfg)
}

/// Writes the sample CSV: `t, q_1..q_n, v_1..v_n, energy_c, killing_charge, gR_speed`.
pub fn write_csv<T: Real, W: Write>(result: &TrajectoryResult<T>, mut out: W) -> std::io::Result<()> {
    let n = result.initial.dim();
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("q_{i}")));
    header.extend((1..=n).map(|i| format!("v_{i}")));
    header.extend(["energy_c", "killing_charge", "gR_speed"].map(String::from));
    writeln!(out, "{}", header.join(","))?;
    for s in &result.samples {
        let st = s.state.to_f64();
        let mut row = vec![format!("{}", st.t)];
        row.extend(st.q.iter().chain(&st.v).map(|x| format!("{x}")));
        row.push(format!("{}", s.energy));
        row.push(s.killing_charge.map_or_else(String::new, |c| format!("{c}")));
        row.push(format!("{}", s.gr_speed));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
