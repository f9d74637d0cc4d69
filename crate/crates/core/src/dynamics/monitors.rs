//! Energy, Killing charge and the a-priori velocity bound.
//!
//! The running accumulator sees every stored observation of an integration.
//! The public free functions replay the same bookkeeping over the samples of
//! a finished result.

use serde::Serialize;
use thiserror::Error;

use super::{Dynamics, DynamicsError, Sample, TrajectoryResult, TrajectoryState};
use crate::fields::{FieldPack, TIMELIKE_MARGIN};
use crate::geometry::ManifoldSpec;
use crate::scalar::{norm, to_f64, Real};

/// Slack allowed when comparing the observed `g_R` speed with the bound.
pub const CERTIFICATE_SLACK: f64 = 1e-6;

pub(super) struct Observation {
    t: f64,
    energy: f64,
    charge: Option<f64>,
    /// `σ g(v,v) + g(K, F v + X − ∇V)`: the rate predicted for `g(K,v)`.
    rate: Option<f64>,
    speed: f64,
    g_vv: f64,
    /// `‖K‖⁻¹` when `K` is timelike at the point.
    inverse_k_norm: Option<f64>,
}

impl Observation {
    pub(super) fn into_sample<T>(self, state: TrajectoryState<T>) -> Sample<T> {
        Sample { state, energy: self.energy, killing_charge: self.charge, gr_speed: self.speed }
    }
}

pub(super) struct Observer<'d, 'a, T: Real> {
    dynamics: &'d Dynamics<'a, T>,
}

impl<'d, 'a, T: Real> Observer<'d, 'a, T> {
    pub(super) fn new(dynamics: &'d Dynamics<'a, T>) -> Self {
        Self { dynamics }
    }

    pub(super) fn observe(&self, s: &TrajectoryState<T>) -> Result<Observation, DynamicsError> {
        let fp = self.dynamics.fields();
        let m = self.dynamics.manifold();
        let (q, v) = (s.q.as_slice(), s.v.as_slice());
        let time = Some(s.t);
        let g = self.dynamics.metric(q)?;
        let g_vv = to_f64(g.bilinear(v, v));
        let potential = match fp.potential() {
            Some(_) => to_f64(fp.potential_at(q, time)?),
            None => 0.0,
        };
        let energy = g_vv + 2.0 * potential;

        let Some(k) = fp.killing_at(q)? else {
            return Ok(Observation {
                t: to_f64(s.t),
                energy,
                charge: None,
                rate: None,
                speed: to_f64(norm(v)),
                g_vv,
                inverse_k_norm: None,
            });
        };
        let charge = to_f64(g.bilinear(&k, v));
        let kk = to_f64(g.bilinear(&k, &k));
        let (speed, inverse_k_norm) = if kk < -TIMELIKE_MARGIN {
            let zv2 = charge * charge / -kk;
            ((g_vv + 2.0 * zv2).max(0.0).sqrt(), Some(1.0 / (-kk).sqrt()))
        } else {
            (to_f64(norm(v)), None)
        };

        let sigma = to_f64(fp.conformal_factor(m, q)?.sigma);
        let mut rate = sigma * g_vv;
        if let Some(fv) = fp.apply_force(q, time, v)? {
            rate += to_f64(g.bilinear(&k, &fv));
        }
        if let Some(x) = fp.vector_at(q, time)? {
            rate += to_f64(g.bilinear(&k, &x));
        } else if let Some(dv) = fp.potential_differential(q, time)? {
            rate -= dv.iter().zip(&k).map(|(&a, &b)| to_f64(a * b)).sum::<f64>();
        }
        Ok(Observation { t: to_f64(s.t), energy, charge: Some(charge), rate: Some(rate), speed, g_vv, inverse_k_norm })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyRecord {
    /// True when `F` is skew-adjoint and the drive is an autonomous potential.
    pub conserved_expected: bool,
    pub status: String,
    /// `c = g(γ̇,γ̇) + 2V` at the initial state.
    pub initial: f64,
    pub max_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KillingRecord {
    /// `σ = 0`, `V = 0`, `F(K) = 0`: the charge should stay constant.
    pub expect_constant: bool,
    pub initial: f64,
    pub max_deviation: f64,
    /// Largest gap between the finite-difference rate of `g(K,γ̇)` and the
    /// rate predicted from `σ`, `F` and the drive.
    pub max_rate_residual: f64,
    /// Largest predicted `|d/dt g(K,γ̇)|`.
    pub c1: f64,
    /// Largest `|g(K,γ̇)|`.
    pub c2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonitorReport {
    pub energy: EnergyRecord,
    pub killing: Option<KillingRecord>,
    pub gr_speed_max: f64,
    pub g_vv_max: f64,
    /// `max ‖K‖⁻¹` over domain samples and trajectory points, when `K` is
    /// timelike at all of them.
    pub inverse_k_norm_max: Option<f64>,
    pub observations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCertificate {
    /// Energy constant `g(γ̇,γ̇) + 2V` at the initial state.
    pub c: f64,
    pub c1: f64,
    pub c2: f64,
    pub m: f64,
    /// `max g(γ̇,γ̇) + 2 (m c₂)²`, the bound on `g_R(γ̇,γ̇)`.
    pub bound: f64,
    pub gr_speed_max: f64,
    pub g_vv_max: f64,
    /// Whether the observed `g_R` speed respects the bound.
    pub consistent: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error, Serialize)]
pub enum CertificateRefusal {
    #[error("no timelike vector field K was given")]
    NoKilling,
    #[error("K is not timelike on the sampled domain and trajectory")]
    NotTimelike,
}

pub(super) struct MonitorAccumulator {
    energy_conserved: bool,
    charge_conserved: bool,
    domain_inverse_k: Option<f64>,
    has_killing: bool,
    energy0: f64,
    energy_drift: f64,
    charge0: Option<f64>,
    charge_dev: f64,
    c1: f64,
    c2: f64,
    rate_residual: f64,
    window: Vec<(f64, f64, f64)>,
    gr_speed_max: f64,
    g_vv_max: f64,
    inverse_k_max: f64,
    k_timelike_along: bool,
    observations: usize,
}

impl MonitorAccumulator {
    pub(super) fn new<T: Real>(dynamics: &Dynamics<'_, T>, initial: &TrajectoryState<T>) -> Result<Self, DynamicsError> {
        let ctx = dynamics.context();
        let first = Observer::new(dynamics).observe(initial)?;
        Ok(Self {
            energy_conserved: ctx.energy_conserved,
            charge_conserved: ctx.charge_conserved,
            domain_inverse_k: ctx.inverse_k_norm_max,
            has_killing: dynamics.fields().killing().is_some(),
            energy0: first.energy,
            energy_drift: 0.0,
            charge0: first.charge,
            charge_dev: 0.0,
            c1: 0.0,
            c2: 0.0,
            rate_residual: 0.0,
            window: Vec::with_capacity(3),
            gr_speed_max: 0.0,
            g_vv_max: f64::NEG_INFINITY,
            inverse_k_max: 0.0,
            k_timelike_along: true,
            observations: 0,
        })
    }

    pub(super) fn begin_direction(&mut self) {
        self.window.clear();
    }

    pub(super) fn record(&mut self, o: &Observation) {
        self.observations += 1;
        self.energy_drift = self.energy_drift.max((o.energy - self.energy0).abs());
        self.gr_speed_max = self.gr_speed_max.max(o.speed);
        self.g_vv_max = self.g_vv_max.max(o.g_vv);
        match o.inverse_k_norm {
            Some(w) => self.inverse_k_max = self.inverse_k_max.max(w),
            None => self.k_timelike_along = false,
        }
        let (Some(charge), Some(rate), Some(charge0)) = (o.charge, o.rate, self.charge0) else {
            return;
        };
        self.charge_dev = self.charge_dev.max((charge - charge0).abs());
        self.c1 = self.c1.max(rate.abs());
        self.c2 = self.c2.max(charge.abs());
        self.window.push((o.t, charge, rate));
        if self.window.len() == 3 {
            let [(t0, q0, _), (t1, q1, r1), (t2, q2, _)] = [self.window[0], self.window[1], self.window[2]];
            let (h1, h2) = (t1 - t0, t2 - t1);
            if h1 != 0.0 && h2 != 0.0 {
                let numeric = -h2 / (h1 * (h1 + h2)) * q0 + (h2 - h1) / (h1 * h2) * q1 + h1 / (h2 * (h1 + h2)) * q2;
                self.rate_residual = self.rate_residual.max((numeric - r1).abs());
            }
            self.window.remove(0);
        }
    }

    pub(super) fn finish(self) -> MonitorReport {
        let status = if self.energy_conserved { "conserved" } else { "not conserved (informational)" };
        let killing = self.charge0.map(|initial| KillingRecord {
            expect_constant: self.charge_conserved,
            initial,
            max_deviation: self.charge_dev,
            max_rate_residual: self.rate_residual,
            c1: self.c1,
            c2: self.c2,
        });
        let inverse_k_norm_max = match (self.has_killing, self.k_timelike_along, self.domain_inverse_k) {
            (true, true, Some(d)) => Some(d.max(self.inverse_k_max)),
            _ => None,
        };
        MonitorReport {
            energy: EnergyRecord {
                conserved_expected: self.energy_conserved,
                status: status.to_string(),
                initial: self.energy0,
                max_drift: self.energy_drift,
            },
            killing,
            gr_speed_max: self.gr_speed_max,
            g_vv_max: if self.observations == 0 { 0.0 } else { self.g_vv_max },
            inverse_k_norm_max,
            observations: self.observations,
        }
    }
}

pub(super) fn certificate_from<T: Real>(
    dynamics: &Dynamics<'_, T>,
    report: &MonitorReport,
) -> Result<BoundCertificate, CertificateRefusal> {
    if dynamics.fields().killing().is_none() {
        return Err(CertificateRefusal::NoKilling);
    }
    let (Some(m), Some(k)) = (report.inverse_k_norm_max, report.killing.as_ref()) else {
        return Err(CertificateRefusal::NotTimelike);
    };
    let bound = report.g_vv_max + 2.0 * (m * k.c2).powi(2);
    let consistent = report.gr_speed_max.powi(2) <= bound + CERTIFICATE_SLACK * (1.0 + bound.abs());
    Ok(BoundCertificate {
        c: report.energy.initial,
        c1: k.c1,
        c2: k.c2,
        m,
        bound,
        gr_speed_max: report.gr_speed_max,
        g_vv_max: report.g_vv_max,
        consistent,
    })
}

fn replay_report<T: Real>(dynamics: &Dynamics<'_, T>, result: &TrajectoryResult<T>) -> Result<MonitorReport, DynamicsError> {
    let observer = Observer::new(dynamics);
    let mut acc = MonitorAccumulator::new(dynamics, &result.initial)?;
    acc.begin_direction();
    for s in &result.samples {
        acc.record(&observer.observe(&s.state)?);
    }
    Ok(acc.finish())
}

/// Energy bookkeeping recomputed from the stored samples.
pub fn energy_monitor<T: Real>(m: &ManifoldSpec, fp: &FieldPack, result: &TrajectoryResult<T>) -> Result<EnergyRecord, DynamicsError> {
    let dynamics = Dynamics::new(m, fp)?;
    Ok(replay_report(&dynamics, result)?.energy)
}

/// Killing charge bookkeeping recomputed from the stored samples; `None`
/// without `K`.
pub fn killing_charge_monitor<T: Real>(
    m: &ManifoldSpec,
    fp: &FieldPack,
    result: &TrajectoryResult<T>,
) -> Result<Option<KillingRecord>, DynamicsError> {
    let dynamics = Dynamics::new(m, fp)?;
    Ok(replay_report(&dynamics, result)?.killing)
}

/// The velocity bound recomputed from the stored samples.
pub fn certificate<T: Real>(
    m: &ManifoldSpec,
    fp: &FieldPack,
    result: &TrajectoryResult<T>,
) -> Result<Result<BoundCertificate, CertificateRefusal>, DynamicsError> {
    let dynamics = Dynamics::new(m, fp)?;
    let report = replay_report(&dynamics, result)?;
    Ok(certificate_from(&dynamics, &report))
}
