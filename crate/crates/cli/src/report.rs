//! JSON documents written by `run` and `check`.

use anyhow::Result;
use relcomplete::dynamics::{BlowupCause, DirectionOutcome, EnergyRecord, KillingRecord};
use relcomplete::fields::FieldNorms;
use relcomplete::sampling::domain_samples;
use relcomplete::{Classification, CriteriaConfig, CriterionReport, IntegrationConfig, SamplingConfig, Scenario, State, Trajectory};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct Certificates {
    /// Energy constant `g(v,v) + 2V` at the initial state.
    pub c: f64,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub m: Option<f64>,
    /// `max g(v,v) + 2 (m c2)^2`.
    pub bound: Option<f64>,
    pub gr_speed_max: f64,
    pub consistent: Option<bool>,
    pub refused: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    /// Constant metric on an unrestricted chart without quotient, hence complete.
    pub metric_flat_complete: bool,
    pub metric_constant: bool,
    pub field_norms: Option<FieldNorms>,
    pub field_norm_region: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolvedRun {
    pub scenario: String,
    pub initial: State,
    pub integration: IntegrationConfig,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub classification: String,
    pub t_star: Option<f64>,
    pub t_star_halfwidth: Option<f64>,
    pub blowup_cause: Option<BlowupCause>,
    pub energy_drift: f64,
    pub killing_drift: Option<f64>,
    pub certificates: Certificates,
    pub marginal: bool,
    pub energy: EnergyRecord,
    pub killing: Option<KillingRecord>,
    pub forward: DirectionOutcome,
    pub backward: DirectionOutcome,
    pub diagnostics: Diagnostics,
    pub config: ResolvedRun,
}

pub(crate) fn certificates(r: &Trajectory) -> Certificates {
    let mon = &r.monitors;
    match &r.certificate {
        Ok(c) => Certificates {
            c: c.c,
            c1: Some(c.c1),
            c2: Some(c.c2),
            m: Some(c.m),
            bound: Some(c.bound),
            gr_speed_max: c.gr_speed_max,
            consistent: Some(c.consistent),
            refused: None,
        },
        Err(why) => Certificates {
            c: mon.energy.initial,
            c1: mon.killing.as_ref().map(|k| k.c1),
            c2: mon.killing.as_ref().map(|k| k.c2),
            m: None,
            bound: None,
            gr_speed_max: mon.gr_speed_max,
            consistent: None,
            refused: Some(why.to_string()),
        },
    }
}

pub(crate) fn blowup_cause(c: &Classification) -> Option<BlowupCause> {
    match c {
        Classification::BlowupAt { cause, .. } => Some(*cause),
        _ => None,
    }
}

impl RunReport {
    pub fn build(s: &Scenario, initial: &State, cfg: &IntegrationConfig, r: &Trajectory) -> Result<Self> {
        let samples = domain_samples(&s.manifold, &SamplingConfig { points: 200, directions: 0, ..Default::default() });
        let field_norms = s.fields.field_norms(&s.manifold, &samples, 0.0).ok();
        Ok(Self {
            classification: r.classification.name().to_string(),
            t_star: r.classification.t_star(),
            t_star_halfwidth: r.classification.halfwidth(),
            blowup_cause: blowup_cause(&r.classification),
            energy_drift: r.monitors.energy.max_drift,
            killing_drift: r.monitors.killing.as_ref().map(|k| k.max_deviation),
            certificates: certificates(r),
            marginal: r.marginal,
            energy: r.monitors.energy.clone(),
            killing: r.monitors.killing.clone(),
            forward: r.forward.clone(),
            backward: r.backward.clone(),
            diagnostics: Diagnostics {
                metric_flat_complete: s.manifold.is_flat_complete_chart(),
                metric_constant: s.manifold.has_constant_metric(),
                field_norms,
                field_norm_region: samples.region,
            },
            config: ResolvedRun { scenario: s.name.clone(), initial: initial.clone(), integration: cfg.clone() },
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    pub energy_c: f64,
    pub killing_charge: Option<f64>,
    #[serde(rename = "gR_speed")]
    pub gr_speed: f64,
}

pub(crate) fn trajectory_json(r: &Trajectory) -> Vec<TrajectoryRow> {
    r.samples
        .iter()
        .map(|s| TrajectoryRow {
            t: s.state.t,
            q: s.state.q.clone(),
            v: s.state.v.clone(),
            energy_c: s.energy,
            killing_charge: s.killing_charge,
            gr_speed: s.gr_speed,
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub scenario: String,
    pub prediction: String,
    pub criterion: CriterionReport,
    pub config: CriteriaConfig,
}

impl CheckReport {
    pub fn new(s: &Scenario, cfg: &CriteriaConfig, criterion: CriterionReport) -> Self {
        Self {
            scenario: s.name.clone(),
            prediction: format!("{:?}", criterion.prediction),
            criterion,
            config: cfg.clone(),
        }
    }
}
