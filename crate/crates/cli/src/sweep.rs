//! Ensemble integration over seeded random initial states.

use std::collections::BTreeMap;
use std::fmt::Write;

use anyhow::{bail, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use relcomplete::fields::unit_timelike;
use relcomplete::linalg::Matrix;
use relcomplete::{Dynamics, IntegrationConfig, QuotientSpec, Scenario, State};
use serde::Serialize;

const CLASSES: [&str; 4] = ["CompleteToHorizon", "BlowupAt", "LeftDomainAt", "StalledAt"];
const MAX_REJECTIONS: usize = 100_000;

fn uniform_ball(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> Vec<f64> {
    let dir: Vec<f64> = loop {
        let d: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut *rng)).collect();
        let len = d.iter().map(|x| x * x).sum::<f64>().sqrt();
        if len > 1e-12 {
            break d.into_iter().map(|x| x / len).collect();
        }
    };
    let r = radius * rng.random::<f64>().powf(1.0 / n as f64);
    dir.into_iter().map(|x| x * r).collect()
}

fn sample_position(s: &Scenario, rng: &mut ChaCha8Rng, half_width: f64) -> Result<Vec<f64>> {
    let m = &s.manifold;
    let n = m.dim();
    for _ in 0..MAX_REJECTIONS {
        let p: Vec<f64> = match m.quotient() {
            Some(QuotientSpec::Scaling(lambda)) => {
                let p: Vec<f64> = (0..n).map(|_| rng.random_range(-*lambda..*lambda)).collect();
                let r = p.iter().map(|x| x * x).sum::<f64>().sqrt();
                if !(1.0..*lambda).contains(&r) {
                    continue;
                }
                p
            }
            Some(QuotientSpec::Lattice(periods)) => (0..n)
                .map(|i| match periods[i] {
                    Some(l) => rng.random_range(0.0..l),
                    None => s.initial.q[i] + rng.random_range(-half_width..half_width),
                })
                .collect(),
            None => (0..n).map(|i| s.initial.q[i] + rng.random_range(-half_width..half_width)).collect(),
        };
        if m.domain().contains(&p) && m.metric_at(&p).is_ok() {
            return Ok(p);
        }
    }
    bail!("could not sample a position inside the chart domain")
}

/// Velocity uniform in the `g_R` ball of the given radius when `K` is
/// timelike at `p`, otherwise in the Euclidean chart ball.
fn sample_velocity(s: &Scenario, p: &[f64], rng: &mut ChaCha8Rng, radius: f64) -> Result<Vec<f64>> {
    let n = p.len();
    let y = uniform_ball(rng, n, radius);
    let Some(k) = s.fields.killing_at(p)? else { return Ok(y) };
    let g = s.manifold.metric_at(p)?;
    let Some(z) = unit_timelike(&g, &k) else { return Ok(y) };
    let omega = g.mul_vec(&z);
    let gr = Matrix::from_fn(n, |i, j| g[(i, j)] + 2.0 * omega[i] * omega[j]);
    let l = gr.cholesky().expect("auxiliary metric is positive definite");
    // solve Lᵀ v = y so that vᵀ g_R v = |y|²
    let mut v = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[(k, i)] * v[k]).sum();
        v[i] = (y[i] - s) / l[(i, i)];
    }
    Ok(v)
}

/// Seeded initial states: positions uniform in the fundamental domain (or a
/// box around the scenario's initial point on non-periodic axes), velocities
/// uniform in a ball.
pub fn sample_initial_states(s: &Scenario, count: usize, seed: u64, speed_radius: f64, position_radius: f64) -> Result<Vec<State>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let q = sample_position(s, &mut rng, position_radius)?;
            let v = sample_velocity(s, &q, &mut rng, speed_radius)?;
            Ok(State::new(0.0, q, v))
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub index: usize,
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    pub classification: String,
    pub t_star: Option<f64>,
    pub t_star_halfwidth: Option<f64>,
    pub marginal: bool,
    pub energy_drift: f64,
    pub killing_drift: Option<f64>,
    pub killing_rate_residual: Option<f64>,
    pub gr_speed_max: f64,
    pub certificate_bound: Option<f64>,
    pub certificate_consistent: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepAggregate {
    pub scenario: String,
    pub count: usize,
    pub seed: u64,
    pub counts: BTreeMap<String, usize>,
    pub marginal: usize,
    pub max_energy_drift: f64,
    pub max_killing_drift: Option<f64>,
    pub max_killing_rate_residual: Option<f64>,
    pub max_gr_speed: f64,
    pub certificate_violations: usize,
    pub certificate_refusals: usize,
    pub integration: IntegrationConfig,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub aggregate: SweepAggregate,
    pub rows: Vec<SweepRow>,
}

fn max_opt(acc: Option<f64>, x: Option<f64>) -> Option<f64> {
    match (acc, x) {
        (Some(a), Some(b)) => Some(a.max(b)),
        (a, b) => a.or(b),
    }
}

impl SweepReport {
    pub fn run(s: &Scenario, states: &[State], cfg: &IntegrationConfig, seed: u64) -> Result<Self> {
        let dynamics = Dynamics::new(&s.manifold, &s.fields)?;
        let mut rows = Vec::with_capacity(states.len());
        for (index, s0) in states.iter().enumerate() {
            let r = dynamics.integrate(s0, cfg)?;
            let cert = r.certificate.as_ref().ok();
            rows.push(SweepRow {
                index,
                q: s0.q.clone(),
                v: s0.v.clone(),
                classification: r.classification.name().to_string(),
                t_star: r.classification.t_star(),
                t_star_halfwidth: r.classification.halfwidth(),
                marginal: r.marginal,
                energy_drift: r.monitors.energy.max_drift,
                killing_drift: r.monitors.killing.as_ref().map(|k| k.max_deviation),
                killing_rate_residual: r.monitors.killing.as_ref().map(|k| k.max_rate_residual),
                gr_speed_max: r.monitors.gr_speed_max,
                certificate_bound: cert.map(|c| c.bound),
                certificate_consistent: cert.map(|c| c.consistent),
            });
        }
        let mut counts: BTreeMap<String, usize> = CLASSES.iter().map(|c| (c.to_string(), 0)).collect();
        for r in &rows {
            *counts.entry(r.classification.clone()).or_default() += 1;
        }
        let aggregate = SweepAggregate {
            scenario: s.name.clone(),
            count: rows.len(),
            seed,
            counts,
            marginal: rows.iter().filter(|r| r.marginal).count(),
            max_energy_drift: rows.iter().map(|r| r.energy_drift).fold(0.0, f64::max),
            max_killing_drift: rows.iter().map(|r| r.killing_drift).fold(None, max_opt),
            max_killing_rate_residual: rows.iter().map(|r| r.killing_rate_residual).fold(None, max_opt),
            max_gr_speed: rows.iter().map(|r| r.gr_speed_max).fold(0.0, f64::max),
            certificate_violations: rows.iter().filter(|r| r.certificate_consistent == Some(false)).count(),
            certificate_refusals: rows.iter().filter(|r| r.certificate_consistent.is_none()).count(),
            integration: cfg.clone(),
        };
        Ok(Self { aggregate, rows })
    }

    /// One line per trajectory, in index order.
    pub fn csv(&self) -> String {
        let n = self.rows.first().map_or(0, |r| r.q.len());
        let mut out = String::from("index");
        for i in 1..=n {
            write!(out, ",q_{i}").unwrap();
        }
        for i in 1..=n {
            write!(out, ",v_{i}").unwrap();
        }
        out.push_str(
            ",classification,t_star,t_star_halfwidth,marginal,energy_drift,killing_drift,killing_rate_residual,gr_speed_max,certificate_bound\n",
        );
        let opt = |x: Option<f64>| x.map_or_else(String::new, |v| v.to_string());
        for r in &self.rows {
            write!(out, "{}", r.index).unwrap();
            for x in r.q.iter().chain(&r.v) {
                write!(out, ",{x}").unwrap();
            }
            writeln!(
                out,
                ",{},{},{},{},{},{},{},{},{}",
                r.classification,
                opt(r.t_star),
                opt(r.t_star_halfwidth),
                r.marginal,
                r.energy_drift,
                opt(r.killing_drift),
                opt(r.killing_rate_residual),
                r.gr_speed_max,
                opt(r.certificate_bound),
            )
            .unwrap();
        }
        out
    }
}
