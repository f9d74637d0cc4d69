//! Sampled checks of sufficient conditions for completeness.
//!
//! Two families are covered. On compact Lorentzian manifolds a timelike
//! conformal Killing field `K` with `F(K) = 0`, skew `F` and a potential
//! drive gives completeness. On complete Riemannian manifolds, bounded
//! self-adjoint part of `F` plus linear growth of `X` (or of `∇V`, or
//! quadratic growth of `−V` and `|∂V/∂t|`) gives completeness, and compactness
//! alone suffices.
//!
//! All checks evaluate on finite sample sets, so a pass is evidence on the
//! sampled region and never a proof.

use serde::{Deserialize, Serialize};

use crate::fields::{FieldPack, CONFORMAL_TOLERANCE, TIMELIKE_MARGIN};
use crate::geometry::{ManifoldSpec, Signature};
use crate::linalg::Matrix;
use crate::sampling::{domain_samples, SampleSet, SamplingConfig};

pub const PROVENANCE: &str = "sampled check, not a proof";
pub const DISTANCE_CAVEAT: &str =
    "distances d(p, p0) are Euclidean chart distances, a proxy for the Riemannian distance";

/// Log-log slope above which growth counts as faster than linear.
pub const SUPERLINEAR_SLOPE: f64 = 1.2;
/// Log-log slope above which growth counts as faster than quadratic.
pub const SUPERQUADRATIC_SLOPE: f64 = 2.2;
/// Envelope slope up to which a pointwise norm counts as bounded on a
/// non-compact region.
pub const BOUNDED_SLOPE: f64 = 0.2;
const ENVELOPE_BINS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Prediction {
    Complete,
    NoPrediction,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisCheck {
    pub name: String,
    pub verdict: Verdict,
    pub measured: Option<f64>,
    pub samples: usize,
    pub note: String,
}

impl HypothesisCheck {
    fn new(name: &str, verdict: Verdict, measured: Option<f64>, samples: usize, note: impl Into<String>) -> Self {
        Self { name: name.to_string(), verdict, measured, samples, note: note.into() }
    }

    fn pass_if(name: &str, ok: bool, measured: Option<f64>, samples: usize, note: impl Into<String>) -> Self {
        Self::new(name, if ok { Verdict::Pass } else { Verdict::Fail }, measured, samples, note)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GrowthClass {
    /// The sampled values are nowhere positive.
    Bounded,
    Sublinear,
    Linear,
    Superlinear,
    Subquadratic,
    Quadratic,
    Superquadratic,
}

/// Upper envelope `f ≤ A·d^k + C` fitted to `(d, f)` samples, with the
/// log-log slope of the binned envelope over the outer decile of distances.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthFit {
    pub power: u32,
    pub a: f64,
    pub c: f64,
    pub slope: Option<f64>,
    pub class: GrowthClass,
    pub within: bool,
    pub samples: usize,
    pub max_distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SBounds {
    pub sup: f64,
    pub inf: f64,
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionReport {
    pub criterion: String,
    pub hypotheses: Vec<HypothesisCheck>,
    pub prediction: Prediction,
    pub region: String,
    pub provenance: String,
    pub caveats: Vec<String>,
    pub fits: Vec<(String, GrowthFit)>,
}

impl CriterionReport {
    fn new(criterion: &str, region: String) -> Self {
        Self {
            criterion: criterion.to_string(),
            hypotheses: Vec::new(),
            prediction: Prediction::NoPrediction,
            region,
            provenance: PROVENANCE.to_string(),
            caveats: Vec::new(),
            fits: Vec::new(),
        }
    }

    pub fn hypothesis(&self, name: &str) -> Option<&HypothesisCheck> {
        self.hypotheses.iter().find(|h| h.name == name)
    }

    pub fn all_pass(&self) -> bool {
        !self.hypotheses.is_empty() && self.hypotheses.iter().all(|h| h.verdict == Verdict::Pass)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriteriaConfig {
    pub sampling: SamplingConfig,
    /// Time-dependent fields are sampled on `[−time_window, time_window]`.
    pub time_window: f64,
    pub time_slices: usize,
}

impl Default for CriteriaConfig {
    fn default() -> Self {
        Self { sampling: SamplingConfig::default(), time_window: 10.0, time_slices: 11 }
    }
}

impl CriteriaConfig {
    fn times(&self, time_dependent: bool) -> Vec<f64> {
        if !time_dependent || self.time_slices < 2 {
            return vec![0.0];
        }
        let n = self.time_slices;
        (0..n).map(|i| -self.time_window + 2.0 * self.time_window * i as f64 / (n - 1) as f64).collect()
    }
}

/// Runs the checker matching the metric signature.
pub fn check(m: &ManifoldSpec, fp: &FieldPack, cfg: &CriteriaConfig) -> CriterionReport {
    match m.signature() {
        Signature::Lorentzian => check_lorentzian(m, fp, cfg),
        Signature::Riemannian => check_riemannian(m, fp, cfg),
    }
}

/// Checks the compact conformastationary criterion hypothesis by hypothesis.
pub fn check_lorentzian(m: &ManifoldSpec, fp: &FieldPack, cfg: &CriteriaConfig) -> CriterionReport {
    let samples = domain_samples(m, &cfg.sampling);
    let mut r = CriterionReport::new("compact conformastationary (Lorentzian)", samples.region.clone());
    let n = samples.len();
    if m.signature() != Signature::Lorentzian {
        r.hypotheses.push(HypothesisCheck::new("lorentzian", Verdict::Fail, None, 0, "metric is Riemannian"));
        return r;
    }

    r.hypotheses.push(HypothesisCheck::pass_if(
        "compact",
        m.is_compact(),
        None,
        0,
        match m.quotient() {
            None => "no quotient: the chart itself is the manifold",
            Some(q) if q.is_bounded() => "quotient with bounded fundamental domain",
            Some(_) => "quotient leaves a non-periodic axis",
        },
    ));
    let autonomous = !fp.is_time_dependent() && !m.frame().is_time_dependent();
    r.hypotheses.push(HypothesisCheck::pass_if("autonomous", autonomous, None, 0, "no explicit t in any field"));

    r.hypotheses.push(match fp.is_skew_adjoint(m, &samples, 0.0) {
        Ok(c) => HypothesisCheck::pass_if("skew-adjoint", c.holds, Some(c.measured), c.samples, "max |g(v,Fv)|/(1+|v|^2)"),
        Err(e) => HypothesisCheck::new("skew-adjoint", Verdict::Fail, None, 0, e.to_string()),
    });

    if fp.killing().is_none() {
        for name in ["conformal-killing", "timelike", "annihilated"] {
            r.hypotheses.push(HypothesisCheck::new(name, Verdict::NotApplicable, None, 0, "no K given"));
        }
    } else {
        r.hypotheses.push(match fp.conformal_check(m, &samples) {
            Ok(c) => HypothesisCheck::pass_if(
                "conformal-killing",
                c.conformal,
                Some(c.max_residual),
                n,
                format!("max |L_K g - 2 sigma g| (tolerance {CONFORMAL_TOLERANCE:e}); max |sigma| = {:e}", c.max_abs_sigma),
            ),
            Err(e) => HypothesisCheck::new("conformal-killing", Verdict::Fail, None, 0, e.to_string()),
        });
        r.hypotheses.push(match fp.timelike_check(m, &samples) {
            Ok(c) => HypothesisCheck::pass_if(
                "timelike",
                c.holds,
                Some(c.measured),
                n,
                if c.holds {
                    format!("max g(K,K) below -{TIMELIKE_MARGIN:e}")
                } else {
                    "K not timelike: g(K,K) >= 0 somewhere on the samples".to_string()
                },
            ),
            Err(e) => HypothesisCheck::new("timelike", Verdict::Fail, None, 0, e.to_string()),
        });
        r.hypotheses.push(match fp.annihilates(&samples, 0.0) {
            Ok(c) => HypothesisCheck::pass_if("annihilated", c.holds, Some(c.measured), n, "max |F(K)|"),
            Err(e) => HypothesisCheck::new("annihilated", Verdict::Fail, None, 0, e.to_string()),
        });
    }

    let potential = fp.is_potential_driven();
    r.hypotheses.push(HypothesisCheck::pass_if(
        "potential-drive",
        potential,
        None,
        0,
        if potential { "drive is -grad V (or absent)" } else { "X is given without a potential" },
    ));

    if r.all_pass() {
        r.prediction = Prediction::Complete;
    }
    r
}

/// Extremes of `g(v, S v)` over `g`-unit `v` at each sampled point and time.
pub fn estimate_s_bounds(
    m: &ManifoldSpec,
    fp: &FieldPack,
    samples: &SampleSet,
    times: &[f64],
) -> Result<SBounds, crate::Error> {
    if m.signature() != Signature::Riemannian {
        return Err(crate::geometry::GeometryError::Signature { expected: 0, negatives: 1 }.into());
    }
    let mut out = SBounds { sup: 0.0, inf: 0.0, norm: 0.0 };
    if !fp.has_force() {
        return Ok(out);
    }
    let (mut sup, mut inf) = (f64::NEG_INFINITY, f64::INFINITY);
    for p in &samples.points {
        let g = m.metric_at(p)?;
        for &t in times {
            let s = fp.decompose(m, p, Some(t))?.self_adjoint;
            let (lo, hi) = extreme_rayleigh(&g.mul(&s), &g);
            sup = sup.max(hi);
            inf = inf.min(lo);
        }
    }
    if sup.is_finite() {
        out = SBounds { sup, inf, norm: sup.abs().max(inf.abs()) };
    }
    Ok(out)
}

/// Pointwise `‖S(p)‖` over the samples (max over times), paired with the
/// chart distance to `p0`.
fn s_norm_profile(
    m: &ManifoldSpec,
    fp: &FieldPack,
    samples: &SampleSet,
    times: &[f64],
    p0: &[f64],
) -> Result<Vec<(f64, f64)>, crate::Error> {
    let mut out = Vec::with_capacity(samples.len());
    for p in &samples.points {
        let single = SampleSet { points: vec![p.clone()], directions: vec![Vec::new()], region: String::new() };
        out.push((distance(p, p0), estimate_s_bounds(m, fp, &single, times)?.norm));
    }
    Ok(out)
}

/// Min and max of `vᵀ A v / vᵀ g v` for symmetric `A` (symmetrised here) and
/// positive definite `g`.
fn extreme_rayleigh(a: &Matrix<f64>, g: &Matrix<f64>) -> (f64, f64) {
    let n = g.dim();
    let sym = Matrix::from_fn(n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
    let l = g.cholesky().expect("Riemannian metric is positive definite");
    // B = L⁻¹ A L⁻ᵀ, built column by column with forward substitution
    let solve_lower = |b: &[f64]| -> Vec<f64> {
        let mut x = vec![0.0; n];
        for i in 0..n {
            let s: f64 = (0..i).map(|k| l[(i, k)] * x[k]).sum();
            x[i] = (b[i] - s) / l[(i, i)];
        }
        x
    };
    let cols: Vec<Vec<f64>> = (0..n).map(|j| solve_lower(&(0..n).map(|i| sym[(i, j)]).collect::<Vec<_>>())).collect();
    // cols[j] = L⁻¹ A e_j; rows of (L⁻¹ A) transposed give A L⁻ᵀ after a second solve
    let half: Matrix<f64> = Matrix::from_fn(n, |i, j| cols[j][i]);
    let rows: Vec<Vec<f64>> = (0..n).map(|i| solve_lower(&(0..n).map(|j| half[(i, j)]).collect::<Vec<_>>())).collect();
    let b = Matrix::from_fn(n, |i, j| 0.5 * (rows[i][j] + rows[j][i]));
    let eig = b.symmetric_eigenvalues();
    (eig[0], eig[n - 1])
}

fn distance(p: &[f64], p0: &[f64]) -> f64 {
    p.iter().zip(p0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
}

/// Fits `f ≤ A d^power + C` and classifies the growth of the envelope.
///
/// `A, C ≥ 0` minimise `A·mean(d^power) + C` subject to covering every
/// sample; the objective is convex and piecewise linear in `A`.
pub fn fit_growth(samples: &[(f64, f64)], power: u32) -> GrowthFit {
    let phi: Vec<f64> = samples.iter().map(|&(d, _)| d.powi(power as i32)).collect();
    let f: Vec<f64> = samples.iter().map(|&(_, f)| f).collect();
    let max_distance = samples.iter().map(|s| s.0).fold(0.0, f64::max);
    let c_for = |a: f64| f.iter().zip(&phi).map(|(fi, pi)| fi - a * pi).fold(0.0, f64::max);
    let mean_phi = if phi.is_empty() { 0.0 } else { phi.iter().sum::<f64>() / phi.len() as f64 };
    let objective = |a: f64| a * mean_phi + c_for(a);
    let a_hi = f
        .iter()
        .zip(&phi)
        .filter(|(_, &p)| p > 0.0)
        .map(|(fi, pi)| fi / pi)
        .fold(0.0, f64::max);
    let (mut lo, mut hi) = (0.0, a_hi);
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if objective(m1) <= objective(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let mut a = 0.5 * (lo + hi);
    if objective(0.0) <= objective(a) {
        a = 0.0;
    }
    let c = c_for(a);

    let slope = envelope_slope(samples, max_distance);
    let class = match slope {
        None => GrowthClass::Bounded,
        Some(s) if power == 1 => {
            if s > SUPERLINEAR_SLOPE {
                GrowthClass::Superlinear
            } else if s < 0.8 {
                GrowthClass::Sublinear
            } else {
                GrowthClass::Linear
            }
        }
        Some(s) => {
            if s > SUPERQUADRATIC_SLOPE {
                GrowthClass::Superquadratic
            } else if s < 1.8 {
                GrowthClass::Subquadratic
            } else {
                GrowthClass::Quadratic
            }
        }
    };
    let within = !matches!(class, GrowthClass::Superlinear | GrowthClass::Superquadratic);
    GrowthFit { power, a, c, slope, class, within, samples: samples.len(), max_distance }
}

/// Regression slope of `log max f` against `log d` over the outer decile of
/// equal-width distance bins; `None` when the envelope there is not positive.
fn envelope_slope(samples: &[(f64, f64)], max_distance: f64) -> Option<f64> {
    if max_distance <= 0.0 {
        return None;
    }
    let mut bins: Vec<Option<(f64, f64)>> = vec![None; ENVELOPE_BINS];
    for &(d, f) in samples {
        let b = ((d / max_distance * ENVELOPE_BINS as f64) as usize).min(ENVELOPE_BINS - 1);
        if bins[b].is_none_or(|(_, best)| f > best) {
            bins[b] = Some((d, f));
        }
    }
    let outer = ENVELOPE_BINS * 9 / 10;
    let pts: Vec<(f64, f64)> = bins[outer..]
        .iter()
        .flatten()
        .filter(|(d, f)| *d > 0.0 && *f > 0.0)
        .map(|(d, f)| (d.ln(), f.ln()))
        .collect();
    if pts.len() < 2 {
        // a single positive bin carries no trend; zero envelope is bounded
        return if pts.is_empty() { None } else { Some(0.0) };
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return Some(0.0);
    }
    Some(sxy / sxx)
}

/// `‖X‖_g` against distance, maximised over `times`.
pub fn check_linear_growth(
    m: &ManifoldSpec,
    fp: &FieldPack,
    samples: &SampleSet,
    times: &[f64],
    p0: &[f64],
) -> Result<GrowthFit, crate::Error> {
    growth_of(samples, p0, 1, |p| {
        let g = m.metric_at(p)?;
        let mut worst = 0.0f64;
        for &t in times {
            if let Some(x) = fp.vector_at(p, Some(t))? {
                worst = worst.max(g.bilinear(&x, &x).max(0.0).sqrt());
            }
        }
        Ok(worst)
    })
}

/// `‖∇V‖_g` against distance, maximised over `times`.
pub fn check_gradient_growth(
    m: &ManifoldSpec,
    fp: &FieldPack,
    samples: &SampleSet,
    times: &[f64],
    p0: &[f64],
) -> Result<GrowthFit, crate::Error> {
    growth_of(samples, p0, 1, |p| {
        let g = m.metric_at(p)?;
        let mut worst = 0.0f64;
        for &t in times {
            let grad = fp.gradient(m, p, Some(t))?;
            worst = worst.max(g.bilinear(&grad, &grad).max(0.0).sqrt());
        }
        Ok(worst)
    })
}

/// A scalar `U(p, t)` against squared distance, maximised over `times`.
pub fn check_quadratic_growth(
    samples: &SampleSet,
    times: &[f64],
    p0: &[f64],
    u: impl Fn(&[f64], f64) -> Result<f64, crate::Error>,
) -> Result<GrowthFit, crate::Error> {
    growth_of(samples, p0, 2, |p| {
        let mut worst = f64::NEG_INFINITY;
        for &t in times {
            worst = worst.max(u(p, t)?);
        }
        Ok(worst)
    })
}

fn growth_of(
    samples: &SampleSet,
    p0: &[f64],
    power: u32,
    f: impl Fn(&[f64]) -> Result<f64, crate::Error>,
) -> Result<GrowthFit, crate::Error> {
    let mut pairs = Vec::with_capacity(samples.len());
    for p in &samples.points {
        pairs.push((distance(p, p0), f(p)?));
    }
    Ok(fit_growth(&pairs, power))
}

fn growth_check(name: &str, fit: &Result<GrowthFit, crate::Error>) -> HypothesisCheck {
    match fit {
        Ok(f) => HypothesisCheck::pass_if(
            name,
            f.within,
            f.slope,
            f.samples,
            format!("{:?} growth, envelope A = {:.6e}, C = {:.6e}", f.class, f.a, f.c).to_lowercase(),
        ),
        Err(e) => HypothesisCheck::new(name, Verdict::Fail, None, 0, e.to_string()),
    }
}

/// Dispatches to the Riemannian growth criteria (or the compact clause).
pub fn check_riemannian(m: &ManifoldSpec, fp: &FieldPack, cfg: &CriteriaConfig) -> CriterionReport {
    let samples = domain_samples(m, &cfg.sampling);
    let mut r = CriterionReport::new("Riemannian growth conditions", samples.region.clone());
    if m.signature() != Signature::Riemannian {
        r.hypotheses.push(HypothesisCheck::new(
            "riemannian",
            Verdict::Fail,
            None,
            0,
            "growth checks refused on Lorentzian metrics: unit spheres are not compact",
        ));
        return r;
    }
    let times = cfg.times(fp.is_time_dependent());
    let evaluates = fields_evaluate(m, fp, &samples, &times);

    if m.is_compact() {
        r.criterion = "compact Riemannian manifold".into();
        r.hypotheses.push(HypothesisCheck::new("compact", Verdict::Pass, None, 0, "bounded fundamental domain"));
        r.hypotheses.push(match evaluates {
            Ok(()) => HypothesisCheck::new("fields-smooth", Verdict::Pass, None, samples.len(), "all fields finite on samples"),
            Err(e) => HypothesisCheck::new("fields-smooth", Verdict::Fail, None, 0, e.to_string()),
        });
        if r.all_pass() {
            r.prediction = Prediction::Complete;
        }
        return r;
    }

    r.caveats.push(DISTANCE_CAVEAT.to_string());
    r.caveats.push(format!("non-compact manifold: checks hold on the sampled region only ({})", samples.region));
    r.hypotheses.push(HypothesisCheck::pass_if(
        "base-complete",
        m.declared_complete(),
        None,
        0,
        if m.declared_complete() { "declared complete by the scenario" } else { "completeness of (M,g) not declared" },
    ));
    let p0 = cfg.sampling.region_center.clone().unwrap_or_else(|| vec![0.0; m.dim()]);

    let s_check = match s_norm_profile(m, fp, &samples, &times, &p0) {
        Ok(profile) => {
            let fit = fit_growth(&profile, 1);
            let bounded = fit.slope.is_none_or(|s| s <= BOUNDED_SLOPE);
            let max = profile.iter().map(|p| p.1).fold(0.0, f64::max);
            let check = HypothesisCheck::pass_if(
                "s-bounded",
                bounded,
                Some(max),
                profile.len(),
                format!("max ||S|| = {max:.6e}, envelope slope {:?}", fit.slope),
            );
            r.fits.push(("s-norm".into(), fit));
            check
        }
        Err(e) => HypothesisCheck::new("s-bounded", Verdict::Fail, None, 0, e.to_string()),
    };
    r.hypotheses.push(s_check);

    let drive = if fp.vector().is_some() {
        let fit = check_linear_growth(m, fp, &samples, &times, &p0);
        let h = growth_check("x-linear-growth", &fit);
        if let Ok(f) = fit {
            r.fits.push(("x".into(), f));
        }
        r.criterion = "bounded S with linearly growing X".into();
        h
    } else if fp.potential().is_some() {
        let grad = check_gradient_growth(m, fp, &samples, &times, &p0);
        let grad_check = growth_check("grad-v-linear-growth", &grad);
        if let Ok(f) = grad {
            r.fits.push(("grad-v".into(), f));
        }
        if grad_check.verdict == Verdict::Pass {
            r.criterion = "bounded S with linearly growing grad V".into();
            grad_check
        } else {
            r.criterion = "bounded S with quadratically bounded -V and |dV/dt|".into();
            r.hypotheses.push(grad_check.clone());
            let neg = check_quadratic_growth(&samples, &times, &p0, |p, t| Ok(-fp.potential_at(p, Some(t))?));
            let neg_check = growth_check("minus-v-quadratic-growth", &neg);
            if let Ok(f) = neg {
                r.fits.push(("minus-v".into(), f));
            }
            let rate_check = if fp.is_time_dependent() {
                let rate = check_quadratic_growth(&samples, &times, &p0, |p, t| Ok(fp.potential_rate(p, Some(t))?.abs()));
                let h = growth_check("v-rate-quadratic-growth", &rate);
                if let Ok(f) = rate {
                    r.fits.push(("v-rate".into(), f));
                }
                h
            } else {
                HypothesisCheck::new("v-rate-quadratic-growth", Verdict::Pass, Some(0.0), 0, "V is autonomous")
            };
            // either sufficient condition on V will do; drop the failed gradient check
            let ok = neg_check.verdict == Verdict::Pass && rate_check.verdict == Verdict::Pass;
            if ok {
                r.hypotheses.pop();
                r.hypotheses.push(HypothesisCheck::new(
                    "grad-v-linear-growth",
                    Verdict::NotApplicable,
                    grad_check.measured,
                    grad_check.samples,
                    format!("{} (superseded by the quadratic bound on -V)", grad_check.note),
                ));
            }
            r.hypotheses.push(neg_check);
            rate_check
        }
    } else {
        r.criterion = "bounded S with linearly growing X".into();
        HypothesisCheck::new("x-linear-growth", Verdict::Pass, Some(0.0), 0, "X = 0: linear (trivially)")
    };
    r.hypotheses.push(drive);

    let decisive = r.hypotheses.iter().all(|h| h.verdict != Verdict::Fail);
    if decisive && evaluates.is_ok() {
        r.prediction = Prediction::Complete;
    }
    r
}

fn fields_evaluate(m: &ManifoldSpec, fp: &FieldPack, samples: &SampleSet, times: &[f64]) -> Result<(), crate::Error> {
    for p in &samples.points {
        m.metric_at(p)?;
        for &t in times {
            if fp.has_force() {
                fp.force_at(p, Some(t))?;
            }
            fp.drive_at(m, p, Some(t))?;
            if fp.potential().is_some() {
                fp.potential_at(p, Some(t))?;
            }
        }
    }
    Ok(())
}
