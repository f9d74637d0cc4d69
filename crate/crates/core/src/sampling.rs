//! Deterministic sample sets standing in for "everywhere on M".
//!
//! Points come from a Halton sequence over the fundamental domain (or over a
//! ball around the region centre on non-compact charts); directions come from
//! a seeded ChaCha stream so every report is reproducible.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::geometry::{ManifoldSpec, QuotientSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub points: usize,
    pub directions: usize,
    /// Radius of the sampled region along non-periodic axes.
    pub region_radius: f64,
    /// Centre `p₀` of the sampled region (origin when `None`).
    pub region_center: Option<Vec<f64>>,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self { points: 1000, directions: 8, region_radius: 10.0, region_center: None, seed: 0x5eed }
    }
}

/// Sample points with their random unit directions.
#[derive(Debug, Clone)]
pub struct SampleSet {
    pub points: Vec<Vec<f64>>,
    pub directions: Vec<Vec<Vec<f64>>>,
    /// Human readable description of the region that was sampled.
    pub region: String,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&[f64], &[f64])> {
        self.points
            .iter()
            .zip(&self.directions)
            .flat_map(|(p, dirs)| dirs.iter().map(move |d| (p.as_slice(), d.as_slice())))
    }
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Radical inverse of `index` in `base`.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while index > 0 {
        r += f * (index % base) as f64;
        index /= base;
        f *= inv;
    }
    r
}

/// The `index`-th Halton point in `[0,1)^dim`.
pub fn halton(index: u64, dim: usize) -> Vec<f64> {
    (0..dim).map(|d| radical_inverse(index, PRIMES[d % PRIMES.len()])).collect()
}

pub fn random_unit_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if len > 1e-12 {
            return v.into_iter().map(|x| x / len).collect();
        }
    }
}

/// Samples the fundamental domain of `m` (or a region of the chart when `m`
/// has no bounded quotient).
pub fn domain_samples(m: &ManifoldSpec, cfg: &SamplingConfig) -> SampleSet {
    let n = m.dim();
    let center = cfg.region_center.clone().unwrap_or_else(|| vec![0.0; n]);
    let r = cfg.region_radius;
    let periods: Vec<Option<f64>> = match m.quotient() {
        Some(QuotientSpec::Lattice(p)) => p.clone(),
        _ => vec![None; n],
    };
    let scaling = match m.quotient() {
        Some(QuotientSpec::Scaling(l)) => Some(*l),
        _ => None,
    };
    let domain = m.domain();
    let bounds: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            if let Some(l) = scaling {
                (-l, l)
            } else if let Some(l) = periods[i] {
                (0.0, l)
            } else {
                let lo = domain.lower[i].map_or(center[i] - r, |b| b.max(center[i] - r));
                let hi = domain.upper[i].map_or(center[i] + r, |b| b.min(center[i] + r));
                (lo, hi)
            }
        })
        .collect();

    let accept = |p: &[f64]| -> bool {
        if !domain.contains(p) {
            return false;
        }
        if let Some(l) = scaling {
            let rr = p.iter().map(|x| x * x).sum::<f64>().sqrt();
            return (1.0..l).contains(&rr);
        }
        let d2: f64 = (0..n).filter(|&i| periods[i].is_none()).map(|i| (p[i] - center[i]).powi(2)).sum();
        d2 <= r * r
    };

    let mut points = Vec::with_capacity(cfg.points);
    let mut index = 1u64;
    let max_tries = (cfg.points as u64 + 1) * 200;
    while points.len() < cfg.points && index < max_tries {
        let u = halton(index, n);
        index += 1;
        let p: Vec<f64> = u.iter().zip(&bounds).map(|(x, (lo, hi))| lo + x * (hi - lo)).collect();
        if accept(&p) {
            points.push(p);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let directions = points
        .iter()
        .map(|_| (0..cfg.directions).map(|_| random_unit_vector(&mut rng, n)).collect())
        .collect();

    let region = if let Some(l) = scaling {
        format!("fundamental annulus 1 <= |p| < {l}")
    } else if m.is_compact() {
        format!("fundamental cell with periods {periods:?}")
    } else {
        format!("Euclidean chart ball of radius {r} about {center:?} (non-periodic axes), intersected with the chart domain")
    };
    SampleSet { points, directions, region }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exprlang::CoordinateFrame;
    use crate::geometry::{ChartDomain, Signature};

    #[test]
    fn halton_is_low_discrepancy_in_one_dimension() {
        let xs: Vec<f64> = (1..=7).map(|i| radical_inverse(i, 2)).collect();
        assert_eq!(xs, vec![0.5, 0.25, 0.75, 0.125, 0.625, 0.375, 0.875]);
    }

    #[test]
    fn samples_stay_in_fundamental_domains() {
        let f = CoordinateFrame::new(["u", "v"], false).unwrap();
        let cp = ManifoldSpec::from_strings(f, &[&["0", "1/(u^2+v^2)"], &["1/(u^2+v^2)", "0"]], Signature::Lorentzian)
            .unwrap()
            .with_domain(ChartDomain::excluding_origin(2, 1e-8))
            .unwrap()
            .with_quotient(Some(QuotientSpec::Scaling(2.0)))
            .unwrap();
        let s = domain_samples(&cp, &SamplingConfig::default());
        assert_eq!(s.len(), 1000);
        for p in &s.points {
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            assert!((1.0..2.0).contains(&r));
        }
        assert_eq!(s.pairs().count(), 8000);

        let f = CoordinateFrame::new(["x"], false).unwrap();
        let line = ManifoldSpec::from_strings(f, &[&["1"]], Signature::Riemannian).unwrap();
        let cfg = SamplingConfig { region_radius: 100.0, ..Default::default() };
        let s = domain_samples(&line, &cfg);
        assert!(s.points.iter().all(|p| p[0].abs() <= 100.0));
    }

    #[test]
    fn sampling_is_deterministic() {
        let f = CoordinateFrame::new(["x", "y"], false).unwrap();
        let m = ManifoldSpec::from_strings(f, &[&["1", "0"], &["0", "1"]], Signature::Riemannian).unwrap();
        let a = domain_samples(&m, &SamplingConfig::default());
        let b = domain_samples(&m, &SamplingConfig::default());
        assert_eq!(a.points, b.points);
        assert_eq!(a.directions, b.directions);
    }
}
