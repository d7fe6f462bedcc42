//! Privacy metrics: Jensen–Shannon divergence between feature histograms
//! before and after mitigation, and the privacy-utility sweep.

mod sweep;

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use sweep::{
    cell_metrics, mean_jsd, run_clip, run_put_sweep, Clip, ClipOutcome, CorpusSpec, Executor, PutCell, Sequential,
    SweepGrid, SweepParams,
};

use crate::math;
use crate::{Error, Result};

const NORM_TOL: f64 = 1e-9;

fn check_distribution(p: &[f64], name: &str) -> Result<()> {
    if p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Validation(format!("{name} has negative or non-finite mass")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > NORM_TOL {
        return Err(Error::Validation(format!("{name} sums to {s}, not 1")));
    }
    Ok(())
}

fn kl_to_mixture(p: &[f64], m: &[f64]) -> f64 {
    p.iter()
        .zip(m)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, mi)| pi * math::log2(pi / mi))
        .sum()
}

/// Base-2 Jensen–Shannon divergence, in `[0, 1]`.
pub fn jsd(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Validation(format!(
            "distribution lengths differ: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    check_distribution(p, "p")?;
    check_distribution(q, "q")?;
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| (a + b) / 2.0).collect();
    let d = 0.5 * kl_to_mixture(p, &m) + 0.5 * kl_to_mixture(q, &m);
    Ok(d.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureHistogramPair {
    pub feature_name: String,
    pub bin_edges: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl FeatureHistogramPair {
    pub fn jsd(&self) -> Result<f64> {
        jsd(&self.p, &self.q)
    }
}

/// Equal-width histograms of `g` and `g_prime` over the range of their
/// union. A zero range gives a single bin.
pub fn histogram_pair(feature_name: &str, g: &[f64], g_prime: &[f64], bins: usize) -> Result<FeatureHistogramPair> {
    if g.is_empty() || g_prime.is_empty() {
        return Err(Error::InsufficientData(format!(
            "histogram of {feature_name} needs values on both sides"
        )));
    }
    if bins < 1 {
        return Err(Error::Config("bins must be >= 1".into()));
    }
    if g.iter().chain(g_prime).any(|v| !v.is_finite()) {
        return Err(Error::Validation(format!("{feature_name} has non-finite values")));
    }
    let lo = g.iter().chain(g_prime).copied().fold(f64::INFINITY, f64::min);
    let hi = g.iter().chain(g_prime).copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == lo {
        return Ok(FeatureHistogramPair {
            feature_name: feature_name.into(),
            bin_edges: vec![lo, hi],
            p: vec![1.0],
            q: vec![1.0],
        });
    }
    let width = (hi - lo) / bins as f64;
    let bin_edges = (0..=bins)
        .map(|i| if i == bins { hi } else { lo + i as f64 * width })
        .collect();
    let hist = |values: &[f64]| {
        let mut h = vec![0.0; bins];
        for v in values {
            let i = (math::floor((v - lo) / (hi - lo) * bins as f64) as usize).min(bins - 1);
            h[i] += 1.0;
        }
        let n = values.len() as f64;
        h.iter_mut().for_each(|c| *c /= n);
        h
    };
    Ok(FeatureHistogramPair {
        feature_name: feature_name.into(),
        bin_edges,
        p: hist(g),
        q: hist(g_prime),
    })
}
