#![allow(dead_code)]

use rand::Rng;
use robustprice::{Bounds, DistributionClass, InformationSet};

pub fn random_bounds<R: Rng>(rng: &mut R) -> Bounds {
    let v_lo = if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.5..5.0) };
    let v_hi = f64::max(v_lo, 1.0) * rng.gen_range(3.0f64.ln()..200.0f64.ln()).exp();
    Bounds::new(v_lo, v_hi).unwrap()
}

/// `n` distinct interior prices, log-uniform and at least 0.1% of the width apart.
pub fn random_prices<R: Rng>(rng: &mut R, bounds: &Bounds, n: usize) -> Vec<f64> {
    let lo = if bounds.v_lo() > 0.0 { bounds.v_lo() } else { 1e-2 * bounds.v_hi() };
    let gap = 1e-3 * bounds.width();
    loop {
        let mut prices: Vec<f64> = (0..n).map(|_| lo * rng.gen_range(0.0..(bounds.v_hi() / lo).ln()).exp()).collect();
        prices.sort_by(f64::total_cmp);
        let mut prev = bounds.v_lo();
        let spaced = prices.iter().all(|&p| {
            let ok = p - prev > gap;
            prev = p;
            ok
        }) && bounds.v_hi() - prev > gap;
        if spaced {
            return prices;
        }
    }
}

/// A regular-feasible set: Γ⁻¹(q) is built as a convex increasing polyline.
pub fn random_regular<R: Rng>(rng: &mut R, bounds: Bounds, n: usize) -> InformationSet {
    let prices = random_prices(rng, &bounds, n);
    let mut points = Vec::with_capacity(n);
    let (mut x, mut prev, mut slope) = (0.0f64, bounds.v_lo(), 0.0f64);
    for (k, &p) in prices.iter().enumerate() {
        slope = if k == 0 {
            let q1: f64 = rng.gen_range(0.05..0.95);
            (1.0 / q1 - 1.0) / (p - prev)
        } else {
            slope * (1.0 + rng.gen_range(0.0..3.0))
        };
        x += slope * (p - prev);
        prev = p;
        points.push((p, 1.0 / (1.0 + x)));
    }
    InformationSet::new(bounds, points).unwrap()
}

/// A general-feasible set with strictly decreasing rates.
pub fn random_general<R: Rng>(rng: &mut R, bounds: Bounds, n: usize) -> InformationSet {
    let prices = random_prices(rng, &bounds, n);
    let mut rates: Vec<f64> = (0..n).map(|_| rng.gen_range(0.001..0.999)).collect();
    rates.sort_by(|a, b| b.total_cmp(a));
    InformationSet::new(bounds, prices.into_iter().zip(rates)).unwrap()
}

pub fn random_class<R: Rng>(rng: &mut R) -> DistributionClass {
    if rng.gen_bool(0.5) {
        DistributionClass::Regular
    } else {
        DistributionClass::General
    }
}

/// A random feasible set for `class` with `n` interior points.
pub fn random_set<R: Rng>(rng: &mut R, class: DistributionClass, n: usize) -> InformationSet {
    let bounds = random_bounds(rng);
    match class {
        DistributionClass::Regular => random_regular(rng, bounds, n),
        DistributionClass::General => random_general(rng, bounds, n),
    }
}

/// Independent convexity check of Γ⁻¹ through sampled `(v, q)` pairs.
pub fn gamma_inv_is_convex(samples: &[(f64, f64)], rel_tol: f64) -> bool {
    let pts: Vec<(f64, f64)> = samples.iter().filter(|&&(_, q)| q > 0.0).map(|&(v, q)| (v, 1.0 / q - 1.0)).collect();
    pts.windows(3).all(|w| {
        let s1 = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
        let s2 = (w[2].1 - w[1].1) / (w[2].0 - w[1].0);
        s1 <= s2 + rel_tol * s1.abs().max(s2.abs()).max(1.0)
    })
}
