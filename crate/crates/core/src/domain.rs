//! Information sets, the Γ transform pair, and class feasibility.
//!
//! An information set is an ordered list of posted prices together with the
//! conversion rate observed at each of them, i.e. `ℙ(v ≥ p)`. The support
//! endpoints are always present as sentinels: `(v_lo, 1)` first and
//! `(v_hi, 0)` last.
//!
//! Regular distributions are handled through the transform `Γ(x) = 1/(1+x)`:
//! a ccdf is regular exactly when `Γ⁻¹ ∘ F̄` is convex, so feasibility of an
//! information set reduces to a monotone-slope test in `Γ⁻¹` space.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{PricingError, Result};

/// Relative tolerance on the `Γ⁻¹` slope sequence.
pub const SLOPE_REL_TOL: f64 = 1e-9;
/// Absolute tolerance on the monotonicity of conversion rates.
pub const RATE_ABS_TOL: f64 = 1e-12;
/// Two prices closer than this (relative to the support width) are the same price.
const PRICE_MERGE_TOL: f64 = 1e-12;

/// Support of the buyer's value distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    v_lo: f64,
    v_hi: f64,
}

impl Bounds {
    pub fn new(v_lo: f64, v_hi: f64) -> Result<Self> {
        if !(v_lo.is_finite() && v_hi.is_finite()) || v_lo < 0.0 || v_lo >= v_hi {
            return Err(PricingError::Domain(format!(
                "bounds must satisfy 0 <= v_lo < v_hi < inf, got [{v_lo}, {v_hi}]"
            )));
        }
        Ok(Self { v_lo, v_hi })
    }

    pub fn v_lo(&self) -> f64 {
        self.v_lo
    }

    pub fn v_hi(&self) -> f64 {
        self.v_hi
    }

    pub fn width(&self) -> f64 {
        self.v_hi - self.v_lo
    }

    pub fn contains(&self, p: f64) -> bool {
        p >= self.v_lo && p <= self.v_hi
    }

    /// Offset used to realize left limits `x⁻` as `x − δ`.
    pub fn left_limit_offset(&self) -> f64 {
        1e-9 * self.width()
    }

    pub(crate) fn check_price(&self, p: f64) -> Result<()> {
        if p.is_nan() || !self.contains(p) {
            return Err(PricingError::Domain(format!("price {p} outside [{}, {}]", self.v_lo, self.v_hi)));
        }
        Ok(())
    }
}

/// The non-parametric class the value distribution is assumed to belong to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistributionClass {
    /// Every distribution supported on the bounds.
    General,
    /// Distributions with a non-decreasing virtual value.
    Regular,
}

impl DistributionClass {
    pub fn name(&self) -> &'static str {
        match self {
            DistributionClass::General => "general",
            DistributionClass::Regular => "regular",
        }
    }
}

impl fmt::Display for DistributionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for DistributionClass {
    type Err = PricingError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "general" => Ok(DistributionClass::General),
            "regular" => Ok(DistributionClass::Regular),
            other => Err(PricingError::Domain(format!("unknown distribution class '{other}'"))),
        }
    }
}

/// A value of `Γ⁻¹`, i.e. an extended non-negative real. `Γ⁻¹(0) = ∞`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct GammaValue(f64);

impl GammaValue {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_nan() || value < 0.0 {
            return Err(PricingError::Domain(format!("Γ argument must be >= 0, got {value}")));
        }
        Ok(Self(value))
    }

    pub fn infinity() -> Self {
        Self(f64::INFINITY)
    }

    pub fn value(&self) -> f64 {
        self.0
    }

    pub fn is_infinite(&self) -> bool {
        self.0.is_infinite()
    }
}

/// `Γ(v) = 1/(1+v)` with `Γ(∞) = 0`.
pub fn gamma(v: GammaValue) -> f64 {
    gamma_raw(v.0)
}

/// `Γ⁻¹(q) = 1/q − 1` with `Γ⁻¹(0) = ∞`.
pub fn gamma_inv(q: f64) -> Result<GammaValue> {
    if q.is_nan() || !(0.0..=1.0).contains(&q) {
        return Err(PricingError::Domain(format!("Γ⁻¹ needs q in [0, 1], got {q}")));
    }
    Ok(GammaValue(gamma_inv_raw(q)))
}

/// Unchecked `Γ` on the extended line. Arguments at or below `-1` are the
/// limit of a decreasing line extrapolated past `F̄ = ∞`, reported as `∞`.
#[inline]
pub(crate) fn gamma_raw(x: f64) -> f64 {
    if x == f64::INFINITY {
        0.0
    } else if x <= -1.0 {
        f64::INFINITY
    } else {
        1.0 / (1.0 + x)
    }
}

#[inline]
pub(crate) fn gamma_inv_raw(q: f64) -> f64 {
    if q <= 0.0 {
        f64::INFINITY
    } else {
        1.0 / q - 1.0
    }
}

/// Observed prices and conversion rates, canonicalized.
///
/// Points are sorted by price, duplicate prices carrying the same rate are
/// merged, and the sentinels `(v_lo, 1)` and `(v_hi, 0)` are always present.
#[derive(Debug, Clone, PartialEq)]
pub struct InformationSet {
    bounds: Bounds,
    points: Vec<(f64, f64)>,
}

impl InformationSet {
    /// Builds a canonical information set. Sentinels may be given or omitted.
    pub fn new(bounds: Bounds, points: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut raw: Vec<(f64, f64)> = points.into_iter().collect();
        for &(p, q) in &raw {
            if !p.is_finite() || !bounds.contains(p) {
                return Err(PricingError::InvalidData(format!("price {p} outside [{}, {}]", bounds.v_lo, bounds.v_hi)));
            }
            if q.is_nan() || !(0.0..=1.0).contains(&q) {
                return Err(PricingError::InvalidData(format!("conversion rate {q} at price {p} outside [0, 1]")));
            }
        }
        raw.push((bounds.v_lo, 1.0));
        raw.push((bounds.v_hi, 0.0));
        raw.sort_by(|a, b| a.0.total_cmp(&b.0));

        let merge_tol = PRICE_MERGE_TOL * bounds.width();
        let mut points: Vec<(f64, f64)> = Vec::with_capacity(raw.len());
        for (p, q) in raw {
            if let Some(last) = points.last_mut() {
                if (p - last.0).abs() <= merge_tol {
                    if (q - last.1).abs() > RATE_ABS_TOL {
                        return Err(PricingError::InvalidData(format!(
                            "conflicting conversion rates {} and {q} at price {p}",
                            last.1
                        )));
                    }
                    // keep sentinel coordinates exact
                    if p == bounds.v_lo || p == bounds.v_hi {
                        *last = (p, q);
                    }
                    continue;
                }
            }
            points.push((p, q));
        }
        Ok(Self { bounds, points })
    }

    /// The set with only the two sentinels.
    pub fn endpoints(bounds: Bounds) -> Self {
        Self { bounds, points: vec![(bounds.v_lo, 1.0), (bounds.v_hi, 0.0)] }
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    /// All points including sentinels, `i = 0..=N+1`.
    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Observed points without the sentinels.
    pub fn interior(&self) -> &[(f64, f64)] {
        &self.points[1..self.points.len() - 1]
    }

    /// Number of observed prices `N`.
    pub fn len(&self) -> usize {
        self.points.len() - 2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn prices(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|&(p, _)| p)
    }

    /// Index `k` with `p_k == p`, if `p` is a knot.
    pub fn knot_index(&self, p: f64) -> Option<usize> {
        let tol = PRICE_MERGE_TOL * self.bounds.width();
        let idx = self.points.partition_point(|&(x, _)| x < p - tol);
        (idx < self.points.len() && (self.points[idx].0 - p).abs() <= tol).then_some(idx)
    }

    /// Returns a new set with one more observation.
    pub fn with_point(&self, p: f64, q: f64) -> Result<Self> {
        if let Some(k) = self.knot_index(p) {
            if (self.points[k].1 - q).abs() > RATE_ABS_TOL {
                return Err(PricingError::InvalidData(format!(
                    "conflicting conversion rates {} and {q} at price {p}",
                    self.points[k].1
                )));
            }
            return Ok(self.clone());
        }
        self.bounds.check_price(p)?;
        if q.is_nan() || !(0.0..=1.0).contains(&q) {
            return Err(PricingError::InvalidData(format!("conversion rate {q} outside [0, 1]")));
        }
        let idx = self.points.partition_point(|&(x, _)| x < p);
        let mut points = self.points.clone();
        points.insert(idx, (p, q));
        Ok(Self { bounds: self.bounds, points })
    }

    /// `max_i p_i q_i`, the optimal revenue of the lower envelope.
    pub fn max_knot_revenue(&self) -> f64 {
        self.points.iter().map(|&(p, q)| p * q).fold(0.0, f64::max)
    }

    /// The `Γ⁻¹` slopes `(Γ⁻¹(q_{i+1}) − Γ⁻¹(q_i)) / (p_{i+1} − p_i)` for
    /// `i = 0..N−1`; the final segment into `(v_hi, 0)` is not part of it.
    pub fn gamma_slopes(&self) -> Vec<f64> {
        let n = self.len();
        (0..n).map(|i| gamma_slope(self.points[i], self.points[i + 1])).collect()
    }

    pub fn is_feasible(&self, class: DistributionClass) -> bool {
        is_feasible(self, class)
    }
}

/// Slope in `Γ⁻¹` space between two observations; `∞` once the rate hits zero.
pub(crate) fn gamma_slope(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (ga, gb) = (gamma_inv_raw(a.1), gamma_inv_raw(b.1));
    if ga.is_infinite() || gb.is_infinite() {
        return f64::INFINITY;
    }
    (gb - ga) / (b.0 - a.0)
}

/// Whether some distribution of `class` is consistent with `info`.
pub fn is_feasible(info: &InformationSet, class: DistributionClass) -> bool {
    let pts = info.points();
    let monotone = pts.windows(2).all(|w| w[1].1 <= w[0].1 + RATE_ABS_TOL);
    if !monotone {
        return false;
    }
    match class {
        DistributionClass::General => true,
        DistributionClass::Regular => slopes_non_decreasing(&info.gamma_slopes()),
    }
}

pub(crate) fn slopes_non_decreasing(slopes: &[f64]) -> bool {
    slopes.windows(2).all(|w| {
        let (a, b) = (w[0], w[1]);
        if b == f64::INFINITY || b >= a {
            return true;
        }
        if a == f64::INFINITY {
            return false;
        }
        a - b <= SLOPE_REL_TOL * a.abs().max(b.abs())
    })
}

/// Wire format: `{"v_lo": .., "v_hi": .., "points": [[p, q], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InformationSetJson {
    pub v_lo: f64,
    pub v_hi: f64,
    #[serde(default)]
    pub points: Vec<[f64; 2]>,
}

impl TryFrom<InformationSetJson> for InformationSet {
    type Error = PricingError;

    fn try_from(raw: InformationSetJson) -> Result<Self> {
        let bounds = Bounds::new(raw.v_lo, raw.v_hi)?;
        InformationSet::new(bounds, raw.points.into_iter().map(|[p, q]| (p, q)))
    }
}

impl From<&InformationSet> for InformationSetJson {
    fn from(info: &InformationSet) -> Self {
        Self {
            v_lo: info.bounds.v_lo,
            v_hi: info.bounds.v_hi,
            points: info.points.iter().map(|&(p, q)| [p, q]).collect(),
        }
    }
}

impl Serialize for InformationSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        InformationSetJson::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for InformationSet {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = InformationSetJson::deserialize(deserializer)?;
        InformationSet::try_from(raw).map_err(serde::de::Error::custom)
    }
}
