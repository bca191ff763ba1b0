//! Closed-form ccdf envelopes over an ambiguity set.
//!
//! Two segment families bound every distribution in a class that passes
//! through two observations `(s, q_s)` and `(s', q_s')`:
//!
//! * general class: a step, `1` before `s` and `q_s'` from `s` on;
//! * regular class: a line in `Γ⁻¹` space,
//!   `Γ(Γ⁻¹(q_s) + β (v − s))` with `β = (Γ⁻¹(q_s') − Γ⁻¹(q_s)) / (s' − s)`.
//!
//! Chaining them between consecutive knots gives the lower envelope `L̄`;
//! extrapolating the neighbouring segments gives the upper envelope `Ū`.
//! Both are stored as a [`PiecewiseCcdf`], which distinguishes the value at a
//! price from the left limit there. Revenue is always `p · F̄(p⁻)`.

use serde::{Deserialize, Serialize};

use crate::domain::{gamma_inv_raw, gamma_raw, is_feasible, Bounds, DistributionClass, InformationSet};
use crate::error::{PricingError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SegmentKind {
    GeneralFlat,
    RegularGammaLinear,
}

impl SegmentKind {
    pub fn for_class(class: DistributionClass) -> Self {
        match class {
            DistributionClass::General => SegmentKind::GeneralFlat,
            DistributionClass::Regular => SegmentKind::RegularGammaLinear,
        }
    }
}

/// One extremal ccdf through an anchor `(s, q_s)` and an endpoint `(s', q_s')`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentCcdf {
    pub kind: SegmentKind,
    pub anchor: (f64, f64),
    pub endpoint: (f64, f64),
}

impl SegmentCcdf {
    pub fn new(kind: SegmentKind, anchor: (f64, f64), endpoint: (f64, f64)) -> Result<Self> {
        let ((s, qs), (t, qt)) = (anchor, endpoint);
        if !(s <= t) || !(0.0..=1.0).contains(&qs) || !(0.0..=1.0).contains(&qt) || qt > qs {
            return Err(PricingError::Domain(format!(
                "segment needs s <= s' and 1 >= q_s >= q_s' >= 0, got ({s}, {qs}) -> ({t}, {qt})"
            )));
        }
        Ok(Self { kind, anchor, endpoint })
    }

    /// `Γ⁻¹(q_s)`.
    pub fn alpha(&self) -> f64 {
        gamma_inv_raw(self.anchor.1)
    }

    /// Slope of the segment in `Γ⁻¹` space; `∞` when the endpoint rate is zero.
    pub fn beta(&self) -> f64 {
        let (a, b) = (gamma_inv_raw(self.anchor.1), gamma_inv_raw(self.endpoint.1));
        if a.is_infinite() || b.is_infinite() {
            return f64::INFINITY;
        }
        (b - a) / (self.endpoint.0 - self.anchor.0)
    }

    /// Whether the segment can be extrapolated as a bound: a zero rate at the
    /// endpoint makes the `Γ⁻¹` line vertical.
    pub(crate) fn is_proper(&self) -> bool {
        self.endpoint.1 > 0.0 && self.endpoint.0 > self.anchor.0
    }

    /// Value on `[v_lo, v_hi)` with extended arithmetic; `0` from `v_hi` on.
    /// Regular segments extrapolated to the left may exceed one.
    pub(crate) fn eval(&self, bounds: &Bounds, v: f64) -> f64 {
        if v >= bounds.v_hi() {
            return 0.0;
        }
        match self.kind {
            SegmentKind::GeneralFlat => {
                if v < self.anchor.0 {
                    1.0
                } else {
                    self.endpoint.1
                }
            }
            SegmentKind::RegularGammaLinear => self.eval_gamma_line(v),
        }
    }

    /// The `Γ`-linear closed form without the support cut-off.
    pub(crate) fn eval_gamma_line(&self, v: f64) -> f64 {
        let s = self.anchor.0;
        if v == s {
            return self.anchor.1;
        }
        let alpha = self.alpha();
        if alpha.is_infinite() {
            return 0.0;
        }
        let beta = self.beta();
        if beta.is_infinite() {
            return if v > s { 0.0 } else { f64::INFINITY };
        }
        gamma_raw(alpha + beta * (v - s))
    }

    /// The segment as a line `Γ⁻¹ F̄(v) = alpha + beta (v − s)`, when finite.
    fn gamma_line(&self) -> Option<(f64, f64, f64)> {
        let (alpha, beta) = (self.alpha(), self.beta());
        (alpha.is_finite() && beta.is_finite()).then_some((self.anchor.0, alpha, beta))
    }
}

/// Checked evaluation of a single segment on the support.
pub fn segment_ccdf(seg: &SegmentCcdf, bounds: &Bounds, v: f64) -> Result<f64> {
    bounds.check_price(v)?;
    Ok(seg.eval(bounds, v))
}

/// The ccdf on one knot interval: `min(1, min_k segment_k)`, clipped to `[0, 1]`.
/// An empty list means the constant `1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub segments: Vec<SegmentCcdf>,
}

impl Piece {
    fn eval(&self, bounds: &Bounds, v: f64) -> f64 {
        if v >= bounds.v_hi() {
            return 0.0;
        }
        self.segments.iter().map(|s| s.eval(bounds, v)).fold(1.0_f64, f64::min).max(0.0)
    }
}

/// A ccdf given in closed form on each knot interval `[p_i, p_{i+1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseCcdf {
    bounds: Bounds,
    knots: Vec<(f64, f64)>,
    pieces: Vec<Piece>,
}

impl PiecewiseCcdf {
    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// `F̄(v)`; `1` below the support and `0` from `v_hi` on.
    pub fn value_at(&self, v: f64) -> f64 {
        if v < self.bounds.v_lo() {
            return 1.0;
        }
        if v >= self.bounds.v_hi() {
            return 0.0;
        }
        let i = self.knots.partition_point(|&(p, _)| p <= v) - 1;
        self.pieces[i].eval(&self.bounds, v)
    }

    /// `F̄(v⁻) = ℙ(value ≥ v)`. Exact at knots: the left limit at `p_i` is `q_i`.
    pub fn left_limit(&self, v: f64) -> f64 {
        if v <= self.bounds.v_lo() {
            return 1.0;
        }
        if v > self.bounds.v_hi() {
            return 0.0;
        }
        let idx = self.knots.partition_point(|&(p, _)| p < v);
        if self.knots[idx].0 == v {
            return self.knots[idx].1;
        }
        // v lies strictly inside [p_{idx-1}, p_idx)
        self.pieces[idx - 1].eval(&self.bounds, v)
    }

    /// Left limits at an ascending list of prices, in one pass.
    pub fn left_limits_sorted(&self, prices: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(prices.len());
        let mut idx = 0usize;
        for &v in prices {
            if v <= self.bounds.v_lo() {
                out.push(1.0);
                continue;
            }
            if v > self.bounds.v_hi() {
                out.push(0.0);
                continue;
            }
            while self.knots[idx].0 < v {
                idx += 1;
            }
            if self.knots[idx].0 == v {
                out.push(self.knots[idx].1);
            } else {
                out.push(self.pieces[idx - 1].eval(&self.bounds, v));
            }
        }
        out
    }

    /// Prices inside knot intervals where the active bound switches between
    /// extrapolated segments (or reaches the cap at one).
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (i, piece) in self.pieces.iter().enumerate() {
            let (lo, hi) = (self.knots[i].0, self.knots[i + 1].0);
            let lines: Vec<_> = piece
                .segments
                .iter()
                .filter(|s| s.kind == SegmentKind::RegularGammaLinear)
                .filter_map(SegmentCcdf::gamma_line)
                .collect();
            // keep a crossing only where it is the active part of the bound
            let mut push = |v: f64, level: f64| {
                if v > lo && v < hi && v.is_finite() {
                    let here = piece.eval(&self.bounds, v);
                    if (here - level).abs() <= 1e-9 * level.max(1e-300) {
                        out.push(v);
                    }
                }
            };
            for (a, &(s1, a1, b1)) in lines.iter().enumerate() {
                if b1 != 0.0 {
                    // Γ⁻¹ line crosses zero: the segment meets the cap F̄ = 1
                    push(s1 - a1 / b1, 1.0);
                }
                for &(s2, a2, b2) in &lines[a + 1..] {
                    if (b1 - b2).abs() > 0.0 {
                        let v = (a2 - a1 - b2 * s2 + b1 * s1) / (b1 - b2);
                        push(v, gamma_raw(a1 + b1 * (v - s1)));
                    }
                }
            }
        }
        out.sort_by(f64::total_cmp);
        out
    }

    /// `Rev(p | F) = p · F̄(p⁻)`.
    pub fn revenue(&self, p: f64) -> Result<f64> {
        self.bounds.check_price(p)?;
        Ok(p * self.left_limit(p))
    }
}

/// `Rev(p | F) = p · ℙ(value ≥ p)`.
pub fn revenue(f: &PiecewiseCcdf, p: f64) -> Result<f64> {
    f.revenue(p)
}

fn require_feasible(info: &InformationSet, class: DistributionClass) -> Result<()> {
    if is_feasible(info, class) {
        Ok(())
    } else {
        Err(PricingError::Infeasible(class.name()))
    }
}

/// `L̄(·|I)`: the pointwise smallest ccdf consistent with `info` in `class`.
pub fn lower_envelope(info: &InformationSet, class: DistributionClass) -> Result<PiecewiseCcdf> {
    require_feasible(info, class)?;
    Ok(lower_envelope_unchecked(info, class))
}

pub(crate) fn lower_envelope_unchecked(info: &InformationSet, class: DistributionClass) -> PiecewiseCcdf {
    let kind = SegmentKind::for_class(class);
    let knots = info.points().to_vec();
    let pieces = knots
        .windows(2)
        .map(|w| Piece { segments: vec![SegmentCcdf { kind, anchor: w[0], endpoint: w[1] }] })
        .collect();
    PiecewiseCcdf { bounds: info.bounds(), knots, pieces }
}

/// `Ū(·|I)`: the pointwise largest ccdf consistent with `info` in `class`.
///
/// For the regular class the bound on `[p_i, p_{i+1})` is the minimum of the
/// neighbouring segments `i−1` (extended right) and `i+1` (extended left), capped
/// at one. A neighbour whose endpoint rate is zero has a vertical `Γ⁻¹` line and
/// gives no bound; this is what drops segment `N` from the interval `N−1`.
pub fn upper_envelope(info: &InformationSet, class: DistributionClass) -> Result<PiecewiseCcdf> {
    require_feasible(info, class)?;
    Ok(upper_envelope_unchecked(info, class))
}

pub(crate) fn upper_envelope_unchecked(info: &InformationSet, class: DistributionClass) -> PiecewiseCcdf {
    let knots = info.points().to_vec();
    let n_intervals = knots.len() - 1;
    let segment = |k: usize, kind| SegmentCcdf { kind, anchor: knots[k], endpoint: knots[k + 1] };
    let pieces = (0..n_intervals)
        .map(|i| {
            let mut segments = Vec::with_capacity(2);
            match class {
                DistributionClass::General => {
                    if i >= 1 {
                        segments.push(segment(i - 1, SegmentKind::GeneralFlat));
                    }
                }
                DistributionClass::Regular => {
                    if i >= 1 {
                        segments.push(segment(i - 1, SegmentKind::RegularGammaLinear));
                    }
                    if i + 1 < n_intervals {
                        let next = segment(i + 1, SegmentKind::RegularGammaLinear);
                        if next.is_proper() {
                            segments.push(next);
                        }
                    }
                }
            }
            Piece { segments }
        })
        .collect();
    PiecewiseCcdf { bounds: info.bounds(), knots, pieces }
}

/// `max_i p_i q_i`, which is the optimal revenue of `L̄(·|I)`.
pub fn optimal_revenue_of_envelope(info: &InformationSet, class: DistributionClass) -> Result<f64> {
    require_feasible(info, class)?;
    Ok(info.max_knot_revenue())
}

/// Virtual value `s − (1+α)/β` of a `Γ`-linear ccdf, which is constant in `v`.
pub fn constant_virtual_value(alpha: f64, beta: f64, s: f64) -> Result<f64> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(PricingError::Domain(format!("β must be positive and finite, got {beta}")));
    }
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(PricingError::Domain(format!("α must be non-negative and finite, got {alpha}")));
    }
    Ok(s - (1.0 + alpha) / beta)
}

/// Worst-case distribution for a candidate optimal price: the lower envelope of
/// `I ∪ {(r*, Ū(r*⁻|I))}`. Fails unless `r*` is certified.
pub fn worst_case_distribution(r_star: f64, info: &InformationSet, class: DistributionClass) -> Result<PiecewiseCcdf> {
    let amb = crate::robust_eval::Ambiguity::new(info.clone(), class)?;
    let cert = amb.certify(r_star)?;
    if !cert.is_member() {
        return Err(PricingError::NotCertified(r_star));
    }
    amb.worst_case(r_star)
}
