//! Worst-case evaluation of pricing mechanisms.
//!
//! Nature's problem over an infinite-dimensional ambiguity set collapses to a
//! search over a single scalar, the optimal price `r*` of the adversarial
//! distribution. For a given `r*` the adversary's best response is the lower
//! envelope of the data extended with `(r*, Ū(r*⁻))`, and `r*` is admissible
//! exactly when that extension is feasible and its revenue dominates every
//! observed knot.

use serde::{Deserialize, Serialize};

use crate::domain::{Bounds, DistributionClass, InformationSet};
use crate::envelopes::{lower_envelope_unchecked, upper_envelope_unchecked, PiecewiseCcdf};
use crate::error::{PricingError, Result};
use crate::maximin::GridPartition;

/// Absolute slack on revenue units when testing dominance; ties are members.
pub const DOMINANCE_TOL: f64 = 1e-12;
/// Tolerance on the total weight of a mechanism.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

/// Outcome of testing whether `r*` can be an optimal price.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub r_star: f64,
    pub extended_feasible: bool,
    pub dominance: bool,
    /// `Ū(r*⁻|I)`, the largest conversion rate compatible with `r*`.
    pub q_star: f64,
}

impl Certificate {
    pub fn is_member(&self) -> bool {
        self.extended_feasible && self.dominance
    }
}

/// An information set together with its class and cached upper envelope.
#[derive(Debug, Clone)]
pub struct Ambiguity {
    info: InformationSet,
    class: DistributionClass,
    upper: PiecewiseCcdf,
    max_knot_revenue: f64,
}

impl Ambiguity {
    pub fn new(info: InformationSet, class: DistributionClass) -> Result<Self> {
        if !info.is_feasible(class) {
            return Err(PricingError::Infeasible(class.name()));
        }
        let upper = upper_envelope_unchecked(&info, class);
        let max_knot_revenue = info.max_knot_revenue();
        Ok(Self { info, class, upper, max_knot_revenue })
    }

    pub fn info(&self) -> &InformationSet {
        &self.info
    }

    pub fn class(&self) -> DistributionClass {
        self.class
    }

    pub fn bounds(&self) -> Bounds {
        self.info.bounds()
    }

    pub fn upper(&self) -> &PiecewiseCcdf {
        &self.upper
    }

    pub fn max_knot_revenue(&self) -> f64 {
        self.max_knot_revenue
    }

    /// `Ū(r⁻|I)`.
    pub fn upper_left_limit(&self, r: f64) -> f64 {
        self.upper.left_limit(r)
    }

    /// `I ∪ {(r, Ū(r⁻))}` when it is feasible for the class.
    pub fn extended(&self, r: f64) -> Option<InformationSet> {
        let q = self.upper_left_limit(r);
        let ext = self.info.with_point(r, q).ok()?;
        ext.is_feasible(self.class).then_some(ext)
    }

    pub fn certify(&self, r_star: f64) -> Result<Certificate> {
        self.bounds().check_price(r_star)?;
        Ok(self.certify_unchecked(r_star))
    }

    pub(crate) fn certify_unchecked(&self, r_star: f64) -> Certificate {
        let q_star = self.upper_left_limit(r_star);
        let extended_feasible =
            self.info.with_point(r_star, q_star).map(|ext| ext.is_feasible(self.class)).unwrap_or(false);
        let dominance = r_star * q_star >= self.max_knot_revenue - DOMINANCE_TOL;
        Certificate { r_star, extended_feasible, dominance, q_star }
    }

    pub(crate) fn is_member(&self, r: f64) -> bool {
        self.certify_unchecked(r).is_member()
    }

    /// The adversarial ccdf `F_𝒞(·|r*, I)`; requires only the feasibility half
    /// of the certificate.
    pub fn worst_case(&self, r_star: f64) -> Result<PiecewiseCcdf> {
        let ext = self.extended(r_star).ok_or(PricingError::NotCertified(r_star))?;
        Ok(lower_envelope_unchecked(&ext, self.class))
    }

    /// Optimal revenue of `F_𝒞(·|r*, I)`: `max(max_i p_i q_i, r* Ū(r*⁻))`.
    pub fn worst_case_opt(&self, r_star: f64) -> f64 {
        self.max_knot_revenue.max(r_star * self.upper_left_limit(r_star))
    }
}

pub fn certify_r_star(r_star: f64, info: &InformationSet, class: DistributionClass) -> Result<Certificate> {
    Ambiguity::new(info.clone(), class)?.certify(r_star)
}

/// A discrete randomized posted-price mechanism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMechanism")]
pub struct PricingMechanism {
    atoms: Vec<(f64, f64)>,
}

#[derive(Deserialize)]
struct RawMechanism {
    atoms: Vec<(f64, f64)>,
}

impl TryFrom<RawMechanism> for PricingMechanism {
    type Error = PricingError;

    fn try_from(raw: RawMechanism) -> Result<Self> {
        Self::new(raw.atoms)
    }
}

impl PricingMechanism {
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(PricingError::Domain("mechanism has no atoms".into()));
        }
        let mut total = 0.0;
        for &(p, w) in &atoms {
            if !p.is_finite() || p < 0.0 {
                return Err(PricingError::Domain(format!("atom price {p} is invalid")));
            }
            if !(w >= 0.0) || !w.is_finite() {
                return Err(PricingError::Domain(format!("atom weight {w} is negative")));
            }
            total += w;
        }
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(PricingError::Domain(format!("weights sum to {total}, expected 1")));
        }
        Ok(Self { atoms })
    }

    pub fn point_mass(price: f64) -> Self {
        Self { atoms: vec![(price, 1.0)] }
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn check_bounds(&self, bounds: &Bounds) -> Result<()> {
        self.atoms.iter().try_for_each(|&(p, _)| bounds.check_price(p))
    }

    pub fn total_weight(&self) -> f64 {
        self.atoms.iter().map(|&(_, w)| w).sum()
    }
}

/// `Σ_j ψ_j Rev(a_j | F)`.
pub fn expected_revenue(mech: &PricingMechanism, f: &PiecewiseCcdf) -> Result<f64> {
    mech.check_bounds(&f.bounds())?;
    Ok(expected_revenue_unchecked(mech, f))
}

fn expected_revenue_unchecked(mech: &PricingMechanism, f: &PiecewiseCcdf) -> f64 {
    mech.atoms.iter().map(|&(p, w)| w * p * f.left_limit(p)).sum()
}

/// Candidate optimal prices Nature is searched over: the grid points plus the
/// left limits of every knot and every atom, realized as `x − δ`.
pub fn candidate_optimal_prices(info: &InformationSet, mech: &PricingMechanism, grid: &GridPartition) -> Vec<f64> {
    let b = info.bounds();
    let delta = b.left_limit_offset();
    let mut pts: Vec<f64> = grid.points().to_vec();
    let limits = info.prices().chain(mech.atoms.iter().map(|&(p, _)| p));
    pts.extend(limits.map(|x| x - delta).filter(|&x| x > b.v_lo()));
    pts.extend(info.prices());
    pts.retain(|&x| b.contains(x));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NatureResponse {
    pub value: f64,
    pub r_star: f64,
}

/// Worst-case ratio of a mechanism, minimized over certified candidate optimal
/// prices on the grid. An upper approximation of the infimum that tightens as
/// the grid is refined.
pub fn worst_case_ratio(
    mech: &PricingMechanism,
    info: &InformationSet,
    class: DistributionClass,
    search_grid: &GridPartition,
) -> Result<NatureResponse> {
    let amb = Ambiguity::new(info.clone(), class)?;
    mech.check_bounds(&amb.bounds())?;
    let mut best: Option<NatureResponse> = None;
    for r in candidate_optimal_prices(info, mech, search_grid) {
        let cert = amb.certify_unchecked(r);
        if !cert.is_member() {
            continue;
        }
        let opt = amb.worst_case_opt(r);
        if !(opt > 0.0) {
            // no revenue to lose at a zero price
            continue;
        }
        let f = amb.worst_case(r)?;
        let value = expected_revenue_unchecked(mech, &f) / opt;
        if best.is_none_or(|b| value < b.value) {
            best = Some(NatureResponse { value, r_star: r });
        }
    }
    best.ok_or(PricingError::EmptyOptimalSet)
}

/// Worst-case λ-regret `λ·opt(F) − E_ψ Rev(p|F)`, maximized over certified
/// candidate optimal prices.
pub fn worst_case_lambda_regret(
    mech: &PricingMechanism,
    info: &InformationSet,
    class: DistributionClass,
    lambda: f64,
    search_grid: &GridPartition,
) -> Result<NatureResponse> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(PricingError::Domain(format!("λ must lie in [0, 1], got {lambda}")));
    }
    let amb = Ambiguity::new(info.clone(), class)?;
    mech.check_bounds(&amb.bounds())?;
    let mut best: Option<NatureResponse> = None;
    for r in candidate_optimal_prices(info, mech, search_grid) {
        if !amb.is_member(r) {
            continue;
        }
        let f = amb.worst_case(r)?;
        let value = lambda * amb.worst_case_opt(r) - expected_revenue_unchecked(mech, &f);
        if best.is_none_or(|b| value > b.value) {
            best = Some(NatureResponse { value, r_star: r });
        }
    }
    best.ok_or(PricingError::EmptyOptimalSet)
}
