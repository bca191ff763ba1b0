//! Price experimentation on top of the maximin bound: what a gradient or a
//! second price point is worth, and when a dynamic-pricing search can stop.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{Bounds, DistributionClass, InformationSet};
use crate::envelopes::lower_envelope_unchecked;
use crate::error::{PricingError, Result};
use crate::maximin::{maximin_lower_bound, maximin_with, CellRestriction, MaximinBound, MaximinConfig};
use crate::robust_eval::{Ambiguity, PricingMechanism};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DemandKind {
    Linear,
    Exponential,
}

/// A synthetic demand curve, parameterized in units of `v_hi`
/// (`x = v / v_hi`) and conditioned on values in `[v_lo, v_hi)`.
///
/// The raw ccdf is `clamp(a − b x, 0, 1)` or `min(exp(a − b x), 1)`. Both are
/// regular, and so is their conditioning on the support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemandModel {
    pub kind: DemandKind,
    pub a: f64,
    pub b: f64,
    bounds: Bounds,
    top: f64,
    bottom: f64,
}

impl DemandModel {
    pub fn new(kind: DemandKind, a: f64, b: f64, bounds: Bounds) -> Result<Self> {
        if !(b > 0.0) || !a.is_finite() || !b.is_finite() {
            return Err(PricingError::Domain(format!("demand parameters a={a}, b={b} are invalid")));
        }
        let mut model = Self { kind, a, b, bounds, top: 1.0, bottom: 0.0 };
        model.top = model.raw(bounds.v_lo());
        model.bottom = model.raw(bounds.v_hi());
        if !(model.top > model.bottom) {
            return Err(PricingError::Domain(format!("demand a={a}, b={b} puts no mass on the support")));
        }
        Ok(model)
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    fn raw(&self, v: f64) -> f64 {
        let x = v / self.bounds.v_hi();
        match self.kind {
            DemandKind::Linear => (self.a - self.b * x).clamp(0.0, 1.0),
            DemandKind::Exponential => (self.a - self.b * x).exp().min(1.0),
        }
    }

    /// `ℙ(v ≥ p)` under the conditioned model. The ccdf is continuous inside
    /// the support, so this is also its value.
    pub fn conversion_rate(&self, p: f64) -> f64 {
        if p <= self.bounds.v_lo() {
            return 1.0;
        }
        if p >= self.bounds.v_hi() {
            return 0.0;
        }
        ((self.raw(p) - self.bottom) / (self.top - self.bottom)).clamp(0.0, 1.0)
    }

    pub fn revenue(&self, p: f64) -> f64 {
        p * self.conversion_rate(p)
    }

    /// Revenue-maximizing price: a geometric scan followed by golden-section
    /// refinement, which is exact for unimodal revenue.
    pub fn optimum(&self) -> (f64, f64) {
        let (lo, hi) = (self.bounds.v_lo(), self.bounds.v_hi());
        let start = if lo > 0.0 { lo } else { 1e-6 * hi };
        let n = 4096;
        let step = (hi / start).ln() / n as f64;
        let grid: Vec<f64> = (0..=n).map(|k| start * (step * k as f64).exp()).collect();
        let k = (0..=n).max_by(|&i, &j| self.revenue(grid[i]).total_cmp(&self.revenue(grid[j]))).unwrap();
        let (mut a, mut b) = (grid[k.saturating_sub(1)], grid[(k + 1).min(n)]);
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..200 {
            let c = b - phi * (b - a);
            let d = a + phi * (b - a);
            if self.revenue(c) >= self.revenue(d) {
                b = d;
            } else {
                a = c;
            }
        }
        let candidates = [grid[k], a, b, lo.max(start)];
        let p = candidates.into_iter().max_by(|&x, &y| self.revenue(x).total_cmp(&self.revenue(y))).unwrap();
        (p, self.revenue(p))
    }

    /// Expected revenue of a mechanism relative to the optimum.
    pub fn ratio(&self, mech: &PricingMechanism) -> f64 {
        let rev: f64 = mech.atoms().iter().map(|&(p, w)| w * self.revenue(p)).sum();
        rev / self.optimum().1
    }
}

/// Linear: `b ~ U[1, 5]`, `a ~ U[1, b]`; exponential: `b ~ U[1, 5]`,
/// `a ~ U[−0.2, b]`.
pub fn sample_demand_models(kind: DemandKind, n: usize, bounds: Bounds, seed: u64) -> Result<Vec<DemandModel>> {
    if n == 0 {
        return Err(PricingError::Domain("sample size must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let b = rng.gen_range(1.0..=5.0);
            let a = match kind {
                DemandKind::Linear => rng.gen_range(1.0..=b),
                DemandKind::Exponential => rng.gen_range(-0.2..=b),
            };
            DemandModel::new(kind, a, b, bounds)
        })
        .collect()
}

/// Observed prices and rates in query order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentLog {
    bounds: Bounds,
    initial: Vec<(f64, f64)>,
    queries: Vec<(f64, f64)>,
}

impl ExperimentLog {
    pub fn new(init: &InformationSet) -> Self {
        Self { bounds: init.bounds(), initial: init.interior().to_vec(), queries: Vec::new() }
    }

    pub fn record(&mut self, price: f64, rate: f64) {
        self.queries.push((price, rate));
    }

    pub fn queries(&self) -> &[(f64, f64)] {
        &self.queries
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    /// Information after the first `t` queries.
    pub fn snapshot(&self, t: usize) -> Result<InformationSet> {
        let t = t.min(self.queries.len());
        InformationSet::new(self.bounds, self.initial.iter().chain(&self.queries[..t]).copied())
    }

    pub fn information_set(&self) -> Result<InformationSet> {
        self.snapshot(self.queries.len())
    }
}

/// How many rounds (two queries each) a ternary search may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TernaryBudget {
    /// Stop once the bracket is shorter than `ε·v_hi`.
    Standard,
    /// Stop once the bracket is shorter than `ε·v_lo`, which guarantees a
    /// `1 − ε` revenue ratio.
    Guaranteed,
    /// A fixed number of queries.
    Queries(usize),
}

impl TernaryBudget {
    pub fn rounds(&self, bounds: &Bounds, eps: f64) -> Result<usize> {
        let rounds_for = |target: f64| -> Result<usize> {
            if !(target > 0.0) {
                return Err(PricingError::Domain("budget needs a positive lower bound".into()));
            }
            let x = (bounds.width() / target).ln() / 1.5f64.ln();
            Ok(x.ceil().max(0.0) as usize)
        };
        if !(eps > 0.0 && eps < 1.0) {
            return Err(PricingError::Domain(format!("eps must lie in (0, 1), got {eps}")));
        }
        match *self {
            TernaryBudget::Standard => rounds_for(eps * bounds.v_hi()),
            TernaryBudget::Guaranteed => rounds_for(eps * bounds.v_lo()),
            TernaryBudget::Queries(n) => Ok(n / 2),
        }
    }

    pub fn queries(&self, bounds: &Bounds, eps: f64) -> Result<usize> {
        Ok(2 * self.rounds(bounds, eps)?)
    }
}

/// A price exploration procedure driven one query at a time.
pub trait Explorer {
    /// The next price to post, or `None` once the procedure is done.
    fn next_price(&mut self) -> Option<f64>;
    fn observe(&mut self, price: f64, rate: f64);
    /// An interval that contains an optimal price if revenue is unimodal.
    fn bracket(&self) -> (f64, f64);
    /// Price to post if exploration stops now.
    fn recommendation(&self) -> f64;
}

#[derive(Debug, Clone)]
pub struct TernaryExplorer {
    a: f64,
    b: f64,
    rev_a: f64,
    rev_b: f64,
    rounds_left: usize,
    round: Vec<(f64, Option<f64>)>,
}

impl TernaryExplorer {
    pub fn new(bounds: Bounds, rounds: usize) -> Self {
        Self {
            a: bounds.v_lo(),
            b: bounds.v_hi(),
            rev_a: bounds.v_lo(),
            rev_b: 0.0,
            rounds_left: rounds,
            round: Vec::new(),
        }
    }

    fn close_round(&mut self) {
        let (c1, r1) = (self.round[0].0, self.round[0].1.unwrap());
        let (c2, r2) = (self.round[1].0, self.round[1].1.unwrap());
        if r1 < r2 {
            (self.a, self.rev_a) = (c1, r1);
        } else if r1 > r2 {
            (self.b, self.rev_b) = (c2, r2);
        } else if r1 == 0.0 {
            // no demand from c1 on, so the optimum lies below it
            (self.b, self.rev_b) = (c1, r1);
        } else {
            (self.a, self.rev_a) = (c1, r1);
            (self.b, self.rev_b) = (c2, r2);
        }
        self.round.clear();
        self.rounds_left -= 1;
    }
}

impl Explorer for TernaryExplorer {
    fn next_price(&mut self) -> Option<f64> {
        if self.round.is_empty() {
            if self.rounds_left == 0 {
                return None;
            }
            let third = (self.b - self.a) / 3.0;
            self.round = vec![(self.a + third, None), (self.b - third, None)];
        }
        self.round.iter().find(|(_, r)| r.is_none()).map(|&(p, _)| p)
    }

    fn observe(&mut self, price: f64, rate: f64) {
        if let Some(slot) = self.round.iter_mut().find(|(p, r)| *p == price && r.is_none()) {
            slot.1 = Some(price * rate);
        }
        if self.round.len() == 2 && self.round.iter().all(|(_, r)| r.is_some()) {
            self.close_round();
        }
    }

    fn bracket(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    fn recommendation(&self) -> f64 {
        if self.rev_a >= self.rev_b {
            self.a
        } else {
            self.b
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TernaryOutcome {
    pub log: ExperimentLog,
    pub price: f64,
    pub rounds: usize,
    pub brackets: Vec<(f64, f64)>,
}

/// Plain ternary search on the revenue curve with the given round budget.
pub fn ternary_search(model: &DemandModel, eps: f64, budget: TernaryBudget) -> Result<TernaryOutcome> {
    let bounds = model.bounds();
    let rounds = budget.rounds(&bounds, eps)?;
    let mut explorer = TernaryExplorer::new(bounds, rounds);
    let mut log = ExperimentLog::new(&InformationSet::endpoints(bounds));
    let mut brackets = vec![explorer.bracket()];
    while let Some(p) = explorer.next_price() {
        let rate = model.conversion_rate(p);
        log.record(p, rate);
        let before = explorer.rounds_left;
        explorer.observe(p, rate);
        if explorer.rounds_left != before {
            brackets.push(explorer.bracket());
        }
    }
    Ok(TernaryOutcome { log, price: explorer.recommendation(), rounds, brackets })
}

/// Which ambiguity set the stopping statistic is computed over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StoppingCriterion {
    /// Regular distributions.
    Regular,
    /// Any distribution, with the optimal price confined to the explorer's bracket.
    GeneralUnimodal,
}

impl StoppingCriterion {
    pub fn name(&self) -> &'static str {
        match self {
            StoppingCriterion::Regular => "regular",
            StoppingCriterion::GeneralUnimodal => "general-unimodal",
        }
    }
}

/// Guaranteed ratio after the data gathered so far.
pub fn stopping_statistic(
    info: &InformationSet,
    criterion: StoppingCriterion,
    bracket: (f64, f64),
    m: usize,
) -> Result<MaximinBound> {
    match criterion {
        StoppingCriterion::Regular => maximin_lower_bound(info, DistributionClass::Regular, m),
        StoppingCriterion::GeneralUnimodal => {
            let cfg =
                MaximinConfig { m, focus: Some(bracket), restriction: CellRestriction::Within(bracket.0, bracket.1) };
            maximin_with(info, DistributionClass::General, &cfg)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaOutcome {
    pub queries: usize,
    pub mechanism: PricingMechanism,
    pub lambda_star: f64,
    /// Whether the statistic reached `1 − ε`; otherwise the explorer ran out.
    pub reached: bool,
    pub log: ExperimentLog,
    /// Statistic after each query, starting with the initial data.
    pub trace: Vec<f64>,
}

/// Runs the explorer against `oracle`, recomputing the guaranteed ratio after
/// every query, and stops as soon as it reaches `1 − eps`.
pub fn meta_dynamic_pricing<E, O>(
    explorer: &mut E,
    oracle: O,
    init: &InformationSet,
    criterion: StoppingCriterion,
    eps: f64,
    m: usize,
) -> Result<MetaOutcome>
where
    E: Explorer + ?Sized,
    O: Fn(f64) -> f64,
{
    if !(eps > 0.0 && eps < 1.0) {
        return Err(PricingError::Domain(format!("eps must lie in (0, 1), got {eps}")));
    }
    let bounds = init.bounds();
    let mut log = ExperimentLog::new(init);
    let mut trace = Vec::new();
    let mut best: Option<MaximinBound> = None;
    loop {
        let info = log.information_set()?;
        match stopping_statistic(&info, criterion, explorer.bracket(), m) {
            Ok(stat) => {
                trace.push(stat.lambda_star);
                if best.as_ref().is_none_or(|b| stat.lambda_star > b.lambda_star) {
                    best = Some(stat);
                }
            }
            Err(PricingError::EmptyOptimalSet) => trace.push(0.0),
            Err(e) => return Err(e),
        }
        let reached = best.as_ref().is_some_and(|b| b.lambda_star >= 1.0 - eps);
        let next = if reached { None } else { explorer.next_price() };
        let Some(mut p) = next else {
            let queries = log.len();
            let (mechanism, lambda_star) = match best {
                Some(b) => (b.mechanism, b.lambda_star),
                None => (PricingMechanism::point_mass(explorer.recommendation()), 0.0),
            };
            return Ok(MetaOutcome { queries, mechanism, lambda_star, reached, log, trace });
        };
        if !bounds.contains(p) {
            log::warn!("query {p} outside [{}, {}] clamped", bounds.v_lo(), bounds.v_hi());
            p = p.clamp(bounds.v_lo(), bounds.v_hi());
        }
        let rate = oracle(p);
        log.record(p, rate);
        explorer.observe(p, rate);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientRow {
    pub q_eps: f64,
    pub g_eps: f64,
    /// `None` when the two observations are inconsistent with the class.
    pub lambda_star: Option<f64>,
}

/// `g_ε = (p_ε q_ε − p₁ q₁) / (p_ε − p₁)`.
pub fn finite_difference_gradient(p1: f64, q1: f64, p_eps: f64, q_eps: f64) -> f64 {
    (p_eps * q_eps - p1 * q1) / (p_eps - p1)
}

/// Guaranteed ratio after observing rates at `p₁` and at `p_ε = (1 + ε) p₁`,
/// for each candidate `q_ε`.
#[allow(clippy::too_many_arguments)]
pub fn gradient_value_study(
    p1: f64,
    q1: f64,
    eps: f64,
    q_eps_grid: &[f64],
    class: DistributionClass,
    bounds: Bounds,
    m: usize,
) -> Result<Vec<GradientRow>> {
    let p_eps = (1.0 + eps) * p1;
    if !(eps > 0.0) || !bounds.contains(p_eps) || !bounds.contains(p1) {
        return Err(PricingError::Domain(format!("p_eps = {p_eps} is outside the support")));
    }
    q_eps_grid
        .par_iter()
        .map(|&q_eps| {
            let g_eps = finite_difference_gradient(p1, q1, p_eps, q_eps);
            let info = match InformationSet::new(bounds, [(p1, q1), (p_eps, q_eps)]) {
                Ok(info) if info.is_feasible(class) => info,
                _ => return Ok(GradientRow { q_eps, g_eps, lambda_star: None }),
            };
            let bound = maximin_lower_bound(&info, class, m)?;
            Ok(GradientRow { q_eps, g_eps, lambda_star: Some(bound.lambda_star) })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GradientSign {
    Negative,
    Positive,
}

/// Guaranteed ratio from one observation plus the sign of the revenue
/// gradient there: a negative sign places the optimum at or below `p₁`.
pub fn gradient_sign_value(
    p1: f64,
    q1: f64,
    sign: GradientSign,
    class: DistributionClass,
    bounds: Bounds,
    m: usize,
) -> Result<f64> {
    let info = InformationSet::new(bounds, [(p1, q1)])?;
    let restriction = match sign {
        GradientSign::Negative => CellRestriction::AtOrBelow(p1),
        GradientSign::Positive => CellRestriction::AtOrAbove(p1),
    };
    let cfg = MaximinConfig { m, focus: None, restriction };
    Ok(maximin_with(&info, class, &cfg)?.lambda_star)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondPriceRow {
    pub p2: f64,
    pub q2_lo: f64,
    pub q2_hi: f64,
    /// `(q₂, λ*)` over the sweep; `None` where the pair is inconsistent.
    pub sweep: Vec<(f64, Option<f64>)>,
    pub worst_q2: f64,
    pub min_lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondPriceStudy {
    pub p2_star: f64,
    pub guaranteed_ratio: f64,
    pub rows: Vec<SecondPriceRow>,
}

/// `count` prices spread geometrically strictly inside the bounds.
pub fn interior_geometric(bounds: &Bounds, count: usize) -> Vec<f64> {
    let lo = if bounds.v_lo() > 0.0 { bounds.v_lo() } else { 1e-3 * bounds.v_hi() };
    let step = (bounds.v_hi() / lo).ln() / (count + 1) as f64;
    (1..=count).map(|k| lo * (step * k as f64).exp()).collect()
}

/// Rates swept across `[lo, hi]`: geometric in `1/q = 1 + Γ⁻¹(q)` for the
/// regular class, linear otherwise. Endpoints are hit exactly and sweeps
/// with `2^k + 1` points are nested.
pub fn rate_sweep(lo: f64, hi: f64, count: usize, class: DistributionClass) -> Vec<f64> {
    if count <= 1 || hi <= lo {
        return vec![lo];
    }
    let floor = lo.max(1e-6 * hi);
    (0..count)
        .map(|k| {
            let t = k as f64 / (count - 1) as f64;
            match (k, class) {
                (0, _) => hi,
                (k, _) if k == count - 1 => lo,
                (_, DistributionClass::Regular) => hi * (floor / hi).powf(t),
                (_, DistributionClass::General) => hi + t * (lo - hi),
            }
        })
        .collect()
}

/// Nature's reply to a second experiment at `p2`: the consistent rate `q₂`
/// that minimizes the guaranteed ratio, over a sweep of `q2_count` rates.
pub fn second_price_row(
    info: &InformationSet,
    class: DistributionClass,
    p2: f64,
    q2_count: usize,
    m: usize,
) -> Result<SecondPriceRow> {
    let amb = Ambiguity::new(info.clone(), class)?;
    let lower = lower_envelope_unchecked(info, class);
    let (q2_lo, q2_hi) = (lower.left_limit(p2), amb.upper_left_limit(p2));
    let rates = rate_sweep(q2_lo, q2_hi, q2_count, class);
    let sweep: Vec<(f64, Option<f64>)> = rates
        .par_iter()
        .map(|&q2| {
            let Ok(ext) = info.with_point(p2, q2) else { return Ok((q2, None)) };
            if !ext.is_feasible(class) {
                return Ok((q2, None));
            }
            Ok((q2, Some(maximin_lower_bound(&ext, class, m)?.lambda_star)))
        })
        .collect::<Result<_>>()?;
    let (worst_q2, min_lambda) = sweep
        .iter()
        .filter_map(|&(q, v)| v.map(|v| (q, v)))
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .unwrap_or((f64::NAN, f64::NEG_INFINITY));
    Ok(SecondPriceRow { p2, q2_lo, q2_hi, sweep, worst_q2, min_lambda })
}

/// Candidate second prices: `count` interior geometric points, minus `p₁`.
pub fn second_price_candidates(bounds: &Bounds, p1: f64, count: usize) -> Vec<f64> {
    let tol = 1e-9 * bounds.width();
    interior_geometric(bounds, count).into_iter().filter(|p| (p - p1).abs() > tol).collect()
}

/// Best price for a second experiment: for each candidate `p₂`, Nature picks
/// the least favourable consistent rate `q₂`; the price maximizing that
/// guarantee wins.
pub fn best_second_price(
    p1: f64,
    q1: f64,
    class: DistributionClass,
    bounds: Bounds,
    p2_count: usize,
    q2_count: usize,
    m: usize,
) -> Result<SecondPriceStudy> {
    let info = InformationSet::new(bounds, [(p1, q1)])?;
    Ambiguity::new(info.clone(), class)?;
    let candidates = second_price_candidates(&bounds, p1, p2_count);
    if candidates.is_empty() {
        return Err(PricingError::Domain("no candidate second price".into()));
    }
    let rows: Vec<SecondPriceRow> =
        candidates.par_iter().map(|&p2| second_price_row(&info, class, p2, q2_count, m)).collect::<Result<_>>()?;
    let best = rows
        .iter()
        .filter(|r| r.min_lambda.is_finite())
        .max_by(|x, y| x.min_lambda.total_cmp(&y.min_lambda))
        .ok_or(PricingError::EmptyOptimalSet)?;
    Ok(SecondPriceStudy { p2_star: best.p2, guaranteed_ratio: best.min_lambda, rows })
}
