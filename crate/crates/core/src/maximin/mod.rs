//! Discretized maximin problem and its linear-programming lower bound.
//!
//! Prices are restricted to a grid `a_0 < … < a_K`. Nature's candidate optimal
//! price ranges over grid cells `[a_i, a_{i+1})`; for each cell that meets the
//! certified set we emit one constraint that is valid for every `r*` in the
//! cell, so the LP optimum lower-bounds the continuous maximin ratio.

pub mod simplex;

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{Bounds, DistributionClass, InformationSet};
use crate::envelopes::lower_envelope_unchecked;
use crate::error::{PricingError, Result};
use crate::robust_eval::{Ambiguity, PricingMechanism};
use simplex::{LinearProgram, Relation, SimplexStatus};

/// Points closer than this many left-limit offsets are merged.
const MERGE_OFFSETS: f64 = 4.0;
/// Game-value gap at which column and row generation stops.
pub const LP_GAP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPartition {
    bounds: Bounds,
    points: Vec<f64>,
    /// Membership of each point in the certified set; the last entry refers to
    /// the left limit at `v_hi`.
    certified: Vec<bool>,
    /// Whether cell `[a_i, a_{i+1})` meets the certified set at either end.
    cell_certified: Vec<bool>,
}

impl GridPartition {
    fn from_points(amb: &Ambiguity, points: Vec<f64>) -> Self {
        let n = points.len();
        let at: Vec<bool> = points.par_iter().map(|&a| amb.is_member(a)).collect();
        let right: Vec<bool> = (0..n - 1)
            .into_par_iter()
            .map(|i| amb.is_member(right_limit(&amb.bounds(), points[i], points[i + 1])))
            .collect();
        let mut certified = at.clone();
        certified[n - 1] = right[n - 2];
        let cell_certified = (0..n - 1).map(|i| at[i] || right[i]).collect();
        Self { bounds: amb.bounds(), points, certified, cell_certified }
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn certified(&self) -> &[bool] {
        &self.certified
    }

    pub fn cell_certified(&self) -> &[bool] {
        &self.cell_certified
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `(a_i, a_{i+1}, certified)` for every cell.
    pub fn cells(&self) -> impl Iterator<Item = (f64, f64, bool)> + '_ {
        self.points.windows(2).zip(&self.cell_certified).map(|(w, &c)| (w[0], w[1], c))
    }
}

/// `b⁻` inside the cell `[a, b)`.
fn right_limit(bounds: &Bounds, a: f64, b: f64) -> f64 {
    b - bounds.left_limit_offset().min(0.5 * (b - a))
}

fn geometric(lo: f64, hi: f64, intervals: usize) -> impl Iterator<Item = f64> {
    let ratio = (hi / lo).ln() / intervals as f64;
    (0..=intervals).map(move |k| match k {
        0 => lo,
        k if k == intervals => hi,
        k => lo * (ratio * k as f64).exp(),
    })
}

/// `m + 1` geometric intervals over `[lo, hi]`; a zero lower end gets its own
/// point and the geometric part starts at `hi / 1000`.
fn spread(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    if lo > 0.0 {
        geometric(lo, hi, m + 1).collect()
    } else {
        std::iter::once(lo).chain(geometric(1e-3 * hi, hi, m + 1)).collect()
    }
}

/// Rank used when merging nearby points; lower wins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Origin {
    Knot,
    Boundary,
    Breakpoint,
    Spread,
}

fn merge(mut pts: Vec<(f64, Origin)>, min_gap: f64) -> Vec<(f64, Origin)> {
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut out: Vec<(f64, Origin)> = Vec::with_capacity(pts.len());
    for p in pts {
        match out.last_mut() {
            Some(last) if p.0 - last.0 < min_gap => {
                if p.1 == Origin::Knot && last.1 == Origin::Knot {
                    out.push(p);
                } else if p.1 < last.1 {
                    *last = p;
                }
            }
            _ => out.push(p),
        }
    }
    out
}

/// Locates points where certification flips between consecutive grid points.
fn certified_set_boundaries(amb: &Ambiguity, pts: &[(f64, Origin)]) -> Vec<(f64, Origin)> {
    let b = amb.bounds();
    let tol = 1e-3 * b.left_limit_offset();
    pts.par_windows(2)
        .filter_map(|w| {
            let (a, c) = (w[0].0, w[1].0);
            let c_minus = right_limit(&b, a, c);
            let (sa, sc) = (amb.is_member(a), amb.is_member(c_minus));
            if sa == sc {
                return None;
            }
            let (mut lo, mut hi) = (a, c_minus);
            for _ in 0..200 {
                if hi - lo <= tol {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                if amb.is_member(mid) == sa {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Some((hi, Origin::Boundary))
        })
        .collect()
}

/// Resolution of the scan that locates the hull of the certified set; fixed so
/// that the hull, and with it the refinement layer, does not depend on `M`.
const HULL_SCAN: usize = 1023;
/// Intervals of the lattice that cuts LP cells.
const NATURE_LATTICE: usize = 4095;

/// Knots, `m + 2` base points, breakpoints of the upper envelope and the
/// boundaries of the certified set between them.
fn skeleton(amb: &Ambiguity, m: usize, gap: f64) -> Vec<(f64, Origin)> {
    let b = amb.bounds();
    let mut pts: Vec<(f64, Origin)> = amb.info().prices().map(|p| (p, Origin::Knot)).collect();
    pts.extend(spread(b.v_lo(), b.v_hi(), m).into_iter().map(|p| (p, Origin::Spread)));
    pts.extend(amb.upper().breakpoints().into_iter().map(|p| (p, Origin::Breakpoint)));
    pts = merge(pts, gap);
    let boundaries = certified_set_boundaries(amb, &pts);
    pts.extend(boundaries);
    merge(pts, gap)
}

/// Grid with `M + 2` geometric points over the bounds, every knot, the
/// breakpoints of the upper envelope, the boundaries of the certified set, and
/// a refinement layer of about `M + 2` points over the hull of the certified set.
pub fn build_grid(info: &InformationSet, class: DistributionClass, m: usize) -> Result<GridPartition> {
    build_grid_focused(info, class, m, None)
}

/// As [`build_grid`], with the refinement layer restricted to `focus`.
pub fn build_grid_focused(
    info: &InformationSet,
    class: DistributionClass,
    m: usize,
    focus: Option<(f64, f64)>,
) -> Result<GridPartition> {
    if m < 1 {
        return Err(PricingError::Domain("grid size M must be at least 1".into()));
    }
    let amb = Ambiguity::new(info.clone(), class)?;
    let b = info.bounds();
    let gap = MERGE_OFFSETS * b.left_limit_offset();

    let mut pts = skeleton(&amb, m, gap);
    let scan = GridPartition::from_points(&amb, skeleton(&amb, HULL_SCAN, gap).into_iter().map(|p| p.0).collect());
    let hull = certified_hull(&scan).map(|(lo, hi)| match focus {
        Some((f_lo, f_hi)) => (lo.max(f_lo), hi.min(f_hi)),
        None => (lo, hi),
    });
    if let Some((lo, hi)) = hull {
        if hi - lo > gap && (lo > b.v_lo() || hi < b.v_hi()) {
            pts.extend(refinement_layer(&b, m, lo, hi).into_iter().map(|p| (p, Origin::Spread)));
            pts = merge(pts, gap);
            let boundaries = certified_set_boundaries(&amb, &pts);
            pts.extend(boundaries);
            pts = merge(pts, gap);
        }
    }
    let points = split_steep_cells(&amb, pts.into_iter().map(|p| p.0).collect(), m, gap);
    Ok(GridPartition::from_points(&amb, points))
}

/// Grid through the given prices, completed with the knots, breakpoints and
/// certified-set boundaries the LP cells rely on.
pub fn grid_from_points(info: &InformationSet, class: DistributionClass, points: &[f64]) -> Result<GridPartition> {
    let amb = Ambiguity::new(info.clone(), class)?;
    let b = info.bounds();
    points.iter().try_for_each(|&p| b.check_price(p))?;
    let gap = MERGE_OFFSETS * b.left_limit_offset();
    let mut pts: Vec<(f64, Origin)> = info.prices().map(|p| (p, Origin::Knot)).collect();
    pts.extend(points.iter().map(|&p| (p, Origin::Spread)));
    pts.extend(amb.upper().breakpoints().into_iter().map(|p| (p, Origin::Breakpoint)));
    pts = merge(pts, gap);
    let boundaries = certified_set_boundaries(&amb, &pts);
    pts.extend(boundaries);
    let pts = merge(pts, gap);
    Ok(GridPartition::from_points(&amb, pts.into_iter().map(|p| p.0).collect()))
}

/// Points of a dyadic refinement of the base lattice inside `[lo, hi]`, at
/// the coarsest level whose spacing is at most `1/(M+1)` of the interval in
/// log terms. The level relative to the base step depends only on the
/// interval, so layers for `M` and `2M + 1` are nested.
fn refinement_layer(bounds: &Bounds, m: usize, lo: f64, hi: f64) -> Vec<f64> {
    let (anchor, step) = lattice(bounds, m);
    let lo = lo.max(anchor);
    if hi <= lo {
        return Vec::new();
    }
    let total = (bounds.v_hi() / anchor).ln();
    let width = (hi / lo).ln();
    let level = (total / width).log2().ceil().clamp(0.0, 40.0) as i32;
    let fine = step / 2f64.powi(level);
    let first = ((lo / anchor).ln() / fine).ceil() as i64;
    let last = ((hi / anchor).ln() / fine).floor() as i64;
    (first..=last).map(|k| anchor * (fine * k as f64).exp()).filter(|&x| x >= lo && x <= hi).collect()
}

/// Log-price step of the base layer and its lower anchor.
fn lattice(bounds: &Bounds, m: usize) -> (f64, f64) {
    let lo = if bounds.v_lo() > 0.0 { bounds.v_lo() } else { 1e-3 * bounds.v_hi() };
    (lo, (bounds.v_hi() / lo).ln() / (m + 1) as f64)
}

/// Subdivides certified cells across which `Ū(r⁻)` moves by more than one base
/// step in log terms. New points come from dyadic refinements of the base
/// lattice, so grids for `M` and `2M + 1` stay nested.
fn split_steep_cells(amb: &Ambiguity, mut points: Vec<f64>, m: usize, gap: f64) -> Vec<f64> {
    let b = amb.bounds();
    let (anchor, step) = lattice(&b, m);
    let log_q = |r: f64| amb.upper_left_limit(r).max(f64::MIN_POSITIVE).ln();
    let steep = |a: f64, c: f64| {
        let ok = amb.is_member(a) || amb.is_member(right_limit(&b, a, c));
        ok && c - a > 2.0 * gap && (log_q(a) - log_q(right_limit(&b, a, c))).abs() > step
    };
    let budget = 4 * (m + 2);
    let mut added = 0;
    let mut queue: Vec<(f64, f64)> = points.windows(2).filter(|w| steep(w[0], w[1])).map(|w| (w[0], w[1])).collect();
    while let Some((a, c)) = queue.pop() {
        if added >= budget || a < anchor {
            continue;
        }
        // coarsest dyadic level with a lattice point well inside the cell
        let (la, lc) = ((a / anchor).ln() / step, (c / anchor).ln() / step);
        let mut inner = Vec::new();
        for level in 0..48 {
            let scale = (1u64 << level) as f64;
            let first = (la * scale).floor() as i64 + 1;
            let last = (lc * scale).ceil() as i64 - 1;
            inner = (first..=last)
                .map(|k| anchor * (step * k as f64 / scale).exp())
                .filter(|&x| x - a > gap && c - x > gap)
                .collect();
            if !inner.is_empty() {
                break;
            }
        }
        if inner.is_empty() {
            continue;
        }
        added += inner.len();
        let mut ends = vec![a];
        ends.extend(&inner);
        ends.push(c);
        for w in ends.windows(2) {
            if steep(w[0], w[1]) {
                queue.push((w[0], w[1]));
            }
        }
        points.extend(inner);
    }
    points.sort_by(f64::total_cmp);
    points
}

fn certified_hull(grid: &GridPartition) -> Option<(f64, f64)> {
    let first = grid.cell_certified.iter().position(|&c| c)?;
    let last = grid.cell_certified.iter().rposition(|&c| c)?;
    Some((grid.points[first], grid.points[last + 1]))
}

/// Which certified cells enter the LP.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub enum CellRestriction {
    #[default]
    All,
    /// Cells whose left end is at most the price: the optimum lies at or below it.
    AtOrBelow(f64),
    /// Cells whose left end is at least the price.
    AtOrAbove(f64),
    /// Cells that meet the closed interval.
    Within(f64, f64),
}

impl CellRestriction {
    fn admits(&self, a: f64, b: f64) -> bool {
        match *self {
            CellRestriction::All => true,
            CellRestriction::AtOrBelow(p) => a <= p,
            CellRestriction::AtOrAbove(p) => a >= p,
            CellRestriction::Within(lo, hi) => a <= hi && b > lo,
        }
    }
}

/// `max λ` s.t. `opt_i λ ≤ Σ_j R_ij ψ_j` for every row, `Σψ = 1`, `0 ≤ λ ≤ 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpProblem {
    pub prices: Vec<f64>,
    pub cells: Vec<(f64, f64)>,
    pub opt: Vec<f64>,
    /// Row-major, `cells.len() × prices.len()`.
    pub revenue: Vec<f64>,
}

impl LpProblem {
    pub fn rows(&self) -> usize {
        self.cells.len()
    }

    pub fn cols(&self) -> usize {
        self.prices.len()
    }

    pub fn revenue_row(&self, i: usize) -> &[f64] {
        let n = self.cols();
        &self.revenue[i * n..(i + 1) * n]
    }

    /// Plain-text rendering, one constraint per line.
    pub fn write_text<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "maximize lambda")?;
        writeln!(w, "subject to")?;
        for (i, &(a, b)) in self.cells.iter().enumerate() {
            write!(w, "  cell{i} [{a:.12e}, {b:.12e}): {:.12e} lambda", self.opt[i])?;
            for (j, &r) in self.revenue_row(i).iter().enumerate() {
                if r != 0.0 {
                    write!(w, " - {r:.12e} psi{j}")?;
                }
            }
            writeln!(w, " <= 0")?;
        }
        write!(w, "  simplex:")?;
        for j in 0..self.cols() {
            write!(w, "{}psi{j}", if j == 0 { " " } else { " + " })?;
        }
        writeln!(w, " = 1")?;
        writeln!(w, "  cap: lambda <= 1")?;
        writeln!(w, "prices")?;
        for (j, p) in self.prices.iter().enumerate() {
            writeln!(w, "  psi{j} {p:.12e}")?;
        }
        Ok(())
    }
}

pub fn build_lp(info: &InformationSet, class: DistributionClass, grid: &GridPartition) -> Result<LpProblem> {
    build_lp_restricted(info, class, grid, CellRestriction::All)
}

/// One row per admitted certified cell. The λ coefficient is the larger of the
/// optimal revenues at the two ends of the cell and each revenue coefficient
/// the smaller, which bounds every `r*` inside the cell.
pub fn build_lp_restricted(
    info: &InformationSet,
    class: DistributionClass,
    grid: &GridPartition,
    restriction: CellRestriction,
) -> Result<LpProblem> {
    if grid.bounds() != info.bounds() {
        return Err(PricingError::Domain("grid and information set have different bounds".into()));
    }
    let amb = Ambiguity::new(info.clone(), class)?;
    let b = amb.bounds();
    let prices = grid.points().to_vec();
    let cells: Vec<(f64, f64)> =
        grid.cells().filter(|&(a, c, ok)| ok && restriction.admits(a, c)).map(|(a, c, _)| (a, c)).collect();
    let cells = nature_cells(&b, &cells);

    let rows: Vec<Option<(f64, Vec<f64>)>> =
        cells.par_iter().map(|&(a, c)| cell_row(&amb, class, &prices, [a, right_limit(&b, a, c)])).collect();

    let mut lp = LpProblem { prices, cells: Vec::new(), opt: Vec::new(), revenue: Vec::new() };
    for (cell, row) in cells.into_iter().zip(rows) {
        if let Some((opt, rev)) = row {
            lp.cells.push(cell);
            lp.opt.push(opt);
            lp.revenue.extend(rev);
        }
    }
    Ok(lp)
}

/// Cuts cells at the points of a fixed lattice over the bounds. The lattice
/// does not depend on the grid, so cells of nested grids stay nested.
fn nature_cells(bounds: &Bounds, cells: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let (anchor, step) = lattice(bounds, NATURE_LATTICE);
    let gap = MERGE_OFFSETS * bounds.left_limit_offset();
    let mut out = Vec::with_capacity(cells.len());
    for &(a, c) in cells {
        let mut start = a;
        if c > anchor {
            let first = ((a.max(anchor) / anchor).ln() / step).floor() as i64;
            for k in first.. {
                let x = anchor * (step * k as f64).exp();
                if x >= c - gap {
                    break;
                }
                if x > start + gap {
                    out.push((start, x));
                    start = x;
                }
            }
        }
        out.push((start, c));
    }
    out
}

/// Optimal revenue and revenue row bounding every `r*` among `ends`: the
/// largest optimum against the smallest revenues.
fn cell_row(amb: &Ambiguity, class: DistributionClass, prices: &[f64], ends: [f64; 2]) -> Option<(f64, Vec<f64>)> {
    let mut opt = f64::NEG_INFINITY;
    let mut rev: Option<Vec<f64>> = None;
    for r in ends {
        let Some(ext) = amb.extended(r) else { continue };
        let f = lower_envelope_unchecked(&ext, class);
        opt = opt.max(amb.worst_case_opt(r));
        let row: Vec<f64> = f.left_limits_sorted(prices).iter().zip(prices).map(|(q, p)| p * q).collect();
        rev = Some(match rev {
            None => row,
            Some(prev) => prev.iter().zip(&row).map(|(x, y)| x.min(*y)).collect(),
        });
    }
    rev.map(|r| (opt, r))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    /// No certified cell: the program has no ratio constraint to bound.
    Infeasible,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Guaranteed ratio of `psi` over every row.
    pub lambda_star: f64,
    pub psi: Vec<f64>,
    /// Nature's mixture over rows, a probability vector (the LP duals,
    /// normalized).
    pub nature: Vec<f64>,
    /// Best ratio any price distribution attains against `nature`.
    pub upper_bound: f64,
    pub iterations: usize,
}

impl LpSolution {
    fn failed(status: LpStatus, lp: &LpProblem) -> Self {
        Self {
            status,
            lambda_star: 0.0,
            psi: vec![0.0; lp.cols()],
            nature: vec![0.0; lp.rows()],
            upper_bound: f64::NAN,
            iterations: 0,
        }
    }
}

/// Ratio matrix `B_ij = R_ij / opt_i`.
fn ratio_matrix(lp: &LpProblem) -> Vec<f64> {
    let n = lp.cols();
    let mut b = lp.revenue.clone();
    b.par_chunks_mut(n.max(1)).zip(lp.opt.par_iter()).for_each(|(row, &o)| {
        row.iter_mut().for_each(|x| *x /= o);
    });
    b
}

struct Active {
    in_rows: Vec<bool>,
    in_cols: Vec<bool>,
    rows: Vec<usize>,
    cols: Vec<usize>,
}

impl Active {
    fn add_row(&mut self, i: usize, best_col: usize) {
        if !self.in_rows[i] {
            self.in_rows[i] = true;
            self.rows.push(i);
            self.add_col(best_col);
        }
    }

    fn add_col(&mut self, j: usize) {
        if !self.in_cols[j] {
            self.in_cols[j] = true;
            self.cols.push(j);
        }
    }
}

/// Solves the LP as the zero-sum game `max_ψ min_i (Bψ)_i` by row and column
/// generation, each restricted game solved exactly by the simplex method.
pub fn solve_lp(lp: &LpProblem) -> LpSolution {
    let (m, n) = (lp.rows(), lp.cols());
    if m == 0 || n == 0 {
        return LpSolution::failed(LpStatus::Infeasible, lp);
    }
    let bm = ratio_matrix(lp);
    let b = |i: usize, j: usize| bm[i * n + j];
    let best_col = |i: usize| (0..n).max_by(|&x, &y| b(i, x).total_cmp(&b(i, y))).unwrap();

    let mut act = Active { in_rows: vec![false; m], in_cols: vec![false; n], rows: Vec::new(), cols: Vec::new() };
    let seeds = m.min(16);
    for k in 0..seeds {
        let i = k * (m - 1) / (seeds - 1).max(1);
        act.add_row(i, best_col(i));
    }

    let mut psi = vec![0.0; n];
    let mut nature = vec![0.0; m];
    let mut low = 0.0;
    let mut high = f64::INFINITY;
    for iteration in 1..=10_000 {
        // max Σ y  s.t.  Σ_i B_ij y_i ≤ 1 over the restricted game.
        let mut master = LinearProgram::new(vec![1.0; act.rows.len()]);
        for &j in &act.cols {
            master.push(act.rows.iter().map(|&i| b(i, j)).collect(), Relation::Le, 1.0);
        }
        let sol = simplex::solve(&master);
        match sol.status {
            SimplexStatus::Optimal => {}
            SimplexStatus::Unbounded => {
                // Some row has zero revenue everywhere on the restricted columns.
                let zero = act.rows.iter().copied().find(|&i| act.cols.iter().all(|&j| b(i, j) <= 0.0));
                match zero {
                    Some(i) if b(i, best_col(i)) <= 0.0 => {
                        let mut nature = vec![0.0; m];
                        nature[i] = 1.0;
                        return LpSolution {
                            status: LpStatus::Optimal,
                            lambda_star: 0.0,
                            psi: vec![1.0 / n as f64; n],
                            nature,
                            upper_bound: 0.0,
                            iterations: iteration,
                        };
                    }
                    _ => return LpSolution::failed(LpStatus::NumericalFailure, lp),
                }
            }
            _ => return LpSolution::failed(LpStatus::NumericalFailure, lp),
        }
        let y_total = sol.objective;
        let x_total: f64 = sol.duals.iter().map(|d| d.max(0.0)).sum();
        if !(y_total > 0.0) || !(x_total > 0.0) {
            return LpSolution::failed(LpStatus::NumericalFailure, lp);
        }
        psi.iter_mut().for_each(|p| *p = 0.0);
        for (&j, &d) in act.cols.iter().zip(&sol.duals) {
            psi[j] = d.max(0.0) / x_total;
        }
        nature.iter_mut().for_each(|p| *p = 0.0);
        let y_sum: f64 = sol.x.iter().sum();
        for (&i, &y) in act.rows.iter().zip(&sol.x) {
            nature[i] = y / y_sum;
        }
        let value = 1.0 / y_total;

        let row_vals: Vec<f64> =
            (0..m).into_par_iter().map(|i| act.cols.iter().map(|&j| b(i, j) * psi[j]).sum()).collect();
        let col_vals: Vec<f64> =
            (0..n).into_par_iter().map(|j| act.rows.iter().map(|&i| nature[i] * b(i, j)).sum()).collect();
        low = row_vals.iter().copied().fold(f64::INFINITY, f64::min);
        high = col_vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        log::debug!(
            "lp iteration {iteration}: rows {} cols {} value {value} gap {}",
            act.rows.len(),
            act.cols.len(),
            high - low
        );
        if high - low <= LP_GAP_TOL {
            break;
        }

        let mut new_rows: Vec<usize> =
            (0..m).filter(|&i| !act.in_rows[i] && row_vals[i] < value - 0.5 * LP_GAP_TOL).collect();
        new_rows.sort_by(|&x, &y| row_vals[x].total_cmp(&row_vals[y]));
        let mut new_cols: Vec<usize> =
            (0..n).filter(|&j| !act.in_cols[j] && col_vals[j] > value + 0.5 * LP_GAP_TOL).collect();
        new_cols.sort_by(|&x, &y| col_vals[y].total_cmp(&col_vals[x]));
        if new_rows.is_empty() && new_cols.is_empty() {
            break;
        }
        // grow geometrically: supports are often a large share of the grid
        let batch = 8.max(act.rows.len().max(act.cols.len()) / 2);
        for &i in new_rows.iter().take(batch) {
            act.add_row(i, best_col(i));
        }
        for &j in new_cols.iter().take(batch) {
            act.add_col(j);
        }
        if iteration == 10_000 {
            return LpSolution::failed(LpStatus::NumericalFailure, lp);
        }
    }
    let iterations = act.rows.len();
    LpSolution { status: LpStatus::Optimal, lambda_star: low.min(1.0), psi, nature, upper_bound: high, iterations }
}

/// Solves the LP in its original epigraph form with a single dense simplex
/// call. Quadratic memory in the grid size; meant for small grids and for
/// cross-checking [`solve_lp`].
pub fn solve_lp_dense(lp: &LpProblem) -> LpSolution {
    let (m, n) = (lp.rows(), lp.cols());
    if m == 0 || n == 0 {
        return LpSolution::failed(LpStatus::Infeasible, lp);
    }
    let mut obj = vec![0.0; n + 1];
    obj[n] = 1.0;
    let mut prog = LinearProgram::new(obj);
    for i in 0..m {
        let mut row: Vec<f64> = lp.revenue_row(i).iter().map(|r| -r).collect();
        row.push(lp.opt[i]);
        prog.push(row, Relation::Le, 0.0);
    }
    let mut simplex_row = vec![1.0; n];
    simplex_row.push(0.0);
    prog.push(simplex_row, Relation::Eq, 1.0);
    let mut cap = vec![0.0; n];
    cap.push(1.0);
    prog.push(cap, Relation::Le, 1.0);

    let sol = simplex::solve(&prog);
    if sol.status != SimplexStatus::Optimal {
        return LpSolution::failed(LpStatus::NumericalFailure, lp);
    }
    let total: f64 = sol.x[..n].iter().sum();
    let psi: Vec<f64> = sol.x[..n].iter().map(|x| x / total).collect();
    let weights: Vec<f64> = (0..m).map(|i| sol.duals[i].max(0.0) * lp.opt[i]).collect();
    let wsum: f64 = weights.iter().sum();
    let nature: Vec<f64> = weights.iter().map(|w| if wsum > 0.0 { w / wsum } else { 0.0 }).collect();
    let bm = ratio_matrix(lp);
    let upper_bound =
        (0..n).map(|j| (0..m).map(|i| nature[i] * bm[i * n + j]).sum::<f64>()).fold(f64::NEG_INFINITY, f64::max);
    LpSolution { status: LpStatus::Optimal, lambda_star: sol.x[n], psi, nature, upper_bound, iterations: sol.pivots }
}

/// Turns LP weights into a mechanism: atoms with positive weight, with any
/// rounding slack placed on the revenue-maximizing knot.
pub fn mechanism_from_weights(info: &InformationSet, prices: &[f64], psi: &[f64]) -> Result<PricingMechanism> {
    let mut atoms: Vec<(f64, f64)> =
        prices.iter().zip(psi).filter(|(_, &w)| w > 1e-15).map(|(&p, &w)| (p, w)).collect();
    let argmax = info
        .points()
        .iter()
        .copied()
        .max_by(|a, b| (a.0 * a.1).total_cmp(&(b.0 * b.1)))
        .map(|(p, _)| p)
        .unwrap_or(info.bounds().v_lo());
    let total: f64 = atoms.iter().map(|a| a.1).sum();
    let slack = 1.0 - total;
    if let Some(atom) = atoms.iter_mut().find(|a| a.0 == argmax) {
        atom.1 += slack;
    } else {
        atoms.push((argmax, slack.max(0.0)));
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    atoms.retain(|a| a.1 > 0.0);
    PricingMechanism::new(atoms)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MaximinConfig {
    pub m: usize,
    pub focus: Option<(f64, f64)>,
    pub restriction: CellRestriction,
}

impl MaximinConfig {
    pub fn new(m: usize) -> Self {
        Self { m, ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaximinBound {
    pub lambda_star: f64,
    pub mechanism: PricingMechanism,
    pub upper_bound: f64,
    pub grid_points: usize,
    pub lp_rows: usize,
}

/// Guaranteed worst-case ratio and a mechanism attaining it.
pub fn maximin_lower_bound(info: &InformationSet, class: DistributionClass, m: usize) -> Result<MaximinBound> {
    maximin_with(info, class, &MaximinConfig::new(m))
}

pub fn maximin_with(info: &InformationSet, class: DistributionClass, cfg: &MaximinConfig) -> Result<MaximinBound> {
    let grid = build_grid_focused(info, class, cfg.m, cfg.focus)?;
    maximin_on_grid(info, class, &grid, cfg.restriction)
}

/// Maximin bound over a given grid. The grid must come from [`build_grid`] or
/// [`grid_from_points`] for the same information set and class.
pub fn maximin_on_grid(
    info: &InformationSet,
    class: DistributionClass,
    grid: &GridPartition,
    restriction: CellRestriction,
) -> Result<MaximinBound> {
    let lp = build_lp_restricted(info, class, grid, restriction)?;
    let sol = solve_lp(&lp);
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(PricingError::EmptyOptimalSet),
        LpStatus::NumericalFailure => return Err(PricingError::Numerical("restricted game did not converge".into())),
    }
    let mechanism = mechanism_from_weights(info, &lp.prices, &sol.psi)?;
    Ok(MaximinBound {
        lambda_star: sol.lambda_star.max(0.0),
        mechanism,
        upper_bound: sol.upper_bound,
        grid_points: grid.len(),
        lp_rows: lp.rows(),
    })
}
