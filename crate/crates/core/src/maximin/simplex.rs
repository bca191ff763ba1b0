//! Dense two-phase primal simplex on a full tableau.
//!
//! Sized for the master problems and cross-check LPs in this crate (a few
//! thousand rows and columns at most). Pricing is Dantzig's rule; after a run
//! of degenerate pivots it switches to Bland's rule, which cannot cycle.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `maximize cᵀx` subject to the constraints and `x ≥ 0`.
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        Self { objective, constraints: Vec::new() }
    }

    pub fn push(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) {
        debug_assert_eq!(coeffs.len(), self.objective.len());
        self.constraints.push(Constraint { coeffs, relation, rhs });
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimplexStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct SimplexSolution {
    pub status: SimplexStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// One multiplier per constraint, signed so that `cᵀx = bᵀy` at optimum.
    pub duals: Vec<f64>,
    pub pivots: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    pub pivot_tol: f64,
    pub cost_tol: f64,
    pub feasibility_tol: f64,
    pub max_pivots: Option<usize>,
    /// Consecutive non-improving pivots tolerated before switching to Bland.
    pub degenerate_limit: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self { pivot_tol: 1e-10, cost_tol: 1e-11, feasibility_tol: 1e-9, max_pivots: None, degenerate_limit: 50 }
    }
}

struct Tableau {
    rows: usize,
    width: usize,
    data: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width + c]
    }

    fn rhs_col(&self) -> usize {
        self.width - 1
    }

    /// Gauss-Jordan pivot; row `rows` is the objective row.
    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.width;
        let inv = 1.0 / self.data[pr * w + pc];
        for v in &mut self.data[pr * w..(pr + 1) * w] {
            *v *= inv;
        }
        self.data[pr * w + pc] = 1.0;
        let (head, tail) = self.data.split_at_mut(pr * w);
        let (prow, tail) = tail.split_at_mut(w);
        let eliminate = |row: &mut [f64]| {
            let f = row[pc];
            if f != 0.0 {
                for (a, &b) in row.iter_mut().zip(prow.iter()) {
                    *a -= f * b;
                }
                row[pc] = 0.0;
            }
        };
        head.chunks_exact_mut(w).for_each(eliminate);
        tail.chunks_exact_mut(w).for_each(eliminate);
        self.basis[pr] = pc;
    }
}

pub fn solve(lp: &LinearProgram) -> SimplexSolution {
    solve_with(lp, &SimplexOptions::default())
}

pub fn solve_with(lp: &LinearProgram, opts: &SimplexOptions) -> SimplexSolution {
    let n = lp.num_vars();
    let m = lp.constraints.len();

    // Normalize to non-negative right-hand sides.
    let mut sign = vec![1.0; m];
    let mut rel = Vec::with_capacity(m);
    for (k, c) in lp.constraints.iter().enumerate() {
        let flip = c.rhs < 0.0;
        sign[k] = if flip { -1.0 } else { 1.0 };
        rel.push(match (c.relation, flip) {
            (Relation::Le, true) => Relation::Ge,
            (Relation::Ge, true) => Relation::Le,
            (r, _) => r,
        });
    }

    // Column layout: structural | slack or surplus per inequality | artificials.
    let mut aux_col = vec![usize::MAX; m];
    let mut art_col = vec![usize::MAX; m];
    let mut next = n;
    for k in 0..m {
        if rel[k] != Relation::Eq {
            aux_col[k] = next;
            next += 1;
        }
    }
    let first_art = next;
    for k in 0..m {
        if rel[k] != Relation::Le {
            art_col[k] = next;
            next += 1;
        }
    }
    let width = next + 1;
    let mut t = Tableau { rows: m, width, data: vec![0.0; (m + 1) * width], basis: vec![0; m] };
    for (k, c) in lp.constraints.iter().enumerate() {
        let row = &mut t.data[k * width..(k + 1) * width];
        for (dst, &a) in row[..n].iter_mut().zip(&c.coeffs) {
            *dst = sign[k] * a;
        }
        row[width - 1] = sign[k] * c.rhs;
        match rel[k] {
            Relation::Le => {
                row[aux_col[k]] = 1.0;
                t.basis[k] = aux_col[k];
            }
            Relation::Ge => {
                row[aux_col[k]] = -1.0;
                row[art_col[k]] = 1.0;
                t.basis[k] = art_col[k];
            }
            Relation::Eq => {
                row[art_col[k]] = 1.0;
                t.basis[k] = art_col[k];
            }
        }
    }

    let max_pivots = opts.max_pivots.unwrap_or(50 * (m + n) + 1000);
    let mut pivots = 0;

    // Phase 1: maximize −Σ artificials.
    if first_art < width - 1 {
        let obj = m * width;
        for k in 0..m {
            if t.basis[k] >= first_art {
                for c in 0..width {
                    if c < first_art || c == width - 1 {
                        t.data[obj + c] -= t.data[k * width + c];
                    }
                }
            }
        }
        match run(&mut t, first_art, opts, max_pivots, &mut pivots) {
            Outcome::Optimal => {}
            Outcome::Limit => return failed(SimplexStatus::IterationLimit, n, m, pivots),
            // phase 1 is bounded by construction
            Outcome::Unbounded => return failed(SimplexStatus::Infeasible, n, m, pivots),
        }
        let infeas = -t.at(m, t.rhs_col());
        let scale = 1.0 + lp.constraints.iter().map(|c| c.rhs.abs()).fold(0.0, f64::max);
        if infeas > opts.feasibility_tol * scale {
            return failed(SimplexStatus::Infeasible, n, m, pivots);
        }
        // Drive zero-valued artificials out of the basis where possible.
        for k in 0..m {
            if t.basis[k] < first_art {
                continue;
            }
            let mut best = None;
            let mut best_abs = opts.pivot_tol;
            for c in 0..first_art {
                let a = t.at(k, c).abs();
                if a > best_abs {
                    best_abs = a;
                    best = Some(c);
                }
            }
            if let Some(c) = best {
                t.pivot(k, c);
                pivots += 1;
            }
        }
    }

    // Phase 2 objective row: z_j − c_j.
    let cost = |c: usize| if c < n { lp.objective[c] } else { 0.0 };
    let obj = m * width;
    for c in 0..width {
        t.data[obj + c] = if c < width - 1 { -cost(c) } else { 0.0 };
    }
    for k in 0..m {
        let cb = cost(t.basis[k]);
        if cb != 0.0 {
            for c in 0..width {
                t.data[obj + c] += cb * t.data[k * width + c];
            }
        }
    }
    let status = match run(&mut t, first_art, opts, max_pivots, &mut pivots) {
        Outcome::Optimal => SimplexStatus::Optimal,
        Outcome::Unbounded => SimplexStatus::Unbounded,
        Outcome::Limit => SimplexStatus::IterationLimit,
    };

    let mut x = vec![0.0; n];
    for k in 0..m {
        if t.basis[k] < n {
            x[t.basis[k]] = t.at(k, t.rhs_col()).max(0.0);
        }
    }
    let duals = (0..m)
        .map(|k| {
            let y = match rel[k] {
                Relation::Le => t.at(m, aux_col[k]),
                Relation::Ge => -t.at(m, aux_col[k]),
                Relation::Eq => t.at(m, art_col[k]),
            };
            sign[k] * y
        })
        .collect();
    SimplexSolution { status, x, objective: t.at(m, t.rhs_col()), duals, pivots }
}

enum Outcome {
    Optimal,
    Unbounded,
    Limit,
}

fn failed(status: SimplexStatus, n: usize, m: usize, pivots: usize) -> SimplexSolution {
    SimplexSolution { status, x: vec![0.0; n], objective: f64::NAN, duals: vec![0.0; m], pivots }
}

/// Primal simplex iterations on the current objective row; columns at or past
/// `barred` never enter.
fn run(t: &mut Tableau, barred: usize, opts: &SimplexOptions, max_pivots: usize, pivots: &mut usize) -> Outcome {
    let m = t.rows;
    let rhs = t.rhs_col();
    let mut stalled = 0usize;
    let mut bland = false;
    loop {
        let obj = &t.data[m * t.width..m * t.width + barred];
        let entering = if bland {
            obj.iter().position(|&d| d < -opts.cost_tol)
        } else {
            let mut best = None;
            let mut best_d = -opts.cost_tol;
            for (c, &d) in obj.iter().enumerate() {
                if d < best_d {
                    best_d = d;
                    best = Some(c);
                }
            }
            best
        };
        let Some(pc) = entering else { return Outcome::Optimal };

        let mut leave: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for k in 0..m {
            let a = t.at(k, pc);
            if a <= opts.pivot_tol {
                continue;
            }
            let ratio = t.at(k, rhs).max(0.0) / a;
            let better = match leave {
                None => true,
                Some(l) => {
                    let tie = (ratio - best_ratio).abs() <= 1e-12 * (1.0 + best_ratio);
                    if ratio < best_ratio && !tie {
                        true
                    } else if tie {
                        if bland {
                            t.basis[k] < t.basis[l]
                        } else {
                            a > t.at(l, pc)
                        }
                    } else {
                        false
                    }
                }
            };
            if better {
                leave = Some(k);
                best_ratio = best_ratio.min(ratio);
            }
        }
        let Some(pr) = leave else { return Outcome::Unbounded };
        if *pivots >= max_pivots {
            return Outcome::Limit;
        }
        if best_ratio <= 1e-14 {
            stalled += 1;
            if stalled >= opts.degenerate_limit {
                bland = true;
            }
        } else {
            stalled = 0;
        }
        t.pivot(pr, pc);
        *pivots += 1;
    }
}
