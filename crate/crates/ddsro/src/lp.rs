//! Dense linear and mixed-integer linear programming.
//!
//! `solve_lp` is a two-phase primal simplex on a dense tableau with row duals;
//! `solve_milp` is best-bound branch-and-bound on top of it. Everything is
//! desk scale by design: correctness and determinism are the priorities, so
//! there is no sparsity, presolve, or warm starting.
//!
//! Shared tolerances: feasibility 1e-7, integrality 1e-6. The simplex uses
//! Dantzig pricing and falls back to Bland's rule after 1000 degenerate
//! pivots, so it cannot cycle; ratio-test ties otherwise go to the largest
//! pivot element. Branch-and-bound re-solves every would-be incumbent with
//! its integers fixed at the rounded values before accepting it.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

pub const FEAS_TOL: f64 = 1e-7;
pub const INT_TOL: f64 = 1e-6;
const PIVOT_TOL: f64 = 1e-9;
const DEGENERATE_PIVOT_LIMIT: usize = 1000;
const SIMPLEX_ITER_LIMIT: usize = 500_000;
pub const DEFAULT_NODE_LIMIT: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Min,
    Max,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Row {
    pub coeffs: Vec<f64>,
    pub rel: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub rows: Vec<Row>,
    /// Per-variable [lo, hi]; +-infinity allowed.
    pub bounds: Vec<(f64, f64)>,
    pub integrality: Vec<bool>,
}

impl LinearProgram {
    pub fn new(sense: Sense, objective: Vec<f64>) -> Self {
        let n = objective.len();
        LinearProgram {
            sense,
            objective,
            rows: Vec::new(),
            bounds: vec![(0.0, f64::INFINITY); n],
            integrality: vec![false; n],
        }
    }

    pub fn push_row(&mut self, coeffs: Vec<f64>, rel: Relation, rhs: f64) {
        self.rows.push(Row { coeffs, rel, rhs });
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.n_vars();
        if self.bounds.len() != n || self.integrality.len() != n {
            return Err(Error::Dimension(format!(
                "bounds/integrality length must match {n} variables"
            )));
        }
        for (i, r) in self.rows.iter().enumerate() {
            if r.coeffs.len() != n {
                return Err(Error::Dimension(format!(
                    "row {i} has {} coefficients, expected {n}",
                    r.coeffs.len()
                )));
            }
        }
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            if lo > hi {
                return Err(Error::Invalid(format!("variable {j} has lo > hi")));
            }
        }
        Ok(())
    }

    /// CPLEX-LP-like text dump for debugging; not a compatibility promise.
    pub fn to_lp_text(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        let _ = writeln!(s, "{}", if self.sense == Sense::Min { "Minimize" } else { "Maximize" });
        let _ = write!(s, " obj:");
        for (j, c) in self.objective.iter().enumerate() {
            if *c != 0.0 {
                let _ = write!(s, " {:+} x{}", c, j);
            }
        }
        let _ = writeln!(s, "\nSubject To");
        for (i, r) in self.rows.iter().enumerate() {
            let _ = write!(s, " c{}:", i);
            for (j, a) in r.coeffs.iter().enumerate() {
                if *a != 0.0 {
                    let _ = write!(s, " {:+} x{}", a, j);
                }
            }
            let rel = match r.rel {
                Relation::Le => "<=",
                Relation::Eq => "=",
                Relation::Ge => ">=",
            };
            let _ = writeln!(s, " {} {}", rel, r.rhs);
        }
        let _ = writeln!(s, "Bounds");
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            let _ = writeln!(s, " {} <= x{} <= {}", lo, j, hi);
        }
        if self.integrality.iter().any(|&b| b) {
            let _ = writeln!(s, "General");
            for (j, &b) in self.integrality.iter().enumerate() {
                if b {
                    let _ = writeln!(s, " x{}", j);
                }
            }
        }
        let _ = writeln!(s, "End");
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: Status,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Row duals in the user's sense; empty for MILPs and non-optimal statuses.
    pub duals: Vec<f64>,
    /// Reduced costs c - A^T y in the user's sense; empty unless optimal LP.
    pub reduced_costs: Vec<f64>,
}

impl LpSolution {
    fn non_optimal(status: Status) -> Self {
        LpSolution { status, x: Vec::new(), objective: f64::NAN, duals: Vec::new(), reduced_costs: Vec::new() }
    }
}

/// |c.x - y.b - z.x| scaled check value for the strong-duality invariant.
pub fn duality_residual(p: &LinearProgram, sol: &LpSolution) -> f64 {
    let cx: f64 = p.objective.iter().zip(&sol.x).map(|(c, x)| c * x).sum();
    let yb: f64 = p.rows.iter().zip(&sol.duals).map(|(r, y)| r.rhs * y).sum();
    let zx: f64 = sol.reduced_costs.iter().zip(&sol.x).map(|(z, x)| z * x).sum();
    (cx - yb - zx).abs()
}

// ---------------------------------------------------------------------------
// standardization: general bounds -> nonnegative internal variables
// ---------------------------------------------------------------------------

enum VarXform {
    /// x = lo + xhat
    Shift { j: usize, lo: f64 },
    /// x = hi - xhat (used when lo = -inf, hi finite)
    Flip { j: usize, hi: f64 },
    /// x = xp - xn (free variable)
    Split { jp: usize, jn: usize },
}

enum RowOrigin {
    User(usize),
    Bound,
}

struct StdForm {
    n_int: usize,
    xforms: Vec<VarXform>,
    cost: Vec<f64>,
    cost_offset: f64,
    rows: Vec<(Vec<f64>, Relation, f64)>,
    origins: Vec<RowOrigin>,
}

fn standardize(p: &LinearProgram) -> StdForm {
    let n = p.n_vars();
    let mut xforms = Vec::with_capacity(n);
    let mut n_int = 0usize;
    // (internal var, upper bound) rows added after user rows
    let mut ub_rows: Vec<(usize, f64)> = Vec::new();
    for &(lo, hi) in &p.bounds {
        if lo.is_finite() {
            let j = n_int;
            n_int += 1;
            if hi.is_finite() {
                ub_rows.push((j, hi - lo));
            }
            xforms.push(VarXform::Shift { j, lo });
        } else if hi.is_finite() {
            let j = n_int;
            n_int += 1;
            xforms.push(VarXform::Flip { j, hi });
        } else {
            let jp = n_int;
            let jn = n_int + 1;
            n_int += 2;
            xforms.push(VarXform::Split { jp, jn });
        }
    }

    let sign = if p.sense == Sense::Max { -1.0 } else { 1.0 };
    let mut cost = vec![0.0; n_int];
    let mut cost_offset = 0.0;
    for (uj, xf) in xforms.iter().enumerate() {
        let c = sign * p.objective[uj];
        match *xf {
            VarXform::Shift { j, lo } => {
                cost[j] += c;
                cost_offset += c * lo;
            }
            VarXform::Flip { j, hi } => {
                cost[j] -= c;
                cost_offset += c * hi;
            }
            VarXform::Split { jp, jn } => {
                cost[jp] += c;
                cost[jn] -= c;
            }
        }
    }

    let mut rows = Vec::new();
    let mut origins = Vec::new();
    for (i, r) in p.rows.iter().enumerate() {
        let mut coeffs = vec![0.0; n_int];
        let mut rhs = r.rhs;
        for (uj, xf) in xforms.iter().enumerate() {
            let a = r.coeffs[uj];
            if a == 0.0 {
                continue;
            }
            match *xf {
                VarXform::Shift { j, lo } => {
                    coeffs[j] += a;
                    rhs -= a * lo;
                }
                VarXform::Flip { j, hi } => {
                    coeffs[j] -= a;
                    rhs -= a * hi;
                }
                VarXform::Split { jp, jn } => {
                    coeffs[jp] += a;
                    coeffs[jn] -= a;
                }
            }
        }
        rows.push((coeffs, r.rel, rhs));
        origins.push(RowOrigin::User(i));
    }
    for (j, ub) in ub_rows {
        let mut coeffs = vec![0.0; n_int];
        coeffs[j] = 1.0;
        rows.push((coeffs, Relation::Le, ub));
        origins.push(RowOrigin::Bound);
    }

    StdForm { n_int, xforms, cost, cost_offset, rows, origins }
}

// ---------------------------------------------------------------------------
// dense two-phase tableau simplex
// ---------------------------------------------------------------------------

struct Tableau {
    m: usize,
    ncols: usize, // structural + slack/surplus + artificial (rhs kept separate)
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    /// Column holding +e_i for each row (slack or artificial); used for duals.
    identity_col: Vec<usize>,
    artificial: Vec<bool>,
    rhs_flipped: Vec<bool>,
}

enum PhaseOutcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn build(sf: &StdForm) -> Tableau {
        let m = sf.rows.len();
        // count extra columns
        let mut n_slack = 0;
        let mut n_art = 0;
        let mut flipped = vec![false; m];
        let mut rels = Vec::with_capacity(m);
        for (i, (_, rel, rhs)) in sf.rows.iter().enumerate() {
            let mut rel = *rel;
            if *rhs < 0.0 {
                flipped[i] = true;
                rel = match rel {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
            }
            match rel {
                Relation::Le => n_slack += 1,
                Relation::Ge => {
                    n_slack += 1;
                    n_art += 1;
                }
                Relation::Eq => n_art += 1,
            }
            rels.push(rel);
        }
        let ncols = sf.n_int + n_slack + n_art;
        let mut rows = vec![vec![0.0; ncols]; m];
        let mut rhs = vec![0.0; m];
        let mut basis = vec![0usize; m];
        let mut identity_col = vec![0usize; m];
        let mut artificial = vec![false; ncols];
        let mut next_slack = sf.n_int;
        let mut next_art = sf.n_int + n_slack;
        for (i, (coeffs, _, b)) in sf.rows.iter().enumerate() {
            let s = if flipped[i] { -1.0 } else { 1.0 };
            for (j, a) in coeffs.iter().enumerate() {
                rows[i][j] = s * a;
            }
            rhs[i] = s * b;
            match rels[i] {
                Relation::Le => {
                    rows[i][next_slack] = 1.0;
                    basis[i] = next_slack;
                    identity_col[i] = next_slack;
                    next_slack += 1;
                }
                Relation::Ge => {
                    rows[i][next_slack] = -1.0;
                    next_slack += 1;
                    rows[i][next_art] = 1.0;
                    artificial[next_art] = true;
                    basis[i] = next_art;
                    identity_col[i] = next_art;
                    next_art += 1;
                }
                Relation::Eq => {
                    rows[i][next_art] = 1.0;
                    artificial[next_art] = true;
                    basis[i] = next_art;
                    identity_col[i] = next_art;
                    next_art += 1;
                }
            }
        }
        Tableau { m, ncols, rows, rhs, basis, identity_col, artificial, rhs_flipped: flipped }
    }

    /// Runs the simplex with the given cost vector (length ncols).
    /// `obj` is mutated in place to the final reduced-cost row; returns the
    /// objective value of the final basis.
    fn run_phase(
        &mut self,
        cost: &[f64],
        ban_artificials: bool,
        obj: &mut Vec<f64>,
    ) -> Result<(PhaseOutcome, f64)> {
        // reduced-cost row for the current basis
        obj.clear();
        obj.extend_from_slice(cost);
        let mut obj_val = 0.0;
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.rows[i];
                for j in 0..self.ncols {
                    obj[j] -= cb * row[j];
                }
                obj_val -= cb * self.rhs[i];
            }
        }

        let mut degenerate = 0usize;
        for _iter in 0..SIMPLEX_ITER_LIMIT {
            let bland = degenerate >= DEGENERATE_PIVOT_LIMIT;
            // entering column
            let mut enter: Option<usize> = None;
            if bland {
                for j in 0..self.ncols {
                    if ban_artificials && self.artificial[j] {
                        continue;
                    }
                    if obj[j] < -PIVOT_TOL {
                        enter = Some(j);
                        break;
                    }
                }
            } else {
                let mut best = -PIVOT_TOL;
                for j in 0..self.ncols {
                    if ban_artificials && self.artificial[j] {
                        continue;
                    }
                    if obj[j] < best {
                        best = obj[j];
                        enter = Some(j);
                    }
                }
            }
            let Some(q) = enter else {
                return Ok((PhaseOutcome::Optimal, -obj_val));
            };

            // Ratio test. rhs dust is clamped so degenerate ratios tie exactly
            // at zero, otherwise Bland's tie-break loses its anti-cycling
            // guarantee. Ties go to the largest pivot element (numerical
            // stability); under Bland's rule, to the lowest basis index.
            let mut leave: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for i in 0..self.m {
                let a = self.rows[i][q];
                if a > PIVOT_TOL {
                    let ratio = self.rhs[i].max(0.0) / a;
                    let better = match leave {
                        None => true,
                        Some(l) => {
                            ratio < best_ratio - 1e-12
                                || (ratio < best_ratio + 1e-12
                                    && if bland {
                                        self.basis[i] < self.basis[l]
                                    } else {
                                        a > self.rows[l][q]
                                    })
                        }
                    };
                    if better {
                        best_ratio = ratio;
                        leave = Some(i);
                    }
                }
            }
            let Some(r) = leave else {
                return Ok((PhaseOutcome::Unbounded, f64::NEG_INFINITY));
            };
            if best_ratio <= PIVOT_TOL {
                degenerate += 1;
            } else {
                degenerate = 0;
            }

            // pivot on (r, q)
            let piv = self.rows[r][q];
            let inv = 1.0 / piv;
            for v in self.rows[r].iter_mut() {
                *v *= inv;
            }
            self.rhs[r] *= inv;
            let pivot_row = self.rows[r].clone();
            let pivot_rhs = self.rhs[r];
            for i in 0..self.m {
                if i == r {
                    continue;
                }
                let f = self.rows[i][q];
                if f != 0.0 {
                    let row = &mut self.rows[i];
                    for j in 0..self.ncols {
                        row[j] -= f * pivot_row[j];
                    }
                    row[q] = 0.0;
                    self.rhs[i] -= f * pivot_rhs;
                }
            }
            let f = obj[q];
            if f != 0.0 {
                for j in 0..self.ncols {
                    obj[j] -= f * pivot_row[j];
                }
                obj[q] = 0.0;
                obj_val -= f * pivot_rhs;
            }
            self.basis[r] = q;
        }
        Err(Error::SimplexIterationLimit)
    }
}

fn solve_standardized(sf: &StdForm) -> Result<(Status, Vec<f64>, f64, Vec<f64>)> {
    let mut tab = Tableau::build(sf);
    let has_artificials = tab.artificial.iter().any(|&a| a);
    let mut obj_row = Vec::new();

    if has_artificials {
        let phase1_cost: Vec<f64> =
            (0..tab.ncols).map(|j| if tab.artificial[j] { 1.0 } else { 0.0 }).collect();
        let (outcome, val) = tab.run_phase(&phase1_cost, false, &mut obj_row)?;
        match outcome {
            PhaseOutcome::Unbounded => unreachable!("phase 1 objective is bounded below by 0"),
            PhaseOutcome::Optimal => {
                if val > FEAS_TOL {
                    return Ok((Status::Infeasible, Vec::new(), f64::NAN, Vec::new()));
                }
            }
        }
        // drive basic artificials out where possible; leftover ones sit at zero
        for i in 0..tab.m {
            if tab.artificial[tab.basis[i]] {
                let mut pivot_col = None;
                for j in 0..tab.ncols {
                    if !tab.artificial[j] && tab.rows[i][j].abs() > 1e-7 {
                        pivot_col = Some(j);
                        break;
                    }
                }
                if let Some(q) = pivot_col {
                    let piv = tab.rows[i][q];
                    let inv = 1.0 / piv;
                    for v in tab.rows[i].iter_mut() {
                        *v *= inv;
                    }
                    tab.rhs[i] *= inv;
                    let pivot_row = tab.rows[i].clone();
                    let pivot_rhs = tab.rhs[i];
                    for k in 0..tab.m {
                        if k == i {
                            continue;
                        }
                        let f = tab.rows[k][q];
                        if f != 0.0 {
                            for j in 0..tab.ncols {
                                tab.rows[k][j] -= f * pivot_row[j];
                            }
                            tab.rows[k][q] = 0.0;
                            tab.rhs[k] -= f * pivot_rhs;
                        }
                    }
                    tab.basis[i] = q;
                }
            }
        }
    }

    let mut phase2_cost = vec![0.0; tab.ncols];
    phase2_cost[..sf.n_int].copy_from_slice(&sf.cost);
    let (outcome, val) = tab.run_phase(&phase2_cost, true, &mut obj_row)?;
    if let PhaseOutcome::Unbounded = outcome {
        return Ok((Status::Unbounded, Vec::new(), f64::NEG_INFINITY, Vec::new()));
    }

    // primal values of internal structural variables
    let mut xhat = vec![0.0; sf.n_int];
    for i in 0..tab.m {
        if tab.basis[i] < sf.n_int {
            xhat[tab.basis[i]] = tab.rhs[i];
        }
    }
    // duals from the reduced cost of each row's original identity column
    let mut duals_int = vec![0.0; tab.m];
    for i in 0..tab.m {
        let mut y = -obj_row[tab.identity_col[i]];
        if tab.rhs_flipped[i] {
            y = -y;
        }
        duals_int[i] = y;
    }
    Ok((Status::Optimal, xhat, val, duals_int))
}

/// Solve a pure LP by revised two-phase simplex; returns duals on optimality.
pub fn solve_lp(p: &LinearProgram) -> Result<LpSolution> {
    p.validate()?;
    if p.integrality.iter().any(|&b| b) {
        return Err(Error::Invalid("solve_lp given integrality markers; use solve_milp".into()));
    }
    let sf = standardize(p);
    let (status, xhat, val, duals_int) = solve_standardized(&sf)?;
    if status != Status::Optimal {
        return Ok(LpSolution::non_optimal(status));
    }

    let sign = if p.sense == Sense::Max { -1.0 } else { 1.0 };
    let mut x = vec![0.0; p.n_vars()];
    for (uj, xf) in sf.xforms.iter().enumerate() {
        x[uj] = match *xf {
            VarXform::Shift { j, lo } => lo + xhat[j],
            VarXform::Flip { j, hi } => hi - xhat[j],
            VarXform::Split { jp, jn } => xhat[jp] - xhat[jn],
        };
    }
    let objective = sign * (val + sf.cost_offset);

    let mut duals = vec![0.0; p.rows.len()];
    for (k, origin) in sf.origins.iter().enumerate() {
        if let RowOrigin::User(i) = origin {
            duals[*i] = sign * duals_int[k];
        }
    }
    let mut reduced_costs = vec![0.0; p.n_vars()];
    for j in 0..p.n_vars() {
        let mut z = p.objective[j];
        for (i, r) in p.rows.iter().enumerate() {
            z -= duals[i] * r.coeffs[j];
        }
        reduced_costs[j] = z;
    }
    Ok(LpSolution { status, x, objective, duals, reduced_costs })
}

/// Best-bound branch-and-bound; delegates to `solve_lp` when no variable is
/// marked integral. Optimal within absolute gap 1e-6.
pub fn solve_milp(p: &LinearProgram) -> Result<LpSolution> {
    solve_milp_with_limit(p, DEFAULT_NODE_LIMIT)
}

pub fn solve_milp_with_limit(p: &LinearProgram, node_limit: usize) -> Result<LpSolution> {
    p.validate()?;
    if !p.integrality.iter().any(|&b| b) {
        return solve_lp(p);
    }
    let sign = if p.sense == Sense::Max { -1.0 } else { 1.0 };

    // nodes ordered by parent LP bound (min sense); (bound, seq, bounds)
    struct Node {
        bound: f64,
        seq: usize,
        var_bounds: Vec<(f64, f64)>,
    }
    impl PartialEq for Node {
        fn eq(&self, other: &Self) -> bool {
            self.bound == other.bound && self.seq == other.seq
        }
    }
    impl Eq for Node {}
    impl PartialOrd for Node {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for Node {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            // reversed: BinaryHeap is a max-heap, we want lowest bound first
            other
                .bound
                .partial_cmp(&self.bound)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(other.seq.cmp(&self.seq))
        }
    }

    let mut heap = std::collections::BinaryHeap::new();
    heap.push(Node { bound: f64::NEG_INFINITY, seq: 0, var_bounds: p.bounds.clone() });
    let mut seq = 1usize;
    let mut nodes_solved = 0usize;
    let mut incumbent: Option<LpSolution> = None;
    let mut incumbent_val = f64::INFINITY; // min sense

    while let Some(node) = heap.pop() {
        if node.bound >= incumbent_val - INT_TOL {
            break; // best-bound exhausted within gap
        }
        if nodes_solved >= node_limit {
            return Err(Error::NodeLimit {
                limit: node_limit,
                incumbent: incumbent.map(|s| s.objective),
            });
        }
        nodes_solved += 1;

        let mut relax = p.clone();
        relax.bounds = node.var_bounds.clone();
        relax.integrality = vec![false; p.n_vars()];
        let sol = solve_lp(&relax)?;
        match sol.status {
            Status::Infeasible => continue,
            Status::Unbounded => return Ok(LpSolution::non_optimal(Status::Unbounded)),
            Status::Optimal => {}
        }
        let lp_val = sign * sol.objective; // min sense
        if lp_val >= incumbent_val - INT_TOL {
            continue;
        }

        // most-fractional branching, ties by lowest index
        let mut branch_var: Option<usize> = None;
        let mut best_frac = INT_TOL;
        for (j, &is_int) in p.integrality.iter().enumerate() {
            if is_int {
                let f = (sol.x[j] - sol.x[j].round()).abs();
                if f > best_frac {
                    best_frac = f;
                    branch_var = Some(j);
                }
            }
        }
        match branch_var {
            None => {
                // Integral within tolerance. Re-solve with the integers fixed
                // at their rounded values: fractional dust below INT_TOL can
                // otherwise leak through big-M rows (1e-7 times a 1e6
                // coefficient is a real constraint violation).
                let mut fixed = relax.clone();
                for (j, &is_int) in p.integrality.iter().enumerate() {
                    if is_int {
                        let v = sol.x[j].round();
                        fixed.bounds[j] = (v, v);
                    }
                }
                let fsol = solve_lp(&fixed)?;
                if fsol.status == Status::Optimal {
                    let fval = sign * fsol.objective;
                    if fval < incumbent_val {
                        incumbent_val = fval;
                        incumbent = Some(LpSolution {
                            status: Status::Optimal,
                            x: fsol.x,
                            objective: fsol.objective,
                            duals: Vec::new(),
                            reduced_costs: Vec::new(),
                        });
                    }
                } else {
                    // rounding was not actually feasible: force a branch on
                    // the integer variable with the largest fractional part
                    let mut j_branch = None;
                    let mut best = 0.0;
                    for (j, &is_int) in p.integrality.iter().enumerate() {
                        if is_int && node.var_bounds[j].0 < node.var_bounds[j].1 {
                            let f = (sol.x[j] - sol.x[j].round()).abs();
                            if j_branch.is_none() || f > best {
                                best = f;
                                j_branch = Some(j);
                            }
                        }
                    }
                    if let Some(j) = j_branch {
                        let xj = sol.x[j].round();
                        let mut down = node.var_bounds.clone();
                        down[j].1 = down[j].1.min(xj - 1.0);
                        let mut up = node.var_bounds.clone();
                        up[j].0 = up[j].0.max(xj);
                        up[j].1 = up[j].1.min(xj);
                        let mut low = node.var_bounds.clone();
                        low[j].0 = low[j].0.max(xj + 1.0);
                        for b in [down, up, low] {
                            if b[j].0 <= b[j].1 + 1e-12 {
                                heap.push(Node { bound: lp_val, seq, var_bounds: b });
                                seq += 1;
                            }
                        }
                    }
                }
            }
            Some(j) => {
                let xj = sol.x[j];
                let floor = xj.floor();
                let mut down = node.var_bounds.clone();
                down[j].1 = down[j].1.min(floor);
                let mut up = node.var_bounds.clone();
                up[j].0 = up[j].0.max(floor + 1.0);
                if down[j].0 <= down[j].1 + 1e-12 {
                    heap.push(Node { bound: lp_val, seq, var_bounds: down });
                    seq += 1;
                }
                if up[j].0 <= up[j].1 + 1e-12 {
                    heap.push(Node { bound: lp_val, seq, var_bounds: up });
                    seq += 1;
                }
            }
        }
    }

    match incumbent {
        Some(sol) => Ok(sol),
        None => Ok(LpSolution::non_optimal(Status::Infeasible)),
    }
}
