//! Decomposition solver for two-stage stochastic robust programs.
//!
//! The master problem optimizes the first stage against all uncertainty
//! points enumerated so far (lower bound); each class/component subproblem
//! dualizes the inner recourse LP and maximizes over the budgeted latent
//! polytope as a MILP, using exact Glover linearization of the z*phi
//! bilinear terms (upper bound). Cuts are added until the relative gap
//! closes or the iteration cap is hit.

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::lp::{
    solve_lp, solve_milp, LinearProgram, LpSolution, Relation, Sense, Status,
};
use crate::models::CompactProblem;
use crate::sets::{BasicUncertaintySet, UncertaintySetUnion};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::time::Instant;

pub const DEFAULT_GAP_TOL: f64 = 1e-3;
pub const DEFAULT_MAX_ITERS: usize = 50;
pub const FALLBACK_BIG_M: f64 = 1e6;

/// A two-stage problem together with its data-driven uncertainty model.
#[derive(Debug, Clone)]
pub struct DdsroInstance {
    pub problem: CompactProblem,
    /// One union of basic sets per class, keyed and iterated by class id.
    pub unions: Vec<UncertaintySetUnion>,
    pub class_probs: BTreeMap<usize, f64>,
    pub gap_tol: f64,
    pub max_iters: usize,
    /// Append a penalized slack to every recourse row so the second stage
    /// is feasible for any u. Off by default.
    pub complete_recourse_slack: bool,
}

impl DdsroInstance {
    pub fn new(
        problem: CompactProblem,
        unions: Vec<UncertaintySetUnion>,
        class_probs: BTreeMap<usize, f64>,
    ) -> Self {
        DdsroInstance {
            problem,
            unions,
            class_probs,
            gap_tol: DEFAULT_GAP_TOL,
            max_iters: DEFAULT_MAX_ITERS,
            complete_recourse_slack: false,
        }
    }

    fn validate(&self) -> Result<()> {
        self.problem.validate()?;
        if self.unions.is_empty() {
            return Err(Error::Invalid("no uncertainty set unions given".into()));
        }
        let mut total = 0.0;
        let mut seen = std::collections::BTreeSet::new();
        for un in &self.unions {
            if un.basics.is_empty() {
                return Err(Error::Invalid(format!("class {} union is empty", un.class_id)));
            }
            if un.dim() != self.problem.n_u() {
                return Err(Error::Dimension(format!(
                    "class {} sets have dim {}, problem expects {}",
                    un.class_id,
                    un.dim(),
                    self.problem.n_u()
                )));
            }
            if !seen.insert(un.class_id) {
                return Err(Error::Invalid(format!("class {} appears twice", un.class_id)));
            }
            let p = self
                .class_probs
                .get(&un.class_id)
                .ok_or_else(|| Error::Invalid(format!("no probability for class {}", un.class_id)))?;
            if *p < 0.0 {
                return Err(Error::Invalid("negative class probability".into()));
            }
            total += p;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Invalid(format!(
                "class probabilities of modeled classes sum to {total}, expected 1"
            )));
        }
        Ok(())
    }
}

/// Worst-case subproblem outcome for one (class, component) pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubproblemResult {
    /// Worst-case recourse objective min_y b.y at `worst_u`.
    pub value: f64,
    pub worst_u: Vec<f64>,
    /// Optimal dual multipliers of the recourse rows.
    pub dual: Vec<f64>,
    pub z_plus: Vec<f64>,
    pub z_minus: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub name: String,
    /// Objective in the user's original sense.
    pub objective: f64,
    pub min_form_objective: f64,
    pub x: Vec<f64>,
    pub x_names: Vec<String>,
    pub iterations: Vec<IterationRecord>,
    /// Worst-case uncertainty realization per class at the incumbent.
    pub worst_case_u: BTreeMap<usize, Vec<f64>>,
    pub converged: bool,
    pub gap: f64,
    pub wall_time_s: f64,
    pub flags: Vec<String>,
}

/// Enumerated uncertainty points and incumbent bookkeeping for the master.
#[derive(Debug, Clone)]
pub struct MasterState {
    /// One map class id -> uncertainty point per cut round.
    pub cuts: Vec<BTreeMap<usize, Vec<f64>>>,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub incumbent_x: Option<Vec<f64>>,
}

impl MasterState {
    pub fn new() -> Self {
        MasterState {
            cuts: Vec::new(),
            lower_bound: f64::NEG_INFINITY,
            upper_bound: f64::INFINITY,
            incumbent_x: None,
        }
    }
}

impl Default for MasterState {
    fn default() -> Self {
        Self::new()
    }
}

/// Per-recourse-row upper bounds on the dual multipliers: max phi_t over
/// { phi >= 0 : W'phi <= b }. Returns the bounds and whether any direction
/// was unbounded and replaced by the global fallback.
pub fn big_m_bound(p: &CompactProblem) -> Result<(Vec<f64>, bool)> {
    let mr = p.w.rows;
    let ny = p.n_y();
    let mut bounds = vec![0.0; mr];
    let mut fell_back = false;
    for t in 0..mr {
        let mut obj = vec![0.0; mr];
        obj[t] = 1.0;
        let mut lp = LinearProgram::new(Sense::Max, obj);
        for n in 0..ny {
            let col: Vec<f64> = (0..mr).map(|r| p.w[(r, n)]).collect();
            lp.push_row(col, Relation::Le, p.b[n]);
        }
        let sol = solve_lp(&lp)?;
        match sol.status {
            Status::Optimal => bounds[t] = sol.objective.max(0.0),
            Status::Unbounded => {
                bounds[t] = FALLBACK_BIG_M;
                fell_back = true;
            }
            Status::Infeasible => return Err(Error::DualPolytopeEmpty),
        }
    }
    Ok((bounds, fell_back))
}

/// Worst-case recourse over one basic set at fixed x, via the dualized MILP.
pub fn solve_subproblem(
    p: &CompactProblem,
    x: &[f64],
    bs: &BasicUncertaintySet,
) -> Result<SubproblemResult> {
    let (m0, _) = big_m_bound(p)?;
    solve_subproblem_with_m(p, x, bs, &m0)
}

/// Same as `solve_subproblem` but with caller-supplied dual bounds (any
/// valid upper bounds give the same optimum; reused across iterations).
pub fn solve_subproblem_with_m(
    p: &CompactProblem,
    x: &[f64],
    bs: &BasicUncertaintySet,
    m0: &[f64],
) -> Result<SubproblemResult> {
    let mr = p.w.rows;
    let ny = p.n_y();
    let k = bs.dim();
    if k != p.n_u() {
        return Err(Error::Dimension("uncertainty set dim != problem n_u".into()));
    }
    if x.len() != p.n_x() || m0.len() != mr {
        return Err(Error::Dimension("subproblem x or big-M length".into()));
    }

    let ms = p.m.matmul(&bs.shape);
    let tx = p.t.matvec(x);
    let mmu = p.m.matvec(&bs.mu);
    let rhs0: Vec<f64> = (0..mr).map(|t| p.h[t] - tx[t] - mmu[t]).collect();

    // bilinear pairs that actually appear (MS entry nonzero)
    let gidx: Vec<(usize, usize)> = (0..mr)
        .flat_map(|t| (0..k).map(move |j| (t, j)))
        .filter(|&(t, j)| ms[(t, j)].abs() > 1e-12)
        .collect();
    let ng = gidx.len();
    let zp_off = mr;
    let zm_off = mr + k;
    let gp_off = mr + 2 * k;
    let gm_off = gp_off + ng;
    let nv = gm_off + ng;

    let mut obj = vec![0.0; nv];
    obj[..mr].copy_from_slice(&rhs0);
    for (g, &(t, j)) in gidx.iter().enumerate() {
        obj[gp_off + g] = -ms[(t, j)];
        obj[gm_off + g] = ms[(t, j)];
    }
    let mut lp = LinearProgram::new(Sense::Max, obj);
    for j in 0..k {
        lp.bounds[zp_off + j] = (0.0, 1.0);
        lp.bounds[zm_off + j] = (0.0, 1.0);
        lp.integrality[zp_off + j] = true;
        lp.integrality[zm_off + j] = true;
    }

    // dual feasibility W' phi <= b
    for n in 0..ny {
        let mut c = vec![0.0; nv];
        for t in 0..mr {
            c[t] = p.w[(t, n)];
        }
        lp.push_row(c, Relation::Le, p.b[n]);
    }
    // Glover envelopes per bilinear pair, for both sign variables
    for (g, &(t, j)) in gidx.iter().enumerate() {
        for (gcol, zcol) in [(gp_off + g, zp_off + j), (gm_off + g, zm_off + j)] {
            let mut c = vec![0.0; nv];
            c[gcol] = 1.0;
            c[t] = -1.0;
            lp.push_row(c, Relation::Le, 0.0); // G <= phi
            let mut c = vec![0.0; nv];
            c[gcol] = 1.0;
            c[zcol] = -m0[t];
            lp.push_row(c, Relation::Le, 0.0); // G <= M z
            let mut c = vec![0.0; nv];
            c[gcol] = 1.0;
            c[t] = -1.0;
            c[zcol] = -m0[t];
            lp.push_row(c, Relation::Ge, -m0[t]); // G >= phi - M (1 - z)
        }
    }
    // per-block budgets and one-hot signs
    for blk in bs.budget_blocks() {
        let mut c = vec![0.0; nv];
        for j in blk.start..blk.start + blk.len {
            c[zp_off + j] = 1.0;
            c[zm_off + j] = 1.0;
        }
        lp.push_row(c, Relation::Le, blk.budget as f64);
    }
    for j in 0..k {
        let mut c = vec![0.0; nv];
        c[zp_off + j] = 1.0;
        c[zm_off + j] = 1.0;
        lp.push_row(c, Relation::Le, 1.0);
    }

    let sol = solve_milp(&lp)?;
    match sol.status {
        Status::Optimal => {}
        Status::Unbounded => return Err(Error::IncompleteRecourse { u: bs.mu.clone() }),
        Status::Infeasible => return Err(Error::DualPolytopeEmpty),
    }

    let z_plus: Vec<f64> = (0..k).map(|j| sol.x[zp_off + j].round()).collect();
    let z_minus: Vec<f64> = (0..k).map(|j| sol.x[zm_off + j].round()).collect();
    let z: Vec<f64> = z_plus.iter().zip(&z_minus).map(|(a, b)| a - b).collect();
    let worst_u = bs.to_u(&z);

    // primal cross-check: the recourse must be feasible at the chosen vertex
    let primal = solve_lp(&p.recourse_lp(x, &worst_u))?;
    if primal.status == Status::Infeasible {
        return Err(Error::IncompleteRecourse { u: worst_u });
    }

    Ok(SubproblemResult {
        value: sol.objective,
        worst_u,
        dual: sol.x[..mr].to_vec(),
        z_plus,
        z_minus,
    })
}

/// Solve the master MILP over the enumerated points. Returns the first-stage
/// solution, the recourse estimate eta, and the master objective (a valid
/// lower bound on the min-form optimum).
pub fn solve_master(inst: &DdsroInstance, state: &MasterState) -> Result<(Vec<f64>, f64, f64)> {
    let p = &inst.problem;
    let nx = p.n_x();
    let ny = p.n_y();
    let nl = state.cuts.len();
    let ns = inst.unions.len();
    if nl == 0 {
        return Err(Error::Invalid("master needs at least one enumerated point".into()));
    }

    let eta = nx;
    let y_off = |l: usize, s: usize| nx + 1 + (l * ns + s) * ny;
    let nv = nx + 1 + nl * ns * ny;

    let mut obj = vec![0.0; nv];
    obj[..nx].copy_from_slice(&p.c);
    obj[eta] = 1.0;
    let mut lp = LinearProgram::new(Sense::Min, obj);
    lp.bounds[..nx].copy_from_slice(&p.x_bounds);
    lp.bounds[eta] = (f64::NEG_INFINITY, f64::INFINITY);
    for (j, &b) in p.integrality.iter().enumerate() {
        lp.integrality[j] = b;
    }

    for i in 0..p.a.rows {
        let mut c = vec![0.0; nv];
        c[..nx].copy_from_slice(p.a.row(i));
        lp.push_row(c, Relation::Ge, p.d[i]);
    }
    for (l, cut) in state.cuts.iter().enumerate() {
        // eta >= sum_s p_s b.y_{l,s}
        let mut c = vec![0.0; nv];
        c[eta] = 1.0;
        for (s, un) in inst.unions.iter().enumerate() {
            let ps = inst.class_probs[&un.class_id];
            for n in 0..ny {
                c[y_off(l, s) + n] = -ps * p.b[n];
            }
        }
        lp.push_row(c, Relation::Ge, 0.0);
        // recourse feasibility blocks T x + W y_{l,s} >= h - M u_{l,s}
        for (s, un) in inst.unions.iter().enumerate() {
            let u = &cut[&un.class_id];
            let mu = p.m.matvec(u);
            for r in 0..p.w.rows {
                let mut c = vec![0.0; nv];
                c[..nx].copy_from_slice(p.t.row(r));
                c[y_off(l, s)..y_off(l, s) + ny].copy_from_slice(p.w.row(r));
                lp.push_row(c, Relation::Ge, p.h[r] - mu[r]);
            }
        }
    }

    let sol = solve_milp(&lp)?;
    match sol.status {
        Status::Optimal => Ok((sol.x[..nx].to_vec(), sol.x[eta], sol.objective)),
        Status::Infeasible => Err(Error::MasterInfeasible),
        Status::Unbounded => Err(Error::Invalid("master problem unbounded".into())),
    }
}

/// Run the full decomposition. Deterministic for a fixed instance.
pub fn solve_ddsro(inst: &DdsroInstance) -> Result<SolveReport> {
    inst.validate()?;
    let start = Instant::now();
    let mut flags = Vec::new();

    let working;
    let p = if inst.complete_recourse_slack {
        let penalty =
            FALLBACK_BIG_M.max(1e6 * inst.problem.b.iter().fold(0.0f64, |a, v| a.max(v.abs())));
        flags.push("complete_recourse_slack".to_string());
        working = DdsroInstance {
            problem: inst.problem.with_slack(penalty),
            complete_recourse_slack: false,
            ..inst.clone()
        };
        &working
    } else {
        inst
    };

    let (m0, fell_back) = big_m_bound(&p.problem)?;
    if fell_back {
        flags.push("big_m_fallback".to_string());
    }

    let mut state = MasterState::new();
    // seed: the first (highest-weight) component mean of every class
    let seed: BTreeMap<usize, Vec<f64>> =
        p.unions.iter().map(|un| (un.class_id, un.basics[0].mu.clone())).collect();
    state.cuts.push(seed);

    let mut records = Vec::new();
    let mut worst_map: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut incumbent_worst: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut converged = false;
    let mut gap = f64::INFINITY;

    for it in 1..=p.max_iters {
        let (x, _eta, master_obj) = solve_master(p, &state)?;
        state.lower_bound = state.lower_bound.max(master_obj);

        let first_stage = dot(&p.problem.c, &x);
        let mut expected = 0.0;
        worst_map.clear();
        for un in &p.unions {
            let mut best: Option<SubproblemResult> = None;
            for bs in &un.basics {
                let r = solve_subproblem_with_m(&p.problem, &x, bs, &m0)?;
                // ties keep the earlier (higher-weight) component
                if best.as_ref().map_or(true, |b| r.value > b.value + 1e-12) {
                    best = Some(r);
                }
            }
            let best = best.expect("union validated non-empty");
            expected += p.class_probs[&un.class_id] * best.value;
            worst_map.insert(un.class_id, best.worst_u);
        }
        let ub_candidate = first_stage + expected;
        if ub_candidate < state.upper_bound {
            state.upper_bound = ub_candidate;
            state.incumbent_x = Some(x.clone());
            incumbent_worst = worst_map.clone();
        }

        gap = (state.upper_bound - state.lower_bound) / state.upper_bound.abs().max(1e-12);
        records.push(IterationRecord {
            iteration: it,
            lower_bound: state.lower_bound,
            upper_bound: state.upper_bound,
            gap,
        });
        if gap <= p.gap_tol {
            converged = true;
            break;
        }
        state.cuts.push(worst_map.clone());
    }
    if !converged {
        flags.push("max_iters_reached".to_string());
    }

    let x = state.incumbent_x.clone().expect("at least one iteration ran");
    let min_form = state.upper_bound;
    Ok(SolveReport {
        name: p.problem.name.clone(),
        objective: p.problem.user_objective(min_form),
        min_form_objective: min_form,
        x: x[..inst.problem.n_x()].to_vec(),
        x_names: inst.problem.x_names.clone(),
        iterations: records,
        worst_case_u: incumbent_worst,
        converged,
        gap,
        wall_time_s: start.elapsed().as_secs_f64(),
        flags,
    })
}

/// Single-set special case: no class mixture, the whole union gets weight 1.
pub fn solve_ddanro(
    problem: CompactProblem,
    union: UncertaintySetUnion,
    gap_tol: f64,
    max_iters: usize,
) -> Result<SolveReport> {
    let mut probs = BTreeMap::new();
    probs.insert(union.class_id, 1.0);
    let mut inst = DdsroInstance::new(problem, vec![union], probs);
    inst.gap_tol = gap_tol;
    inst.max_iters = max_iters;
    solve_ddsro(&inst)
}

/// Brute-force worst case over a basic set's vertices; exact oracle used in
/// tests against the dualized subproblem.
pub fn worst_case_by_enumeration(
    p: &CompactProblem,
    x: &[f64],
    bs: &BasicUncertaintySet,
) -> Result<(f64, Vec<f64>)> {
    let mut best = f64::NEG_INFINITY;
    let mut best_u = bs.mu.clone();
    for u in crate::sets::enumerate_vertices(bs)? {
        let sol: LpSolution = solve_lp(&p.recourse_lp(x, &u))?;
        let v = match sol.status {
            Status::Optimal => sol.objective,
            Status::Infeasible => return Err(Error::IncompleteRecourse { u }),
            Status::Unbounded => return Err(Error::DualPolytopeEmpty),
        };
        if v > best {
            best = v;
            best_u = u;
        }
    }
    Ok((best, best_u))
}
