//! Canonical two-stage problem representation and concrete models.
//!
//! `CompactProblem` holds the min-form data (c, b, A, d, W, h, T, M) with
//! recourse rows W y >= h - T x - M u. Builders cover the three-item
//! newsvendor-style motivating example and the multi-period process-network
//! planning model; comparator solvers (deterministic, scenario stochastic
//! program, box ARO) and the synthetic data generator live here too.

use crate::dataio::LabeledDataset;
use crate::error::{Error, Result};
use crate::linalg::{sym_sqrt, Mat};
use crate::lp::{LinearProgram, Relation, Sense};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Canonical min-form two-stage problem.
///
/// First stage: min c.x s.t. A x >= d, x >= 0 (bounds), integrality markers.
/// Second stage: min b.y s.t. W y >= h - T x - M u, y >= 0.
/// `maximization` records that the user problem was negated into min form.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompactProblem {
    pub name: String,
    pub c: Vec<f64>,
    pub b: Vec<f64>,
    pub a: Mat,
    pub d: Vec<f64>,
    pub w: Mat,
    pub h: Vec<f64>,
    pub t: Mat,
    pub m: Mat,
    pub integrality: Vec<bool>,
    pub x_bounds: Vec<(f64, f64)>,
    pub maximization: bool,
    pub x_names: Vec<String>,
    pub y_names: Vec<String>,
}

impl CompactProblem {
    pub fn n_x(&self) -> usize {
        self.c.len()
    }
    pub fn n_y(&self) -> usize {
        self.b.len()
    }
    pub fn n_u(&self) -> usize {
        self.m.cols
    }
    pub fn n_recourse_rows(&self) -> usize {
        self.w.rows
    }

    pub fn validate(&self) -> Result<()> {
        let (nx, ny) = (self.n_x(), self.n_y());
        let mr = self.w.rows;
        if self.a.cols != nx || self.a.rows != self.d.len() {
            return Err(Error::Dimension("A/d inconsistent with x".into()));
        }
        if self.w.cols != ny || self.h.len() != mr || self.t.rows != mr || self.t.cols != nx {
            return Err(Error::Dimension("W/h/T inconsistent".into()));
        }
        if self.m.rows != mr {
            return Err(Error::Dimension("M row count must match recourse rows".into()));
        }
        if self.integrality.len() != nx || self.x_bounds.len() != nx {
            return Err(Error::Dimension("integrality/bounds must match x".into()));
        }
        Ok(())
    }

    /// Translate a min-form objective value back to the user's sense.
    pub fn user_objective(&self, min_form: f64) -> f64 {
        if self.maximization {
            -min_form
        } else {
            min_form
        }
    }

    /// Single MILP with the uncertainty fixed at `u`.
    pub fn deterministic_milp(&self, u: &[f64]) -> LinearProgram {
        let (nx, ny) = (self.n_x(), self.n_y());
        let mut obj = self.c.clone();
        obj.extend_from_slice(&self.b);
        let mut p = LinearProgram::new(Sense::Min, obj);
        p.bounds[..nx].copy_from_slice(&self.x_bounds);
        for (j, &b) in self.integrality.iter().enumerate() {
            p.integrality[j] = b;
        }
        for i in 0..self.a.rows {
            let mut c = vec![0.0; nx + ny];
            c[..nx].copy_from_slice(self.a.row(i));
            p.push_row(c, Relation::Ge, self.d[i]);
        }
        let mu = self.m.matvec(u);
        for r in 0..self.w.rows {
            let mut c = vec![0.0; nx + ny];
            c[..nx].copy_from_slice(self.t.row(r));
            c[nx..].copy_from_slice(self.w.row(r));
            p.push_row(c, Relation::Ge, self.h[r] - mu[r]);
        }
        p
    }

    /// The inner recourse LP min b.y s.t. W y >= h - T x - M u.
    pub fn recourse_lp(&self, x: &[f64], u: &[f64]) -> LinearProgram {
        let ny = self.n_y();
        let mut p = LinearProgram::new(Sense::Min, self.b.clone());
        let tx = self.t.matvec(x);
        let mu = self.m.matvec(u);
        for r in 0..self.w.rows {
            p.push_row(self.w.row(r).to_vec(), Relation::Ge, self.h[r] - tx[r] - mu[r]);
        }
        debug_assert_eq!(p.n_vars(), ny);
        p
    }

    /// Complete-recourse variant: one penalized slack per recourse row, so the
    /// second stage is feasible for every u.
    pub fn with_slack(&self, penalty: f64) -> CompactProblem {
        let mr = self.w.rows;
        let ny = self.n_y();
        let mut w = Mat::zeros(mr, ny + mr);
        for r in 0..mr {
            w.data[r * (ny + mr)..r * (ny + mr) + ny].copy_from_slice(self.w.row(r));
            w[(r, ny + r)] = 1.0;
        }
        let mut b = self.b.clone();
        b.extend(std::iter::repeat(penalty).take(mr));
        let mut y_names = self.y_names.clone();
        y_names.extend((0..mr).map(|r| format!("slack_{r}")));
        CompactProblem { w, b, y_names, ..self.clone() }
    }
}

/// Eq.-(12)-style motivating example: three items, shared first-stage
/// capacity 200, recourse twice as expensive per item.
pub fn build_motivating_example() -> CompactProblem {
    let a = Mat::from_rows(&[vec![-1.0, -1.0, -1.0]]);
    CompactProblem {
        name: "motivating".into(),
        c: vec![3.0, 5.0, 6.0],
        b: vec![6.0, 10.0, 12.0],
        a,
        d: vec![-200.0],
        w: Mat::identity(3),
        h: vec![0.0; 3],
        t: Mat::identity(3),
        m: Mat::identity(3).scale(-1.0),
        integrality: vec![false; 3],
        x_bounds: vec![(0.0, f64::INFINITY); 3],
        maximization: false,
        x_names: vec!["x1".into(), "x2".into(), "x3".into()],
        y_names: vec!["y1".into(), "y2".into(), "y3".into()],
    }
}

// ---------------------------------------------------------------------------
// process-network planning
// ---------------------------------------------------------------------------

/// One uncertain supply/demand coordinate: a single draw shared by the listed
/// periods of one chemical.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UncertainCoord {
    pub chemical: usize,
    pub periods: Vec<usize>,
}

/// Multi-period process-network planning data.
///
/// Conventions: `kappa[i][j]` is the amount of chemical j consumed (positive)
/// or produced (negative) per unit operating level of process i. Periods with
/// `qe_hi == 0` admit no expansion and their Y variable is fixed to zero.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanningInstance {
    pub name: String,
    pub n_processes: usize,
    pub n_chemicals: usize,
    pub n_periods: usize,
    /// Variable investment cost per unit capacity, [process][period].
    pub c1: Vec<Vec<f64>>,
    /// Fixed investment cost, [process][period].
    pub c2: Vec<Vec<f64>>,
    /// Unit operating cost, [process][period].
    pub c3: Vec<Vec<f64>>,
    /// Purchase price, [chemical][period].
    pub c4: Vec<Vec<f64>>,
    /// Sale price, [chemical][period].
    pub v: Vec<Vec<f64>>,
    /// Capacity expansion bounds, [process][period].
    pub qe_lo: Vec<Vec<f64>>,
    pub qe_hi: Vec<Vec<f64>>,
    /// Max number of expansions per process.
    pub ce: Vec<usize>,
    /// Investment budget per period.
    pub cb: Vec<f64>,
    /// Mass-balance coefficients, [process][chemical].
    pub kappa: Vec<Vec<f64>>,
    /// Initial capacities.
    pub q0: Vec<f64>,
    /// Nominal supply availability, [chemical][period].
    pub supply: Vec<Vec<f64>>,
    /// Nominal demand, [chemical][period].
    pub demand: Vec<Vec<f64>>,
    /// Uncertain demand coordinates (u vector prefix, in order).
    pub uncertain_demand: Vec<UncertainCoord>,
    /// Uncertain supply coordinates (u vector suffix, in order).
    pub uncertain_supply: Vec<UncertainCoord>,
}

impl PlanningInstance {
    pub fn n_u(&self) -> usize {
        self.uncertain_demand.len() + self.uncertain_supply.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (ni, nj, nt) = (self.n_processes, self.n_chemicals, self.n_periods);
        let chk_it = |v: &Vec<Vec<f64>>, name: &str| -> Result<()> {
            if v.len() != ni || v.iter().any(|r| r.len() != nt) {
                return Err(Error::Dimension(format!("{name} must be {ni}x{nt}")));
            }
            Ok(())
        };
        let chk_jt = |v: &Vec<Vec<f64>>, name: &str| -> Result<()> {
            if v.len() != nj || v.iter().any(|r| r.len() != nt) {
                return Err(Error::Dimension(format!("{name} must be {nj}x{nt}")));
            }
            Ok(())
        };
        chk_it(&self.c1, "c1")?;
        chk_it(&self.c2, "c2")?;
        chk_it(&self.c3, "c3")?;
        chk_jt(&self.c4, "c4")?;
        chk_jt(&self.v, "v")?;
        chk_it(&self.qe_lo, "qe_lo")?;
        chk_it(&self.qe_hi, "qe_hi")?;
        chk_jt(&self.supply, "supply")?;
        chk_jt(&self.demand, "demand")?;
        if self.ce.len() != ni || self.cb.len() != nt || self.q0.len() != ni {
            return Err(Error::Dimension("ce/cb/q0 lengths".into()));
        }
        if self.kappa.len() != ni || self.kappa.iter().any(|r| r.len() != nj) {
            return Err(Error::Dimension(format!("kappa must be {ni}x{nj}")));
        }
        for (i, (lo, hi)) in self.qe_lo.iter().flatten().zip(self.qe_hi.iter().flatten()).enumerate()
        {
            if lo > hi {
                return Err(Error::Invalid(format!("qe_lo > qe_hi at flat index {i}")));
            }
        }
        if self.kappa.iter().flatten().any(|k| !k.is_finite()) {
            return Err(Error::Invalid("kappa has non-finite entries".into()));
        }
        // every uncertain coordinate maps to distinct (chemical, period) pairs
        let mut seen = std::collections::BTreeSet::new();
        for (kind, coords) in
            [("demand", &self.uncertain_demand), ("supply", &self.uncertain_supply)]
        {
            for c in coords.iter() {
                if c.chemical >= nj {
                    return Err(Error::Invalid(format!("uncertain {kind} chemical out of range")));
                }
                if c.periods.is_empty() {
                    return Err(Error::Invalid(format!("uncertain {kind} coord with no periods")));
                }
                for &t in &c.periods {
                    if t >= nt {
                        return Err(Error::Invalid(format!("uncertain {kind} period out of range")));
                    }
                    if !seen.insert((kind, c.chemical, t)) {
                        return Err(Error::Invalid(format!(
                            "uncertain {kind} ({}, {t}) mapped twice",
                            c.chemical
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Nominal u vector (demand coords first, then supply) from the nominal
    /// supply/demand tables, averaging over each coordinate's periods.
    pub fn nominal_u(&self) -> Vec<f64> {
        let avg = |table: &Vec<Vec<f64>>, c: &UncertainCoord| {
            c.periods.iter().map(|&t| table[c.chemical][t]).sum::<f64>() / c.periods.len() as f64
        };
        let mut u: Vec<f64> =
            self.uncertain_demand.iter().map(|c| avg(&self.demand, c)).collect();
        u.extend(self.uncertain_supply.iter().map(|c| avg(&self.supply, c)));
        u
    }
}

/// Build the compact min-form problem from a planning instance.
///
/// First stage x = (QE_it, Q_it, Y_it) with Y binary (fixed to 0 where
/// qe_hi = 0); second stage y = (W_it operating levels, P_jt purchases,
/// SA_jt sales). The NPV objective is negated into min form. Uncertain
/// supply/demand coordinates enter their availability rows through M.
pub fn build_planning_problem(pi: &PlanningInstance) -> Result<CompactProblem> {
    pi.validate()?;
    let (ni, nj, nt) = (pi.n_processes, pi.n_chemicals, pi.n_periods);
    let nx = 3 * ni * nt;
    let ny = ni * nt + 2 * nj * nt;
    let nu = pi.n_u();

    let qe = |i: usize, t: usize| i * nt + t;
    let qq = |i: usize, t: usize| ni * nt + i * nt + t;
    let yy = |i: usize, t: usize| 2 * ni * nt + i * nt + t;
    let wv = |i: usize, t: usize| i * nt + t;
    let pv = |j: usize, t: usize| ni * nt + j * nt + t;
    let sa = |j: usize, t: usize| ni * nt + nj * nt + j * nt + t;

    // map (chemical, period) -> u index for demand / supply
    let mut dem_u = vec![vec![None; nt]; nj];
    let mut sup_u = vec![vec![None; nt]; nj];
    for (k, c) in pi.uncertain_demand.iter().enumerate() {
        for &t in &c.periods {
            dem_u[c.chemical][t] = Some(k);
        }
    }
    let off = pi.uncertain_demand.len();
    for (k, c) in pi.uncertain_supply.iter().enumerate() {
        for &t in &c.periods {
            sup_u[c.chemical][t] = Some(off + k);
        }
    }

    // objective, min form (negated NPV): first stage pays investment,
    // second stage pays operating + purchases minus revenue
    let mut c = vec![0.0; nx];
    let mut b = vec![0.0; ny];
    for i in 0..ni {
        for t in 0..nt {
            c[qe(i, t)] = pi.c1[i][t];
            c[yy(i, t)] = pi.c2[i][t];
            b[wv(i, t)] = pi.c3[i][t];
        }
    }
    for j in 0..nj {
        for t in 0..nt {
            b[pv(j, t)] = pi.c4[j][t];
            b[sa(j, t)] = -pi.v[j][t];
        }
    }

    // first-stage rows A x >= d
    let mut a_rows: Vec<Vec<f64>> = Vec::new();
    let mut d = Vec::new();
    for i in 0..ni {
        for t in 0..nt {
            // expansion bounds: QE - qe_lo Y >= 0 and qe_hi Y - QE >= 0
            let mut r = vec![0.0; nx];
            r[qe(i, t)] = 1.0;
            r[yy(i, t)] = -pi.qe_lo[i][t];
            a_rows.push(r);
            d.push(0.0);
            let mut r = vec![0.0; nx];
            r[qe(i, t)] = -1.0;
            r[yy(i, t)] = pi.qe_hi[i][t];
            a_rows.push(r);
            d.push(0.0);
            // capacity telescoping Q_it = Q_{i,t-1} + QE_it, as two rows
            let mut r = vec![0.0; nx];
            r[qq(i, t)] = 1.0;
            r[qe(i, t)] = -1.0;
            if t > 0 {
                r[qq(i, t - 1)] = -1.0;
            }
            let rhs = if t == 0 { pi.q0[i] } else { 0.0 };
            a_rows.push(r.clone());
            d.push(rhs);
            r.iter_mut().for_each(|v| *v = -*v);
            a_rows.push(r);
            d.push(-rhs);
        }
        // expansion count: -sum_t Y_it >= -ce_i
        let mut r = vec![0.0; nx];
        for t in 0..nt {
            r[yy(i, t)] = -1.0;
        }
        a_rows.push(r);
        d.push(-(pi.ce[i] as f64));
    }
    for t in 0..nt {
        // budget: -sum_i (c1 QE + c2 Y) >= -cb_t
        let mut r = vec![0.0; nx];
        for i in 0..ni {
            r[qe(i, t)] = -pi.c1[i][t];
            r[yy(i, t)] = -pi.c2[i][t];
        }
        a_rows.push(r);
        d.push(-pi.cb[t]);
    }

    // recourse rows W y >= h - T x - M u
    let mr = ni * nt + nj * nt + 2 * nj * nt;
    let mut w = Mat::zeros(mr, ny);
    let mut t_mat = Mat::zeros(mr, nx);
    let mut m_mat = Mat::zeros(mr, nu);
    let mut h = vec![0.0; mr];
    let mut row = 0;
    // production capacity: -W_it >= -Q_it  ->  T coeff +1 on Q
    for i in 0..ni {
        for t in 0..nt {
            w[(row, wv(i, t))] = -1.0;
            t_mat[(row, qq(i, t))] = 1.0;
            row += 1;
        }
    }
    // mass balance: P - sum_i kappa_ij W - SA >= 0 (free disposal; binding
    // at any optimum with positive purchase costs)
    for j in 0..nj {
        for t in 0..nt {
            w[(row, pv(j, t))] = 1.0;
            w[(row, sa(j, t))] = -1.0;
            for i in 0..ni {
                if pi.kappa[i][j] != 0.0 {
                    w[(row, wv(i, t))] = -pi.kappa[i][j];
                }
            }
            row += 1;
        }
    }
    // supply availability: -P_jt >= -su_jt
    for j in 0..nj {
        for t in 0..nt {
            w[(row, pv(j, t))] = -1.0;
            match sup_u[j][t] {
                Some(k) => m_mat[(row, k)] = 1.0,
                None => h[row] = -pi.supply[j][t],
            }
            row += 1;
        }
    }
    // demand: -SA_jt >= -du_jt
    for j in 0..nj {
        for t in 0..nt {
            w[(row, sa(j, t))] = -1.0;
            match dem_u[j][t] {
                Some(k) => m_mat[(row, k)] = 1.0,
                None => h[row] = -pi.demand[j][t],
            }
            row += 1;
        }
    }
    debug_assert_eq!(row, mr);

    let mut integrality = vec![false; nx];
    let mut x_bounds = vec![(0.0, f64::INFINITY); nx];
    for i in 0..ni {
        for t in 0..nt {
            integrality[yy(i, t)] = true;
            // expansion disabled when qe_hi = 0: fix Y to zero
            x_bounds[yy(i, t)] = if pi.qe_hi[i][t] > 0.0 { (0.0, 1.0) } else { (0.0, 0.0) };
        }
    }

    let mut x_names = Vec::with_capacity(nx);
    for (prefix, _) in [("QE", 0), ("Q", 1), ("Y", 2)] {
        for i in 0..ni {
            for t in 0..nt {
                x_names.push(format!("{prefix}_{i}_{t}"));
            }
        }
    }
    let mut y_names = Vec::with_capacity(ny);
    for i in 0..ni {
        for t in 0..nt {
            y_names.push(format!("W_{i}_{t}"));
        }
    }
    for (prefix, _) in [("P", 0), ("SA", 1)] {
        for j in 0..nj {
            for t in 0..nt {
                y_names.push(format!("{prefix}_{j}_{t}"));
            }
        }
    }

    let cp = CompactProblem {
        name: pi.name.clone(),
        c,
        b,
        a: Mat::from_rows(&a_rows),
        d,
        w,
        h,
        t: t_mat,
        m: m_mat,
        integrality,
        x_bounds,
        maximization: true,
        x_names,
        y_names,
    };
    cp.validate()?;
    Ok(cp)
}

/// The synthetic 5-chemical / 3-process / 10-period instance shipped with the
/// repo. The network shape follows the small case study pattern (A-C raw
/// materials, C also producible, D-E products); all numbers are synthetic.
pub fn synthetic_planning_instance() -> PlanningInstance {
    let ni = 3;
    let nj = 5;
    let nt = 10;
    let _ = ni;
    let per_jt = |vals: [f64; 5]| vals.iter().map(|&v| vec![v; nt]).collect::<Vec<_>>();

    // expansions allowed in the first four periods only
    let mut qe_hi = vec![vec![0.0; nt]; ni];
    for r in qe_hi.iter_mut() {
        for t in 0..4 {
            r[t] = 100.0;
        }
    }
    let mut qe_lo = vec![vec![0.0; nt]; ni];
    for r in qe_lo.iter_mut() {
        for t in 0..4 {
            r[t] = 5.0;
        }
    }

    PlanningInstance {
        name: "planning-small".into(),
        n_processes: ni,
        n_chemicals: nj,
        n_periods: nt,
        c1: vec![vec![3.0; nt], vec![3.5; nt], vec![2.5; nt]],
        c2: vec![vec![20.0; nt], vec![25.0; nt], vec![15.0; nt]],
        c3: vec![vec![1.5; nt], vec![1.8; nt], vec![2.0; nt]],
        c4: per_jt([5.0, 4.0, 8.0, 0.0, 0.0]),
        v: per_jt([0.0, 0.0, 0.0, 25.0, 28.0]),
        qe_lo,
        qe_hi,
        ce: vec![2, 2, 2],
        cb: vec![500.0; nt],
        // rows: process 1 consumes B makes D; process 2 consumes C makes E;
        // process 3 consumes A makes C
        kappa: vec![
            vec![0.0, 1.2, 0.0, -1.0, 0.0],
            vec![0.0, 0.0, 1.1, 0.0, -1.0],
            vec![1.3, 0.0, -1.0, 0.0, 0.0],
        ],
        q0: vec![0.0; ni],
        supply: per_jt([100.0, 80.0, 50.0, 0.0, 0.0]),
        demand: per_jt([0.0, 0.0, 0.0, 60.0, 50.0]),
        uncertain_demand: vec![
            UncertainCoord { chemical: 3, periods: (0..nt).collect() },
            UncertainCoord { chemical: 4, periods: (0..nt).collect() },
        ],
        uncertain_supply: vec![
            UncertainCoord { chemical: 0, periods: (0..nt).collect() },
            UncertainCoord { chemical: 1, periods: (0..nt).collect() },
            UncertainCoord { chemical: 2, periods: (0..nt).collect() },
        ],
    }
}

/// Pair demand and supply set unions class-by-class into joint sets over the
/// full u vector (demand coordinates first, matching `build_planning_problem`).
/// Each joint basic crosses one demand basic with one supply basic; the l1
/// budgets stay separate per block.
pub fn build_demand_supply_unions(
    demand: &[crate::sets::UncertaintySetUnion],
    supply: &[crate::sets::UncertaintySetUnion],
) -> Result<Vec<crate::sets::UncertaintySetUnion>> {
    let by_id: std::collections::BTreeMap<usize, _> =
        supply.iter().map(|u| (u.class_id, u)).collect();
    if by_id.len() != demand.len() {
        return Err(Error::Invalid("demand and supply class lists differ".into()));
    }
    let mut joint = Vec::with_capacity(demand.len());
    for d in demand {
        let s = by_id
            .get(&d.class_id)
            .ok_or_else(|| Error::Invalid(format!("class {} missing on supply side", d.class_id)))?;
        let mut basics = Vec::with_capacity(d.basics.len() * s.basics.len());
        for db in &d.basics {
            for sb in &s.basics {
                basics.push(db.cross(sb)?);
            }
        }
        // highest joint weight first so the decomposition seeds from it
        basics.sort_by(|a, b| b.gamma.partial_cmp(&a.gamma).unwrap());
        joint.push(crate::sets::UncertaintySetUnion { class_id: d.class_id, basics });
    }
    Ok(joint)
}

// ---------------------------------------------------------------------------
// comparator solvers
// ---------------------------------------------------------------------------

/// Max scenario count accepted by the extensive-form stochastic program.
pub const SCENARIO_CAP: usize = 500;

fn single_shot_report(
    p: &CompactProblem,
    name_suffix: &str,
    min_form: f64,
    x: Vec<f64>,
    wall_time_s: f64,
    flags: Vec<String>,
) -> crate::robust::SolveReport {
    crate::robust::SolveReport {
        name: format!("{}:{name_suffix}", p.name),
        objective: p.user_objective(min_form),
        min_form_objective: min_form,
        x,
        x_names: p.x_names.clone(),
        iterations: Vec::new(),
        worst_case_u: std::collections::BTreeMap::new(),
        converged: true,
        gap: 0.0,
        wall_time_s,
        flags,
    }
}

/// Solve the problem with the uncertainty fixed at a single nominal point.
pub fn solve_deterministic(p: &CompactProblem, u: &[f64]) -> Result<crate::robust::SolveReport> {
    let start = std::time::Instant::now();
    let sol = crate::lp::solve_milp(&p.deterministic_milp(u))?;
    match sol.status {
        crate::lp::Status::Optimal => {}
        crate::lp::Status::Infeasible => return Err(Error::Invalid("deterministic model infeasible".into())),
        crate::lp::Status::Unbounded => return Err(Error::Invalid("deterministic model unbounded".into())),
    }
    Ok(single_shot_report(
        p,
        "deterministic",
        sol.objective,
        sol.x[..p.n_x()].to_vec(),
        start.elapsed().as_secs_f64(),
        vec!["deterministic".into()],
    ))
}

/// Extensive-form two-stage stochastic program over equiprobable scenarios.
pub fn solve_scenario_sp(
    p: &CompactProblem,
    scenarios: &[Vec<f64>],
) -> Result<crate::robust::SolveReport> {
    if scenarios.is_empty() {
        return Err(Error::Invalid("scenario program needs at least one scenario".into()));
    }
    if scenarios.len() > SCENARIO_CAP {
        return Err(Error::ScenarioCap { got: scenarios.len(), cap: SCENARIO_CAP });
    }
    let start = std::time::Instant::now();
    let (nx, ny) = (p.n_x(), p.n_y());
    let ns = scenarios.len();
    let nv = nx + ns * ny;
    let w = 1.0 / ns as f64;
    let mut obj = p.c.clone();
    for _ in 0..ns {
        obj.extend(p.b.iter().map(|b| w * b));
    }
    let mut lp = LinearProgram::new(Sense::Min, obj);
    lp.bounds[..nx].copy_from_slice(&p.x_bounds);
    for (j, &b) in p.integrality.iter().enumerate() {
        lp.integrality[j] = b;
    }
    for i in 0..p.a.rows {
        let mut c = vec![0.0; nv];
        c[..nx].copy_from_slice(p.a.row(i));
        lp.push_row(c, Relation::Ge, p.d[i]);
    }
    for (k, u) in scenarios.iter().enumerate() {
        let mu = p.m.matvec(u);
        let off = nx + k * ny;
        for r in 0..p.w.rows {
            let mut c = vec![0.0; nv];
            c[..nx].copy_from_slice(p.t.row(r));
            c[off..off + ny].copy_from_slice(p.w.row(r));
            lp.push_row(c, Relation::Ge, p.h[r] - mu[r]);
        }
    }
    let sol = crate::lp::solve_milp(&lp)?;
    if sol.status != crate::lp::Status::Optimal {
        return Err(Error::Invalid(format!("scenario program not optimal: {:?}", sol.status)));
    }
    Ok(single_shot_report(
        p,
        "scenario-sp",
        sol.objective,
        sol.x[..nx].to_vec(),
        start.elapsed().as_secs_f64(),
        vec![format!("scenarios={ns}")],
    ))
}

/// Adaptive robust optimization over the axis-aligned box spanned by the
/// pooled data points.
pub fn solve_box_aro(
    p: &CompactProblem,
    points: &[Vec<f64>],
    gap_tol: f64,
    max_iters: usize,
) -> Result<crate::robust::SolveReport> {
    let bs = crate::sets::box_from_data(points)?;
    let union = crate::sets::UncertaintySetUnion { class_id: 0, basics: vec![bs] };
    let mut rep = crate::robust::solve_ddanro(p.clone(), union, gap_tol, max_iters)?;
    rep.name = format!("{}:box-aro", p.name);
    rep.flags.push("box_aro".into());
    Ok(rep)
}

// ---------------------------------------------------------------------------
// synthetic motivating data
// ---------------------------------------------------------------------------

struct ClassSpec {
    label: usize,
    components: Vec<(Vec<f64>, Mat, usize)>, // (mean, covariance, count)
}

fn motivating_covariance(sd: f64) -> Mat {
    let corr = Mat::from_rows(&[
        vec![1.0, 0.5, 0.3],
        vec![0.5, 1.0, 0.4],
        vec![0.3, 0.4, 1.0],
    ]);
    corr.scale(sd * sd)
}

/// 3-dimensional labeled Gaussian-mixture data for the motivating example:
/// classes 1-3 bimodal, class 4 unimodal, counts exactly (200, 400, 300, 100)
/// at L = 1000. Counts scale proportionally for other L (L must be a
/// multiple of 20 so every component keeps an integer count).
pub fn gen_synthetic_motivating(seed: u64, total: usize) -> Result<LabeledDataset> {
    if total == 0 || total % 20 != 0 {
        return Err(Error::Invalid("sample count must be a positive multiple of 20".into()));
    }
    let unit = total / 20; // 50 at L=1000
    let cov_small = motivating_covariance(1.5);
    let cov_wide = motivating_covariance(2.5);
    let specs = vec![
        ClassSpec {
            label: 1,
            components: vec![
                (vec![25.0, 35.0, 30.0], cov_small.clone(), 2 * unit),
                (vec![45.0, 20.0, 50.0], cov_small.clone(), 2 * unit),
            ],
        },
        ClassSpec {
            label: 2,
            components: vec![
                (vec![55.0, 45.0, 40.0], cov_wide.clone(), 4 * unit),
                (vec![35.0, 60.0, 55.0], cov_wide.clone(), 4 * unit),
            ],
        },
        ClassSpec {
            label: 3,
            components: vec![
                (vec![20.0, 25.0, 70.0], cov_small.clone(), 3 * unit),
                (vec![60.0, 40.0, 25.0], cov_wide, 3 * unit),
            ],
        },
        ClassSpec {
            label: 4,
            components: vec![(vec![70.0, 65.0, 80.0], cov_small, 2 * unit)],
        },
    ];

    let mut points = Vec::with_capacity(total);
    let mut labels = Vec::with_capacity(total);
    for spec in &specs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(1_000_003).wrapping_add(spec.label as u64));
        for (mean, cov, count) in &spec.components {
            let root = sym_sqrt(cov).expect("covariance is PD");
            for _ in 0..*count {
                let z: Vec<f64> = (0..3).map(|_| standard_normal(&mut rng)).collect();
                let dev = root.matvec(&z);
                points.push(mean.iter().zip(&dev).map(|(m, d)| m + d).collect());
                labels.push(spec.label);
            }
        }
    }
    LabeledDataset::new(3, points, labels)
}

/// Labeled demand (2-d) and supply (3-d) samples for the synthetic planning
/// instance: two market classes, 60/40 split, unimodal per class. `total`
/// must be a multiple of 5.
pub fn gen_synthetic_planning(seed: u64, total: usize) -> Result<(LabeledDataset, LabeledDataset)> {
    if total == 0 || total % 5 != 0 {
        return Err(Error::Invalid("sample count must be a positive multiple of 5".into()));
    }
    let counts = [3 * total / 5, 2 * total / 5];
    // class 1 = normal market, class 2 = boom (higher demand, tighter supply)
    let demand_centers = [vec![55.0, 45.0], vec![70.0, 60.0]];
    let supply_centers = [vec![100.0, 80.0, 50.0], vec![90.0, 70.0, 45.0]];
    let sample = |centers: &[Vec<f64>; 2], sd: f64, tag: u64| -> Result<LabeledDataset> {
        let dim = centers[0].len();
        let mut points = Vec::with_capacity(total);
        let mut labels = Vec::with_capacity(total);
        for (cls, center) in centers.iter().enumerate() {
            let mut rng =
                ChaCha8Rng::seed_from_u64(seed.wrapping_mul(7_368_787).wrapping_add(tag * 10 + cls as u64));
            for _ in 0..counts[cls] {
                points.push(center.iter().map(|m| m + sd * standard_normal(&mut rng)).collect());
                labels.push(cls + 1);
            }
        }
        LabeledDataset::new(dim, points, labels)
    };
    Ok((sample(&demand_centers, 2.0, 1)?, sample(&supply_centers, 3.0, 2)?))
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(1e-300);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::estimate_class_probabilities;
    use crate::lp::{solve_lp, solve_milp, Status};

    #[test]
    fn motivating_zero_uncertainty_zero_cost() {
        let p = build_motivating_example();
        let sol = solve_lp(&p.deterministic_milp(&[0.0, 0.0, 0.0])).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert!(sol.objective.abs() < 1e-9);
    }

    #[test]
    fn motivating_first_stage_covers_demand() {
        let p = build_motivating_example();
        let sol = solve_lp(&p.deterministic_milp(&[100.0, 100.0, 100.0])).unwrap();
        assert!((sol.objective - 1700.0).abs() < 1e-7);
    }

    #[test]
    fn motivating_recourse_only_value() {
        let p = build_motivating_example();
        let sol = solve_lp(&p.recourse_lp(&[0.0; 3], &[1.0, 1.0, 1.0])).unwrap();
        assert!((sol.objective - 28.0).abs() < 1e-9);
    }

    #[test]
    fn synthetic_counts_and_probabilities() {
        let ds = gen_synthetic_motivating(42, 1000).unwrap();
        assert_eq!(ds.len(), 1000);
        let counts: Vec<usize> =
            ds.class_ids.iter().map(|&c| ds.labels.iter().filter(|&&l| l == c).count()).collect();
        assert_eq!(counts, vec![200, 400, 300, 100]);
        let dist = estimate_class_probabilities(&ds);
        let probs: Vec<f64> = ds.class_ids.iter().map(|&c| dist.prob(c)).collect();
        assert_eq!(probs, vec![0.2, 0.4, 0.3, 0.1]);
    }

    #[test]
    fn synthetic_deterministic_per_seed() {
        let a = gen_synthetic_motivating(7, 200).unwrap();
        let b = gen_synthetic_motivating(7, 200).unwrap();
        assert_eq!(a.points, b.points);
        let c = gen_synthetic_motivating(8, 200).unwrap();
        assert_ne!(a.points, c.points);
    }

    #[test]
    fn planning_problem_dimensions() {
        let pi = synthetic_planning_instance();
        let p = build_planning_problem(&pi).unwrap();
        assert_eq!(p.n_x(), 90);
        assert_eq!(p.n_y(), 130);
        assert_eq!(p.n_u(), 5);
        assert!(p.maximization);
    }

    #[test]
    fn planning_capacity_telescopes_without_expansion() {
        let mut pi = synthetic_planning_instance();
        pi.q0 = vec![10.0, 20.0, 30.0];
        // no expansions at all
        for r in pi.qe_hi.iter_mut() {
            r.iter_mut().for_each(|v| *v = 0.0);
        }
        for r in pi.qe_lo.iter_mut() {
            r.iter_mut().for_each(|v| *v = 0.0);
        }
        let p = build_planning_problem(&pi).unwrap();
        let sol = solve_milp(&p.deterministic_milp(&pi.nominal_u())).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        let nt = pi.n_periods;
        for i in 0..pi.n_processes {
            for t in 0..nt {
                let q = sol.x[pi.n_processes * nt + i * nt + t];
                assert!((q - pi.q0[i]).abs() < 1e-6, "Q[{i}][{t}] = {q}");
                let y = sol.x[2 * pi.n_processes * nt + i * nt + t];
                assert!(y.abs() < 1e-6);
                let qe = sol.x[i * nt + t];
                assert!(qe.abs() < 1e-6, "Y=0 must force QE=0");
            }
        }
    }

    #[test]
    fn planning_tiny_hand_checked() {
        // 1 process, 2 chemicals, 1 period: buy A (<=10 @1), convert 1:1 to B,
        // sell B (<=8 @5), capacity 20 from initial, no expansions.
        let pi = PlanningInstance {
            name: "tiny".into(),
            n_processes: 1,
            n_chemicals: 2,
            n_periods: 1,
            c1: vec![vec![1.0]],
            c2: vec![vec![1.0]],
            c3: vec![vec![0.5]],
            c4: vec![vec![1.0], vec![0.0]],
            v: vec![vec![0.0], vec![5.0]],
            qe_lo: vec![vec![0.0]],
            qe_hi: vec![vec![0.0]],
            ce: vec![0],
            cb: vec![100.0],
            kappa: vec![vec![1.0, -1.0]],
            q0: vec![20.0],
            supply: vec![vec![10.0], vec![0.0]],
            demand: vec![vec![0.0], vec![8.0]],
            uncertain_demand: vec![],
            uncertain_supply: vec![],
        };
        let p = build_planning_problem(&pi).unwrap();
        let sol = solve_milp(&p.deterministic_milp(&[])).unwrap();
        // sell 8 B: revenue 40, buy 8 A: cost 8, operate 8: cost 4 -> NPV 28
        assert!((p.user_objective(sol.objective) - 28.0).abs() < 1e-7);
    }

    #[test]
    fn planning_validation_catches_double_mapping() {
        let mut pi = synthetic_planning_instance();
        pi.uncertain_demand.push(UncertainCoord { chemical: 3, periods: vec![0] });
        assert!(build_planning_problem(&pi).is_err());
    }

    // Regression: a box spanning both market classes once froze the
    // decomposition at a nonzero gap. The dual subproblem runs with the
    // fallback big-M here, and integrality dust on a z variable (5e-7 times
    // 1e6) used to leak half a unit of phi through a Glover envelope, so the
    // reported worst case never matched the master's recourse value.
    #[test]
    fn box_aro_wide_planning_box_converges() {
        let pi = synthetic_planning_instance();
        let p = build_planning_problem(&pi).unwrap();
        let pooled = vec![
            vec![49.0, 39.0, 81.0, 61.0, 36.0],
            vec![76.0, 66.0, 109.0, 89.0, 59.0],
        ];
        let r = solve_box_aro(&p, &pooled, 1e-3, 10).unwrap();
        assert!(r.converged, "stalled at gap {}", r.gap);
        assert!(r.iterations.len() <= 6, "took {} iterations", r.iterations.len());
    }
}
