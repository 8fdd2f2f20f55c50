//! Budgeted polytopic uncertainty sets built from mixture posteriors.
//!
//! A basic set is { u : u = mu + S z, ||z||_inf <= 1, ||z||_1 <= budget }
//! with S = kappa * sqrt(psi) * Lambda stored pre-multiplied; a class's set is
//! a finite union of basics. `enumerate_vertices` is the exact testing oracle
//! used against the dualized subproblem.

use crate::dpmm::{effective_components, MixturePosterior};
use crate::error::{Error, Result};
use crate::linalg::{jacobi_eigen, sym_sqrt, Mat};
use crate::lp::{solve_lp, LinearProgram, Relation, Sense, Status};
use serde::{Deserialize, Serialize};

/// A contiguous slice of z coordinates with its own l1 budget. Used when a
/// set is a cross product of independently budgeted factors (e.g. demand and
/// supply blocks of a joint set).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetBlock {
    pub start: usize,
    pub len: usize,
    pub budget: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BasicUncertaintySet {
    pub mu: Vec<f64>,
    pub kappa: f64,
    /// The pre-multiplied map kappa * psi^{1/2} * Lambda.
    pub shape: Mat,
    pub budget: usize,
    pub gamma: f64,
    /// Set when `shape` is rank deficient (smallest/largest singular value
    /// below 1e-10); the decomposition still works since only vertices matter.
    #[serde(default)]
    pub degenerate: bool,
    /// Per-block budgets; empty means one block spanning all coordinates
    /// with the overall `budget`.
    #[serde(default)]
    pub blocks: Vec<BudgetBlock>,
}

impl BasicUncertaintySet {
    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Effective budget blocks (the declared ones, or the whole range).
    pub fn budget_blocks(&self) -> Vec<BudgetBlock> {
        if self.blocks.is_empty() {
            vec![BudgetBlock { start: 0, len: self.dim(), budget: self.budget }]
        } else {
            self.blocks.clone()
        }
    }

    /// Cross product of two basic sets: concatenated mu, block-diagonal
    /// shape, and independent per-factor budgets. gamma multiplies (joint
    /// weight of the component pair); kappa keeps the first factor's value
    /// as metadata only, since both shapes are already pre-multiplied.
    pub fn cross(&self, other: &BasicUncertaintySet) -> Result<BasicUncertaintySet> {
        let (da, db) = (self.dim(), other.dim());
        let mut mu = self.mu.clone();
        mu.extend_from_slice(&other.mu);
        let mut shape = Mat::zeros(da + db, da + db);
        for r in 0..da {
            for c in 0..da {
                shape[(r, c)] = self.shape[(r, c)];
            }
        }
        for r in 0..db {
            for c in 0..db {
                shape[(da + r, da + c)] = other.shape[(r, c)];
            }
        }
        let mut blocks = self.budget_blocks();
        blocks.extend(other.budget_blocks().into_iter().map(|b| BudgetBlock {
            start: b.start + da,
            ..b
        }));
        let mut joint = BasicUncertaintySet::new(
            mu,
            self.kappa,
            shape,
            self.budget + other.budget,
            self.gamma * other.gamma,
        )?;
        joint.degenerate = self.degenerate || other.degenerate;
        joint.blocks = blocks;
        Ok(joint)
    }

    pub fn new(mu: Vec<f64>, kappa: f64, shape: Mat, budget: usize, gamma: f64) -> Result<Self> {
        let dim = mu.len();
        if shape.rows != dim || shape.cols != dim {
            return Err(Error::Dimension("shape matrix must be dim x dim".into()));
        }
        if budget < 1 || budget > dim {
            return Err(Error::Invalid(format!("budget must be in 1..=dim, got {budget}")));
        }
        if kappa <= 0.0 {
            return Err(Error::Invalid("kappa must be positive".into()));
        }
        let degenerate = is_rank_deficient(&shape);
        Ok(BasicUncertaintySet { mu, kappa, shape, budget, gamma, degenerate, blocks: Vec::new() })
    }

    /// Map a latent z vector to uncertainty space.
    pub fn to_u(&self, z: &[f64]) -> Vec<f64> {
        let sz = self.shape.matvec(z);
        self.mu.iter().zip(&sz).map(|(m, s)| m + s).collect()
    }

    /// Smallest t such that u lies in the set scaled by t around mu
    /// (infinity if u - mu is outside the column space of a degenerate shape).
    pub fn min_scaling(&self, u: &[f64]) -> Result<f64> {
        let dim = self.dim();
        // min t  s.t. S z = u - mu, -t <= z_j <= t, sum |z_j| <= budget * t
        // variables: z (free), zabs >= 0, t >= 0
        let nv = 2 * dim + 1;
        let mut obj = vec![0.0; nv];
        obj[2 * dim] = 1.0;
        let mut p = LinearProgram::new(Sense::Min, obj);
        p.bounds = vec![(f64::NEG_INFINITY, f64::INFINITY); dim];
        p.bounds.extend(vec![(0.0, f64::INFINITY); dim + 1]);
        for r in 0..dim {
            let mut c = vec![0.0; nv];
            c[..dim].copy_from_slice(self.shape.row(r));
            p.push_row(c, Relation::Eq, u[r] - self.mu[r]);
        }
        for j in 0..dim {
            // zabs_j >= z_j and zabs_j >= -z_j, zabs_j <= t
            let mut c = vec![0.0; nv];
            c[dim + j] = 1.0;
            c[j] = -1.0;
            p.push_row(c.clone(), Relation::Ge, 0.0);
            let mut c = vec![0.0; nv];
            c[dim + j] = 1.0;
            c[j] = 1.0;
            p.push_row(c, Relation::Ge, 0.0);
            let mut c = vec![0.0; nv];
            c[2 * dim] = 1.0;
            c[dim + j] = -1.0;
            p.push_row(c, Relation::Ge, 0.0);
        }
        for blk in self.budget_blocks() {
            let mut c = vec![0.0; nv];
            for j in blk.start..blk.start + blk.len {
                c[dim + j] = -1.0;
            }
            c[2 * dim] = blk.budget as f64;
            p.push_row(c, Relation::Ge, 0.0);
        }
        let sol = solve_lp(&p)?;
        match sol.status {
            Status::Optimal => Ok(sol.objective),
            Status::Infeasible => Ok(f64::INFINITY),
            Status::Unbounded => Err(Error::Invalid("min_scaling LP unbounded".into())),
        }
    }

    pub fn contains(&self, u: &[f64], tol: f64) -> Result<bool> {
        Ok(self.min_scaling(u)? <= 1.0 + tol)
    }
}

fn is_rank_deficient(s: &Mat) -> bool {
    let gram = s.transpose().matmul(s);
    let (w, _) = jacobi_eigen(&gram);
    let smax = w.last().copied().unwrap_or(0.0).max(0.0).sqrt();
    let smin = w.first().copied().unwrap_or(0.0).max(0.0).sqrt();
    smin <= 1e-10 * smax.max(1e-300)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UncertaintySetUnion {
    pub class_id: usize,
    pub basics: Vec<BasicUncertaintySet>,
}

impl UncertaintySetUnion {
    pub fn dim(&self) -> usize {
        self.basics.first().map(|b| b.dim()).unwrap_or(0)
    }
}

/// How the Lambda scaling factor is chosen when building sets.
#[derive(Debug, Clone)]
pub enum ScalingPolicy<'a> {
    /// Lambda = I.
    Identity,
    /// Lambda = eta * I with the smallest eta covering `target` of the
    /// component's responsibility-weighted points.
    Coverage { points: &'a [Vec<f64>], target: f64 },
}

/// kappa = sqrt((lambda + 1) / (lambda * (omega + 1 - dim))).
pub fn compute_kappa(lambda: f64, omega: f64, dim: usize) -> Result<f64> {
    if lambda <= 0.0 {
        return Err(Error::Invalid("lambda must be positive".into()));
    }
    let denom = omega + 1.0 - dim as f64;
    if denom <= 0.0 {
        return Err(Error::DofTooSmall);
    }
    Ok(((lambda + 1.0) / (lambda * denom)).sqrt())
}

/// One basic set per surviving component of the posterior.
pub fn build_union(
    post: &MixturePosterior,
    gamma_star: f64,
    budget: usize,
    scaling: &ScalingPolicy,
) -> Result<UncertaintySetUnion> {
    let surviving = effective_components(post, gamma_star)?;
    let dim = post.components[surviving[0]].mu.len();
    if budget < 1 || budget > dim {
        return Err(Error::Invalid(format!("budget must be in 1..=dim, got {budget}")));
    }

    let resp = match scaling {
        ScalingPolicy::Identity => None,
        ScalingPolicy::Coverage { points, .. } => {
            Some(crate::dpmm::posterior_responsibilities(post, points))
        }
    };

    let mut basics = Vec::with_capacity(surviving.len());
    for &i in &surviving {
        let comp = &post.components[i];
        let kappa = compute_kappa(comp.lambda, comp.omega, dim)?;
        let sqrt_psi = sym_sqrt(&comp.psi).map_err(Error::Invalid)?;
        let base_shape = sqrt_psi.scale(kappa);
        let mut bs =
            BasicUncertaintySet::new(comp.mu.clone(), kappa, base_shape, budget, post.weights[i])?;
        if let ScalingPolicy::Coverage { points, target } = scaling {
            let resp = resp.as_ref().unwrap();
            let weights: Vec<f64> = resp.iter().map(|r| r[i]).collect();
            let eta = coverage_eta(&bs, points, &weights, *target)?;
            bs.shape = bs.shape.scale(eta);
            bs.degenerate = is_rank_deficient(&bs.shape);
        }
        basics.push(bs);
    }
    Ok(UncertaintySetUnion { class_id: post.class_id, basics })
}

/// Smallest eta such that the target fraction of responsibility weight lies
/// inside the set scaled by eta.
fn coverage_eta(
    bs: &BasicUncertaintySet,
    points: &[Vec<f64>],
    weights: &[f64],
    target: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&target) {
        return Err(Error::Invalid("coverage target must be in [0, 1]".into()));
    }
    let total: f64 = weights.iter().sum();
    if total <= 1e-12 {
        return Ok(1.0);
    }
    let mut scalings: Vec<(f64, f64)> = Vec::new();
    for (p, &w) in points.iter().zip(weights) {
        if w <= 1e-12 {
            continue;
        }
        let t = bs.min_scaling(p)?;
        if t.is_finite() {
            scalings.push((t, w));
        }
    }
    scalings.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut acc = 0.0;
    for (t, w) in &scalings {
        acc += w;
        if acc >= target * total {
            return Ok(t.max(1e-9));
        }
    }
    Ok(scalings.last().map(|(t, _)| t.max(1e-9)).unwrap_or(1.0))
}

/// All extreme points of the latent polytope mapped through u = mu + S z.
///
/// For integer budget <= dim the vertices are the vectors with exactly
/// `budget` entries in {-1, +1} and the rest zero: C(dim, budget) * 2^budget
/// points in total.
pub fn enumerate_vertices(bs: &BasicUncertaintySet) -> Result<Vec<Vec<f64>>> {
    let dim = bs.dim();
    if dim > 12 {
        return Err(Error::EnumerationDim { got: dim, max: 12 });
    }
    // per-block latent vertices, then their cross product
    let mut per_block: Vec<Vec<Vec<f64>>> = Vec::new();
    for blk in bs.budget_blocks() {
        let k = blk.budget.min(blk.len);
        let mut block_zs = Vec::new();
        let mut support = Vec::new();
        combos(blk.len, k, 0, &mut support, &mut |supp| {
            for signs in 0..(1u32 << k) {
                let mut z = vec![0.0; blk.len];
                for (bit, &j) in supp.iter().enumerate() {
                    z[j] = if signs >> bit & 1 == 1 { 1.0 } else { -1.0 };
                }
                block_zs.push(z);
            }
        });
        per_block.push(block_zs);
    }
    let blocks = bs.budget_blocks();
    let mut vertices = Vec::new();
    let mut idx = vec![0usize; per_block.len()];
    loop {
        let mut z = vec![0.0; dim];
        for (b, blk) in blocks.iter().enumerate() {
            let part = &per_block[b][idx[b]];
            z[blk.start..blk.start + blk.len].copy_from_slice(part);
        }
        vertices.push(bs.to_u(&z));
        // odometer increment over the block vertex indices
        let mut carry = per_block.len();
        for b in (0..per_block.len()).rev() {
            idx[b] += 1;
            if idx[b] < per_block[b].len() {
                carry = b;
                break;
            }
            idx[b] = 0;
        }
        if carry == per_block.len() {
            break;
        }
    }
    Ok(vertices)
}

fn combos(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    if cur.len() == k {
        f(cur);
        return;
    }
    for i in start..n {
        cur.push(i);
        combos(n, k, i + 1, cur, f);
        cur.pop();
    }
}

/// Axis-aligned box spanning the per-coordinate [min, max] of the points.
pub fn box_from_data(points: &[Vec<f64>]) -> Result<BasicUncertaintySet> {
    if points.is_empty() {
        return Err(Error::Invalid("box_from_data needs at least one point".into()));
    }
    let dim = points[0].len();
    let mut lo = points[0].clone();
    let mut hi = points[0].clone();
    for p in points {
        for j in 0..dim {
            lo[j] = lo[j].min(p[j]);
            hi[j] = hi[j].max(p[j]);
        }
    }
    let mu: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| 0.5 * (l + h)).collect();
    let half: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| 0.5 * (h - l)).collect();
    BasicUncertaintySet::new(mu, 1.0, Mat::diag(&half), dim, 1.0)
}
