//! Truncated Dirichlet process Gaussian mixture fitting by mean-field
//! variational inference.
//!
//! The model is the stick-breaking construction truncated at `M` components
//! with a Normal-inverse-Wishart base measure, so each component posterior is
//! described by (tau, nu) for its Beta stick fraction and (mu, lambda, omega,
//! psi) for its location/scale. Coordinate-ascent updates are the standard
//! conjugate ones; the ELBO is computed every iteration and must be
//! non-decreasing, which the tests rely on.
//!
//! Initialization is k-means++ seeding from the config seed followed by a few
//! Lloyd steps, so a fit is fully deterministic given (points, config).

use crate::error::{Error, Result};
use crate::linalg::{spd_inverse, spd_log_det, Mat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{digamma, ln_gamma};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DpmmConfig {
    /// Truncation level M.
    pub truncation: usize,
    /// Dirichlet process concentration.
    pub alpha: f64,
    /// Base-measure mean; data mean when None.
    pub base_mean: Option<Vec<f64>>,
    /// Base-measure location precision scale lambda0.
    pub base_scale: f64,
    /// Base-measure degrees of freedom; dim + 2 when None.
    pub base_dof: Option<f64>,
    /// Base-measure scale matrix; data covariance when None.
    pub base_scale_matrix: Option<Mat>,
    pub max_iters: usize,
    pub elbo_tol: f64,
    pub seed: u64,
}

impl Default for DpmmConfig {
    fn default() -> Self {
        DpmmConfig {
            truncation: 10,
            alpha: 1.0,
            base_mean: None,
            base_scale: 1.0,
            base_dof: None,
            base_scale_matrix: None,
            max_iters: 500,
            elbo_tol: 1e-6,
            seed: 0,
        }
    }
}

/// Variational posterior of one mixture component.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComponentPosterior {
    pub tau: f64,
    pub nu: f64,
    pub mu: Vec<f64>,
    pub lambda: f64,
    pub omega: f64,
    pub psi: Mat,
}

impl ComponentPosterior {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.tau <= 0.0 || self.nu <= 0.0 || self.lambda <= 0.0 {
            return Err(Error::Invalid("component posterior has non-positive tau/nu/lambda".into()));
        }
        if self.omega <= dim as f64 - 1.0 {
            return Err(Error::Invalid("component posterior omega <= dim - 1".into()));
        }
        if !self.psi.is_symmetric(1e-8 * self.psi.frobenius_norm().max(1.0)) {
            return Err(Error::Invalid("component psi not symmetric".into()));
        }
        let min_ev = crate::linalg::min_eigenvalue(&self.psi);
        if min_ev <= -1e-10 * self.psi.frobenius_norm().max(1.0) || min_ev <= 0.0 {
            return Err(Error::Invalid("component psi not positive definite".into()));
        }
        Ok(())
    }
}

/// Fitted per-class mixture posterior.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixturePosterior {
    pub class_id: usize,
    pub components: Vec<ComponentPosterior>,
    #[serde(rename = "gamma")]
    pub weights: Vec<f64>,
    pub elbo_trace: Vec<f64>,
}

/// Mixture weights from Beta stick posteriors; the last weight absorbs the
/// remainder so the result always sums to 1.
pub fn stick_breaking_weights(taus: &[f64], nus: &[f64], m: usize) -> Result<Vec<f64>> {
    if m < 1 {
        return Err(Error::Invalid("truncation must be >= 1".into()));
    }
    if taus.len() < m - 1 || nus.len() < m - 1 {
        return Err(Error::Invalid(format!(
            "need at least {} stick parameters for M={m}",
            m - 1
        )));
    }
    if taus[..m - 1].iter().chain(&nus[..m - 1]).any(|&v| v <= 0.0) {
        return Err(Error::Invalid("stick parameters must be positive".into()));
    }
    let mut weights = Vec::with_capacity(m);
    let mut remaining = 1.0;
    for i in 0..m - 1 {
        let frac = taus[i] / (taus[i] + nus[i]);
        weights.push(frac * remaining);
        remaining *= nus[i] / (taus[i] + nus[i]);
    }
    let partial: f64 = weights.iter().sum();
    weights.push(1.0 - partial);
    Ok(weights)
}

/// Indices of components with weight >= gamma_star, in descending weight
/// order. m(s) is the length of the result.
pub fn effective_components(post: &MixturePosterior, gamma_star: f64) -> Result<Vec<usize>> {
    if !(0.0..1.0).contains(&gamma_star) {
        return Err(Error::Invalid("gamma_star must be in [0, 1)".into()));
    }
    let mut idx: Vec<usize> =
        (0..post.weights.len()).filter(|&i| post.weights[i] >= gamma_star).collect();
    if idx.is_empty() {
        return Err(Error::ThresholdRemovedAll);
    }
    idx.sort_by(|&a, &b| post.weights[b].partial_cmp(&post.weights[a]).unwrap().then(a.cmp(&b)));
    Ok(idx)
}

pub fn fit_dpmm(points: &[Vec<f64>], cfg: &DpmmConfig) -> Result<MixturePosterior> {
    fit_dpmm_with_responsibilities(points, cfg).map(|(p, _)| p)
}

/// Same as `fit_dpmm` but also returns the final responsibility matrix
/// (diagnostic hook: rows must be stochastic).
pub fn fit_dpmm_with_responsibilities(
    points: &[Vec<f64>],
    cfg: &DpmmConfig,
) -> Result<(MixturePosterior, Vec<Vec<f64>>)> {
    if points.is_empty() {
        return Err(Error::Invalid("empty point set".into()));
    }
    let dim = points[0].len();
    if dim < 1 {
        return Err(Error::Invalid("points must have dimension >= 1".into()));
    }
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::Dimension("points have inconsistent dimensions".into()));
    }
    if points.len() < dim + 2 {
        return Err(Error::Invalid(format!(
            "need at least dim + 2 = {} points, got {}",
            dim + 2,
            points.len()
        )));
    }
    let m = cfg.truncation;
    if m < 1 {
        return Err(Error::Invalid("truncation must be >= 1".into()));
    }
    if cfg.alpha <= 0.0 || cfg.base_scale <= 0.0 {
        return Err(Error::Invalid("alpha and base_scale must be positive".into()));
    }

    let d = dim as f64;

    let mu0 = cfg.base_mean.clone().unwrap_or_else(|| mean_of(points));
    let omega0 = cfg.base_dof.unwrap_or(d + 2.0);
    if omega0 < d {
        return Err(Error::Invalid("base_dof must be >= dim".into()));
    }
    let psi0 = match &cfg.base_scale_matrix {
        Some(w) => w.clone(),
        None => covariance_of(points, &mu0),
    };
    if !psi0.is_symmetric(1e-8 * psi0.frobenius_norm().max(1.0)) {
        return Err(Error::Invalid("base scale matrix not symmetric".into()));
    }
    if crate::linalg::min_eigenvalue(&psi0) <= 0.0 {
        return Err(Error::NonPdCovariance { iter: 0 });
    }
    let lambda0 = cfg.base_scale;

    // Coordinate ascent is sensitive to its starting partition: seeding with
    // as many clusters as the truncation allows can freeze a single Gaussian
    // into stable halves. Restart from k-means with every cluster count up
    // to the truncation and keep the run with the best final ELBO.
    let mut best: Option<(Vec<Comp>, Vec<f64>, Vec<Vec<f64>>)> = None;
    for k_init in 1..=m {
        let mut resp = kmeans_init(points, k_init, m, cfg.seed);
        let mut comps: Vec<Comp> = Vec::new();
        let mut elbo_trace = Vec::new();
        let mut prev_elbo = f64::NEG_INFINITY;
        for iter in 0..cfg.max_iters {
            comps = m_step(points, &resp, m, cfg.alpha, &mu0, lambda0, omega0, &psi0)
                .map_err(|_| Error::NonPdCovariance { iter })?;
            e_step(points, &comps, m, &mut resp);
            let elbo =
                compute_elbo(points, &comps, &resp, m, cfg.alpha, &mu0, lambda0, omega0, &psi0);
            elbo_trace.push(elbo);
            if iter > 0 && (elbo - prev_elbo).abs() < cfg.elbo_tol {
                break;
            }
            prev_elbo = elbo;
        }
        let final_elbo = *elbo_trace.last().unwrap();
        if best.as_ref().map_or(true, |(_, t, _)| final_elbo > *t.last().unwrap()) {
            best = Some((comps, elbo_trace, resp));
        }
    }
    let (comps, elbo_trace, resp) = best.expect("truncation >= 1");

    let taus: Vec<f64> = comps.iter().map(|c| c.tau).collect();
    let nus: Vec<f64> = comps.iter().map(|c| c.nu).collect();
    let weights = stick_breaking_weights(&taus, &nus, m)?;

    let components: Vec<ComponentPosterior> = comps
        .into_iter()
        .map(|c| ComponentPosterior {
            tau: c.tau,
            nu: c.nu,
            mu: c.mu,
            lambda: c.lambda,
            omega: c.omega,
            psi: c.psi,
        })
        .collect();
    for c in &components {
        c.validate(dim)?;
    }
    let post = MixturePosterior { class_id: 0, components, weights, elbo_trace };
    Ok((post, resp))
}

/// Soft assignment of points to a fitted posterior's components, using the
/// same expected-log-density scoring as the E-step. Rows sum to 1.
pub fn posterior_responsibilities(post: &MixturePosterior, points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = post.components.len();
    let dim = post.components[0].mu.len();
    let d = dim as f64;
    // expected log stick weights
    let mut e_log_pi = vec![0.0; m];
    let mut acc = 0.0;
    for (k, c) in post.components.iter().enumerate() {
        let (elv, el1mv) = if k < m - 1 {
            (digamma(c.tau) - digamma(c.tau + c.nu), digamma(c.nu) - digamma(c.tau + c.nu))
        } else {
            (0.0, 0.0)
        };
        e_log_pi[k] = elv + acc;
        acc += el1mv;
    }
    let prepped: Vec<(Mat, f64)> = post
        .components
        .iter()
        .map(|c| {
            let inv = spd_inverse(&c.psi).expect("posterior psi is PD");
            let ld = spd_log_det(&c.psi).expect("posterior psi is PD");
            let e_log_det = (1..=dim)
                .map(|i| digamma((c.omega + 1.0 - i as f64) / 2.0))
                .sum::<f64>()
                + d * std::f64::consts::LN_2
                - ld;
            (inv, e_log_det)
        })
        .collect();

    let mut out = Vec::with_capacity(points.len());
    for p in points {
        let mut log_rho = vec![0.0; m];
        for (k, c) in post.components.iter().enumerate() {
            let (inv, e_log_det) = &prepped[k];
            let quad = d / c.lambda + c.omega * quad_form(inv, p, &c.mu);
            log_rho[k] = e_log_pi[k] + 0.5 * e_log_det - 0.5 * d * (2.0 * std::f64::consts::PI).ln()
                - 0.5 * quad;
        }
        let max = log_rho.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut r: Vec<f64> = log_rho.iter().map(|lr| (lr - max).exp()).collect();
        let total: f64 = r.iter().sum();
        r.iter_mut().for_each(|v| *v /= total);
        out.push(r);
    }
    out
}

// ---------------------------------------------------------------------------

struct Comp {
    tau: f64,
    nu: f64,
    mu: Vec<f64>,
    lambda: f64,
    omega: f64,
    psi: Mat,
    // cached for the E-step and ELBO
    psi_inv: Mat,
    psi_log_det: f64,
    e_log_det_prec: f64,
    e_log_pi: f64,
    e_log_v: f64,
    e_log_1mv: f64,
}

fn mean_of(points: &[Vec<f64>]) -> Vec<f64> {
    let dim = points[0].len();
    let mut m = vec![0.0; dim];
    for p in points {
        for (mi, v) in m.iter_mut().zip(p) {
            *mi += v;
        }
    }
    let n = points.len() as f64;
    m.iter_mut().for_each(|v| *v /= n);
    m
}

fn covariance_of(points: &[Vec<f64>], mean: &[f64]) -> Mat {
    let dim = mean.len();
    let mut cov = Mat::zeros(dim, dim);
    for p in points {
        for i in 0..dim {
            let di = p[i] - mean[i];
            for j in 0..dim {
                cov[(i, j)] += di * (p[j] - mean[j]);
            }
        }
    }
    let n = points.len() as f64;
    for v in cov.data.iter_mut() {
        *v /= n;
    }
    // jitter keeps degenerate data PD
    let tr: f64 = (0..dim).map(|i| cov[(i, i)]).sum();
    let eps = 1e-8 * (tr / dim as f64).max(1e-8);
    for i in 0..dim {
        cov[(i, i)] += eps;
    }
    cov
}

/// k-means++ seeding with `k` clusters plus a few Lloyd steps, returned as
/// hard responsibilities over `m >= k` columns (the surplus stays empty).
fn kmeans_init(points: &[Vec<f64>], k: usize, m: usize, seed: u64) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    centers.push(points[rng.gen_range(0..n)].clone());
    let mut dist2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = dist2.iter().sum();
        let pick = if total <= 1e-300 {
            rng.gen_range(0..n)
        } else {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in dist2.iter().enumerate() {
                target -= d;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        };
        centers.push(points[pick].clone());
        for (i, p) in points.iter().enumerate() {
            dist2[i] = dist2[i].min(sq_dist(p, centers.last().unwrap()));
        }
    }
    // a few Lloyd steps stabilize the seeding
    let mut assign: Vec<usize> = vec![0; n];
    for _ in 0..5 {
        for (i, p) in points.iter().enumerate() {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (k, c) in centers.iter().enumerate() {
                let dd = sq_dist(p, c);
                if dd < best_d {
                    best_d = dd;
                    best = k;
                }
            }
            assign[i] = best;
        }
        for (k, c) in centers.iter_mut().enumerate() {
            let members: Vec<&Vec<f64>> = points
                .iter()
                .zip(&assign)
                .filter(|(_, &a)| a == k)
                .map(|(p, _)| p)
                .collect();
            if !members.is_empty() {
                for (j, cj) in c.iter_mut().enumerate() {
                    *cj = members.iter().map(|p| p[j]).sum::<f64>() / members.len() as f64;
                }
            }
        }
    }
    let mut resp = vec![vec![0.0; m]; n];
    for (i, &a) in assign.iter().enumerate() {
        resp[i][a] = 1.0;
    }
    resp
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[allow(clippy::too_many_arguments)]
fn m_step(
    points: &[Vec<f64>],
    resp: &[Vec<f64>],
    m: usize,
    alpha: f64,
    mu0: &[f64],
    lambda0: f64,
    omega0: f64,
    psi0: &Mat,
) -> std::result::Result<Vec<Comp>, String> {
    let dim = mu0.len();
    let d = dim as f64;
    let counts: Vec<f64> = (0..m).map(|k| resp.iter().map(|r| r[k]).sum()).collect();

    let mut comps = Vec::with_capacity(m);
    for k in 0..m {
        let nk = counts[k];
        // weighted mean
        let mut xbar = vec![0.0; dim];
        if nk > 1e-12 {
            for (p, r) in points.iter().zip(resp) {
                for (xi, v) in xbar.iter_mut().zip(p) {
                    *xi += r[k] * v;
                }
            }
            xbar.iter_mut().for_each(|v| *v /= nk);
        } else {
            xbar.copy_from_slice(mu0);
        }
        // weighted scatter around xbar
        let mut scatter = Mat::zeros(dim, dim);
        for (p, r) in points.iter().zip(resp) {
            let rk = r[k];
            if rk <= 0.0 {
                continue;
            }
            for i in 0..dim {
                let di = p[i] - xbar[i];
                for j in 0..dim {
                    scatter[(i, j)] += rk * di * (p[j] - xbar[j]);
                }
            }
        }

        let tau = 1.0 + nk;
        let nu = alpha + counts[k + 1..].iter().sum::<f64>();
        let lambda = lambda0 + nk;
        let omega = omega0 + nk;
        let mut mu = vec![0.0; dim];
        for i in 0..dim {
            mu[i] = (lambda0 * mu0[i] + nk * xbar[i]) / lambda;
        }
        let mut psi = psi0.add(&scatter);
        let coef = lambda0 * nk / lambda;
        for i in 0..dim {
            let di = xbar[i] - mu0[i];
            for j in 0..dim {
                psi[(i, j)] += coef * di * (xbar[j] - mu0[j]);
            }
        }

        let psi_inv = spd_inverse(&psi)?;
        let psi_log_det = spd_log_det(&psi)?;
        let e_log_det_prec = (1..=dim).map(|i| digamma((omega + 1.0 - i as f64) / 2.0)).sum::<f64>()
            + d * std::f64::consts::LN_2
            - psi_log_det;
        comps.push(Comp {
            tau,
            nu,
            mu,
            lambda,
            omega,
            psi,
            psi_inv,
            psi_log_det,
            e_log_det_prec,
            e_log_pi: 0.0,
            e_log_v: 0.0,
            e_log_1mv: 0.0,
        });
    }

    // expected log stick weights
    let mut acc = 0.0;
    for k in 0..m {
        let (elv, el1mv) = if k < m - 1 {
            let t = comps[k].tau;
            let v = comps[k].nu;
            (digamma(t) - digamma(t + v), digamma(v) - digamma(t + v))
        } else {
            (0.0, 0.0) // v_M = 1
        };
        comps[k].e_log_v = elv;
        comps[k].e_log_1mv = el1mv;
        comps[k].e_log_pi = elv + acc;
        acc += el1mv;
    }
    Ok(comps)
}

fn e_step(points: &[Vec<f64>], comps: &[Comp], m: usize, resp: &mut [Vec<f64>]) {
    let dim = points[0].len();
    let d = dim as f64;
    let mut log_rho = vec![0.0; m];
    for (p, r) in points.iter().zip(resp.iter_mut()) {
        for (k, c) in comps.iter().enumerate() {
            let quad = d / c.lambda + c.omega * quad_form(&c.psi_inv, p, &c.mu);
            log_rho[k] = c.e_log_pi + 0.5 * c.e_log_det_prec
                - 0.5 * d * (2.0 * std::f64::consts::PI).ln()
                - 0.5 * quad;
        }
        let max = log_rho.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for (rk, lr) in r.iter_mut().zip(&log_rho) {
            *rk = (lr - max).exp();
            total += *rk;
        }
        r.iter_mut().for_each(|v| *v /= total);
    }
}

fn quad_form(a: &Mat, x: &[f64], center: &[f64]) -> f64 {
    let dim = center.len();
    let mut out = 0.0;
    for i in 0..dim {
        let di = x[i] - center[i];
        for j in 0..dim {
            out += di * a[(i, j)] * (x[j] - center[j]);
        }
    }
    out
}

fn ln_wishart_b(neg_log_det_scale_inv: f64, omega: f64, dim: usize) -> f64 {
    // ln B(W, omega) with ln|W| passed in as neg_log_det_scale_inv
    let d = dim as f64;
    -(omega / 2.0) * neg_log_det_scale_inv
        - (omega * d / 2.0) * std::f64::consts::LN_2
        - (d * (d - 1.0) / 4.0) * std::f64::consts::PI.ln()
        - (1..=dim).map(|i| ln_gamma((omega + 1.0 - i as f64) / 2.0)).sum::<f64>()
}

#[allow(clippy::too_many_arguments)]
fn compute_elbo(
    points: &[Vec<f64>],
    comps: &[Comp],
    resp: &[Vec<f64>],
    m: usize,
    alpha: f64,
    mu0: &[f64],
    lambda0: f64,
    omega0: f64,
    psi0: &Mat,
) -> f64 {
    let dim = mu0.len();
    let d = dim as f64;
    let ln2pi = (2.0 * std::f64::consts::PI).ln();
    let psi0_log_det = spd_log_det(psi0).expect("base scale matrix is PD");
    let ln_b0 = ln_wishart_b(-psi0_log_det, omega0, dim);

    let mut elbo = 0.0;

    // E[ln p(X|Z, mu, Lambda)] and assignment terms
    for (p, r) in points.iter().zip(resp) {
        for (k, c) in comps.iter().enumerate() {
            let rk = r[k];
            if rk <= 1e-300 {
                continue;
            }
            let quad = d / c.lambda + c.omega * quad_form(&c.psi_inv, p, &c.mu);
            elbo += rk * (0.5 * (c.e_log_det_prec - d * ln2pi) - 0.5 * quad);
            elbo += rk * c.e_log_pi; // E[ln p(Z|V)]
            elbo -= rk * rk.ln(); // -E[ln q(Z)]
        }
    }

    for (k, c) in comps.iter().enumerate() {
        // stick prior and entropy (sticks exist for k < M-1)
        if k < m - 1 {
            elbo += alpha.ln() + (alpha - 1.0) * c.e_log_1mv;
            let ln_beta_fn = ln_gamma(c.tau) + ln_gamma(c.nu) - ln_gamma(c.tau + c.nu);
            elbo -= (c.tau - 1.0) * c.e_log_v + (c.nu - 1.0) * c.e_log_1mv - ln_beta_fn;
        }

        // E[ln p(mu, Lambda)]
        let dmu = quad_form(&c.psi_inv, &c.mu, mu0);
        elbo += 0.5
            * (d * (lambda0 / (2.0 * std::f64::consts::PI)).ln() + c.e_log_det_prec
                - d * lambda0 / c.lambda
                - lambda0 * c.omega * dmu);
        let tr_psi0_w = {
            let mut t = 0.0;
            for i in 0..dim {
                for j in 0..dim {
                    t += psi0[(i, j)] * c.psi_inv[(j, i)];
                }
            }
            t
        };
        elbo += ln_b0 + 0.5 * (omega0 - d - 1.0) * c.e_log_det_prec - 0.5 * c.omega * tr_psi0_w;

        // -E[ln q(mu, Lambda)]
        let ln_bk = ln_wishart_b(-c.psi_log_det, c.omega, dim);
        let wishart_entropy =
            -ln_bk - 0.5 * (c.omega - d - 1.0) * c.e_log_det_prec + 0.5 * c.omega * d;
        elbo -= 0.5 * c.e_log_det_prec + 0.5 * d * (c.lambda / (2.0 * std::f64::consts::PI)).ln()
            - 0.5 * d
            - wishart_entropy;
    }
    elbo
}
