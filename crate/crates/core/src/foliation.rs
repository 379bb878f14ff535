//! Sweep the target mean curvature c into a monotone family of CMC graphs,
//! then certify the family: strict nodewise ordering, and two-sided bounds
//! on the separation of adjacent leaves obtained by integrating the extremal
//! radial growth of the mean curvature over the lower leaf.

use crate::error::{Error, Result};
use crate::field_domain::BaseGrid;
use crate::graph_flow::{
    critical_radii, graph_geometry, run_to_convergence, second_fundamental_form_at, slice_state,
    ConvergenceReport, DtPolicy, GraphState,
};
use crate::linalg::{eigenvalues2, mul, Mat2};
use crate::point_geometry::dh_dr_pair;
use std::sync::Arc;

/// Admissibility gate derived from a target angle defect eps1.
#[derive(Clone, Copy, Debug)]
pub struct EpsilonGate {
    /// Largest admissible C1 size of the field.
    pub eps_max: f64,
    /// Largest admissible lambda_max, sqrt(eps1)/12.
    pub lambda_gate: f64,
}

/// eps_max = min(1 - 1/(1 + eps1/16)^2, sqrt(eps1)/12, 7e-6).
pub fn epsilon_gate(eps1: f64) -> Result<EpsilonGate> {
    if !(eps1 > 0.0 && eps1 < 2.0) {
        return Err(Error::Domain(format!("eps1 = {eps1} not in (0, 2)")));
    }
    let t = 1.0 + eps1 / 16.0;
    let first = 1.0 - 1.0 / (t * t);
    let lambda_gate = eps1.sqrt() / 12.0;
    Ok(EpsilonGate {
        eps_max: first.min(lambda_gate).min(7e-6),
        lambda_gate,
    })
}

/// Admissible window of initial slice radii for (c, lambda_max, eps, eps1):
/// left endpoint atanh(c / (2 - (2 - c^2/2) lambda^2)), right endpoint
/// (1/2) arccosh((1/8) ln(eps1 / (eps (16 + eps1)))). Errors when the window
/// is empty, naming the binding endpoint.
pub fn initial_radius(c: f64, lambda_max: f64, eps: f64, eps1: f64) -> Result<(f64, f64)> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("eps = {eps} must be positive")));
    }
    if !(eps1 > 0.0 && eps1 < 2.0) {
        return Err(Error::Domain(format!("eps1 = {eps1} not in (0, 2)")));
    }
    if !(0.0..=2.0 - eps1 / 2.0).contains(&c) {
        return Err(Error::Domain(format!("c = {c} not in [0, 2 - eps1/2]")));
    }
    if !(0.0..1.0).contains(&lambda_max) {
        return Err(Error::Domain(format!(
            "lambda_max = {lambda_max} not in [0, 1)"
        )));
    }
    let l2 = lambda_max * lambda_max;
    let denom = 2.0 - (2.0 - 0.5 * c * c) * l2;
    if denom <= c {
        return Err(Error::Domain(format!(
            "lambda_max = {lambda_max} too large for c = {c}: left endpoint undefined"
        )));
    }
    let left = (c / denom).atanh();
    let inner = (eps1 / (eps * (16.0 + eps1))).ln() / 8.0;
    if inner < 1.0 {
        return Err(Error::EmptyInterval(format!(
            "right endpoint undefined: (1/8) ln(eps1/(eps (16 + eps1))) = {inner} < 1 \
             (eps = {eps} too large for eps1 = {eps1})"
        )));
    }
    let right = 0.5 * (inner + (inner * inner - 1.0).sqrt()).ln();
    if left > right {
        return Err(Error::EmptyInterval(format!(
            "left endpoint {left} exceeds right endpoint {right} (binding: left)"
        )));
    }
    Ok((left, right))
}

/// Default c sampling for a sweep: `count` values on [c_min, c_max] with
/// quadratic clustering toward c_max, where the admissible slice radius
/// grows fastest.
pub fn default_c_grid(c_min: f64, c_max: f64, count: usize) -> Vec<f64> {
    assert!(count >= 2 && c_max > c_min);
    (0..count)
        .map(|k| {
            let s = k as f64 / (count - 1) as f64;
            c_min + (c_max - c_min) * (1.0 - (1.0 - s) * (1.0 - s))
        })
        .collect()
}

#[derive(Clone, Copy, Debug)]
pub struct SweepConfig {
    pub tol: f64,
    pub t_max: f64,
    pub policy: DtPolicy,
    pub record_every: usize,
    /// Warm-start each c from the previous converged leaf (default); false
    /// re-initializes every c from its admissible slice.
    pub warm_start: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            tol: 1e-8,
            t_max: 60.0,
            policy: DtPolicy::Auto,
            record_every: 50,
            warm_start: true,
        }
    }
}

/// Separation certificate for one adjacent pair of leaves.
#[derive(Clone, Copy, Debug)]
pub struct PairCertificate {
    pub c_lo: f64,
    pub c_hi: f64,
    /// Tilt-corrected two-sided bounds on the separation.
    pub sep_lo_bound: f64,
    pub sep_hi_bound: f64,
    pub sep_measured_min: f64,
    pub sep_measured_max: f64,
    pub ok: bool,
}

#[derive(Clone, Debug)]
pub struct FoliationResult {
    pub c_values: Vec<f64>,
    pub surfaces: Vec<Vec<f64>>,
    pub reports: Vec<ConvergenceReport>,
    /// Strict nodewise ordering against the previous leaf (index 0 true by
    /// convention).
    pub ordering_ok: Vec<bool>,
    pub certificates: Vec<PairCertificate>,
    pub min_theta: Vec<f64>,
}

impl FoliationResult {
    pub fn all_converged(&self) -> bool {
        self.reports.iter().all(|r| r.converged)
    }

    pub fn all_ordered(&self) -> bool {
        self.ordering_ok.iter().all(|&b| b)
    }

    /// Full pairwise comparison matrix: entry (i, j) with i < j says leaf j
    /// lies strictly above leaf i at every node.
    pub fn pairwise_ordering(&self) -> Vec<Vec<bool>> {
        let n = self.surfaces.len();
        let mut m = vec![vec![true; n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let ok = self.surfaces[j]
                    .iter()
                    .zip(&self.surfaces[i])
                    .all(|(hi, lo)| hi > lo);
                m[i][j] = ok;
                m[j][i] = ok;
            }
        }
        m
    }
}

/// Converge one CMC graph per c, ascending; the first c starts from its
/// admissible slice, later ones warm-start from the previous leaf.
/// Non-convergence is recorded per c and the partial family is retained.
pub fn sweep_cmc(
    grid: Arc<BaseGrid>,
    c_list: &[f64],
    eps1: f64,
    cfg: &SweepConfig,
) -> Result<FoliationResult> {
    if c_list.is_empty() {
        return Err(Error::Domain("empty c list".into()));
    }
    let c_cap = 2.0 - eps1 / 2.0;
    for pair in c_list.windows(2) {
        if pair[1] <= pair[0] {
            return Err(Error::Domain("c list must be strictly ascending".into()));
        }
    }
    if c_list[0] < 0.0 || *c_list.last().unwrap() > c_cap {
        return Err(Error::Domain(format!(
            "c values must lie in [0, {c_cap}] for eps1 = {eps1}"
        )));
    }
    let lambda_max = grid.lambda_max();
    let mut surfaces: Vec<Vec<f64>> = Vec::with_capacity(c_list.len());
    let mut reports = Vec::with_capacity(c_list.len());
    let mut min_theta = Vec::with_capacity(c_list.len());
    let mut prev: Option<Vec<f64>> = None;
    for &c in c_list {
        let radii = critical_radii(c, lambda_max, (c / 2.0).atanh())?;
        let state = match (&prev, cfg.warm_start) {
            (Some(u), true) => GraphState::new(Arc::clone(&grid), u.clone(), c)?,
            _ => slice_state(Arc::clone(&grid), radii.r_tilde, c)?,
        };
        let (fin, hist, rep) =
            run_to_convergence(state, cfg.policy, cfg.tol, cfg.t_max, cfg.record_every)?;
        min_theta.push(hist.min_theta.iter().cloned().fold(f64::INFINITY, f64::min));
        surfaces.push(fin.u.clone());
        reports.push(rep);
        if rep.converged {
            prev = Some(fin.u);
        }
    }

    let mut ordering_ok = vec![true];
    for k in 1..surfaces.len() {
        let ok = surfaces[k]
            .iter()
            .zip(&surfaces[k - 1])
            .all(|(hi, lo)| hi > lo);
        ordering_ok.push(ok);
    }

    let mut result = FoliationResult {
        c_values: c_list.to_vec(),
        surfaces,
        reports,
        ordering_ok,
        certificates: Vec::new(),
        min_theta,
    };
    result.certificates = ordering_certificate(&grid, &result)?;
    Ok(result)
}

/// Integrate s -> extremal dH/dr from 0 until the integral reaches y,
/// returning the crossing radius (the numeric inverse of the growth
/// functions g_min / g_max).
fn invert_growth(extremal: impl Fn(f64) -> f64, y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    let ds = 1e-4;
    let mut acc = 0.0;
    let mut r = 0.0;
    let mut f_prev = extremal(0.0);
    // dH/dr > 0 and bounded below on compacta, so the integral escapes;
    // 10^6 steps reach r = 100, far beyond any admissible separation.
    for _ in 0..1_000_000 {
        let f_next = extremal(r + ds);
        let inc = 0.5 * (f_prev + f_next) * ds;
        if acc + inc >= y {
            return r + ds * (y - acc) / inc;
        }
        acc += inc;
        r += ds;
        f_prev = f_next;
    }
    f64::INFINITY
}

/// Principal-curvature pairs of a converged leaf, per node, from the
/// eigenvalues of its shape operator. Aborts with a diagnostic if any
/// curvature leaves (-1, 1).
fn leaf_principal_curvatures(grid: &BaseGrid, u: &[f64]) -> Result<Vec<(f64, f64)>> {
    let geo = graph_geometry(grid, u)?;
    let mut pairs = Vec::with_capacity(u.len());
    for k in 0..u.len() {
        let i = k % grid.nx;
        let j = k / grid.nx;
        let hform = second_fundamental_form_at(grid, u, i, j)?;
        let gi = geo.induced_inv[k];
        let ginv: Mat2 = [[gi[0], gi[1]], [gi[1], gi[2]]];
        let shape = mul(&ginv, &hform);
        let (l1, l2) = eigenvalues2(&shape).ok_or_else(|| {
            Error::Domain(format!("complex principal curvatures at node ({i}, {j})"))
        })?;
        if l1.abs() >= 1.0 || l2.abs() >= 1.0 {
            return Err(Error::Domain(format!(
                "principal curvature of converged leaf out of (-1, 1) at node \
                 ({i}, {j}): ({l1}, {l2})"
            )));
        }
        pairs.push((l1, l2));
    }
    Ok(pairs)
}

/// Per adjacent converged pair: separation bounds from the extremal radial
/// growth of H over the lower leaf, widened by the tilt factor 1/min Theta,
/// checked against the measured fiber separation.
pub fn ordering_certificate(
    grid: &BaseGrid,
    result: &FoliationResult,
) -> Result<Vec<PairCertificate>> {
    let mut out = Vec::new();
    for k in 1..result.surfaces.len() {
        if !(result.reports[k - 1].converged && result.reports[k].converged) {
            continue;
        }
        let lo_u = &result.surfaces[k - 1];
        let hi_u = &result.surfaces[k];
        let (c_lo, c_hi) = (result.c_values[k - 1], result.c_values[k]);

        let mut pairs = leaf_principal_curvatures(grid, lo_u)?;
        // duplicate curvature pairs (the whole grid, for constant fields)
        // contribute nothing to the extrema
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
        pairs.dedup();
        let min_theta = graph_geometry(grid, lo_u)?
            .theta
            .iter()
            .chain(graph_geometry(grid, hi_u)?.theta.iter())
            .cloned()
            .fold(f64::INFINITY, f64::min);

        let h_min = |s: f64| {
            pairs
                .iter()
                .map(|&(l1, l2)| dh_dr_pair(l1, l2, s))
                .fold(f64::INFINITY, f64::min)
        };
        let h_max = |s: f64| {
            pairs
                .iter()
                .map(|&(l1, l2)| dh_dr_pair(l1, l2, s))
                .fold(f64::NEG_INFINITY, f64::max)
        };
        let y = c_hi - c_lo;
        let inv_slow = invert_growth(h_min, y);
        let inv_fast = invert_growth(h_max, y);
        let lo_bound = inv_slow.min(inv_fast) * min_theta;
        let hi_bound = inv_slow.max(inv_fast) / min_theta;

        let mut meas_min = f64::INFINITY;
        let mut meas_max = f64::NEG_INFINITY;
        for (hi, lo) in hi_u.iter().zip(lo_u) {
            let d = hi - lo;
            meas_min = meas_min.min(d);
            meas_max = meas_max.max(d);
        }
        let slack = 10.0
            * result.reports[k]
                .max_h_err
                .max(result.reports[k - 1].max_h_err)
            + 1e-4;
        let ok = meas_min >= lo_bound - slack && meas_max <= hi_bound + slack;
        out.push(PairCertificate {
            c_lo,
            c_hi,
            sep_lo_bound: lo_bound,
            sep_hi_bound: hi_bound,
            sep_measured_min: meas_min,
            sep_measured_max: meas_max,
            ok,
        });
    }
    Ok(out)
}
