//! Explicit solver for the modified mean curvature flow of geodesic graphs
//! u(x, t) over a periodic base grid, in the height gauge u_t = -(H - c) Theta,
//! plus the runtime monitors: height envelopes with case-selected decay rates,
//! mean-convexity, the angle lower bound, and the scalar comparison ODE that
//! governs spatially constant data.

use crate::error::{Error, Result};
use crate::field_domain::{BaseGrid, GridMode};
use crate::linalg::Mat2;
use crate::point_geometry::{metric_spatial_derivs, ShapeSample, MAX_RADIUS};
use rayon::prelude::*;
use std::sync::Arc;

/// Derived pointwise geometry of a graph over the base grid.
#[derive(Clone, Debug)]
pub struct GraphGeometry {
    pub theta: Vec<f64>,
    pub h: Vec<f64>,
    /// Induced metric per node: (g11, g12, g22).
    pub induced: Vec<[f64; 3]>,
    /// Inverse induced metric per node: (g^11, g^12, g^22).
    pub induced_inv: Vec<[f64; 3]>,
}

/// A graph state at one flow time.
#[derive(Clone, Debug)]
pub struct GraphState {
    pub grid: Arc<BaseGrid>,
    pub u: Vec<f64>,
    pub t: f64,
    pub c: f64,
    pub geo: GraphGeometry,
}

impl GraphState {
    pub fn new(grid: Arc<BaseGrid>, u: Vec<f64>, c: f64) -> Result<Self> {
        if !(0.0..2.0).contains(&c) {
            return Err(Error::Domain(format!("c = {c} not in [0, 2)")));
        }
        if u.len() != grid.len() {
            return Err(Error::Domain("height array does not match grid".into()));
        }
        let geo = graph_geometry(&grid, &u)?;
        Ok(GraphState {
            grid,
            u,
            t: 0.0,
            c,
            geo,
        })
    }

    pub fn theta(&self) -> &[f64] {
        &self.geo.theta
    }

    pub fn h(&self) -> &[f64] {
        &self.geo.h
    }

    pub fn min_u(&self) -> f64 {
        self.u.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_u(&self) -> f64 {
        self.u.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_h_err(&self) -> f64 {
        self.geo
            .h
            .iter()
            .fold(0.0f64, |acc, &h| acc.max((h - self.c).abs()))
    }
}

/// The equidistant slice u = r0 as a graph state.
pub fn slice_state(grid: Arc<BaseGrid>, r0: f64, c: f64) -> Result<GraphState> {
    let n = grid.len();
    GraphState::new(grid, vec![r0; n], c)
}

struct NodeOut {
    theta: f64,
    h: f64,
    induced: [f64; 3],
    induced_inv: [f64; 3],
    hform: Mat2,
}

/// 9-point periodic stencil of u around node (i, j): gradient and raw
/// second differences.
#[inline]
fn stencil(grid: &BaseGrid, u: &[f64], i: usize, j: usize) -> ([f64; 2], Mat2) {
    let (nx, ny) = (grid.nx, grid.ny);
    let ip = (i + 1) % nx;
    let im = (i + nx - 1) % nx;
    let jp = (j + 1) % ny;
    let jm = (j + ny - 1) % ny;
    let at = |ii: usize, jj: usize| u[jj * nx + ii];
    let (hx, hy) = (grid.hx(), grid.hy());
    let c = at(i, j);
    let ux = (at(ip, j) - at(im, j)) / (2.0 * hx);
    let uy = (at(i, jp) - at(i, jm)) / (2.0 * hy);
    let uxx = (at(ip, j) - 2.0 * c + at(im, j)) / (hx * hx);
    let uyy = (at(i, jp) - 2.0 * c + at(i, jm)) / (hy * hy);
    let uxy = (at(ip, jp) - at(ip, jm) - at(im, jp) + at(im, jm)) / (4.0 * hx * hy);
    ([ux, uy], [[uxx, uxy], [uxy, uyy]])
}

fn node_geometry(
    s: &ShapeSample,
    da: [f64; 2],
    db: [f64; 2],
    u: f64,
    du: [f64; 2],
    ddu: Mat2,
) -> Option<NodeOut> {
    let (a, b) = (s.a, s.b);
    let l2 = a * a + b * b;
    let (ch, sh) = (u.cosh(), u.sinh());
    let ch2 = 2.0 * ch * ch - 1.0;
    let sh2 = 2.0 * sh * ch;
    let det_e = 1.0 + (1.0 - l2) * sh * sh;

    let g = [
        [1.0 + (1.0 + l2) * sh * sh + a * sh2, b * sh2],
        [b * sh2, 1.0 + (1.0 + l2) * sh * sh - a * sh2],
    ];
    let dd = det_e * det_e;
    let ginv = [[g[1][1] / dd, -g[0][1] / dd], [-g[0][1] / dd, g[0][0] / dd]];
    // level-surface second fundamental form, = (1/2) d/dr g
    let a_r = [
        [0.5 * (1.0 + l2) * sh2 + a * ch2, b * ch2],
        [b * ch2, 0.5 * (1.0 + l2) * sh2 - a * ch2],
    ];

    // tangential Christoffels of g(., u) from the field derivatives
    let (d1g, d2g) = metric_spatial_derivs(a, b, da, db, u);
    let dg = [d1g, d2g];
    let mut gamma = [[[0.0f64; 2]; 2]; 2];
    for k in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                let mut t = 0.0;
                for l in 0..2 {
                    t += ginv[k][l] * (dg[i][l][j] + dg[j][l][i] - dg[l][i][j]);
                }
                gamma[k][i][j] = 0.5 * t;
            }
        }
    }

    // covariant Hessian of u on the level surface
    let mut hess = [[0.0f64; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            hess[i][j] = ddu[i][j] - gamma[0][i][j] * du[0] - gamma[1][i][j] * du[1];
        }
    }

    let w = [
        ginv[0][0] * du[0] + ginv[0][1] * du[1],
        ginv[1][0] * du[0] + ginv[1][1] * du[1],
    ];
    let q = du[0] * w[0] + du[1] * w[1];
    if !(1.0 + q).is_finite() || 1.0 + q <= 0.0 {
        return None;
    }
    let theta = 1.0 / (1.0 + q).sqrt();

    // (d/dr g) w, with d/dr g = 2 A_r
    let gw = [
        2.0 * (a_r[0][0] * w[0] + a_r[0][1] * w[1]),
        2.0 * (a_r[1][0] * w[0] + a_r[1][1] * w[1]),
    ];
    let mut hform = [[0.0f64; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            hform[i][j] = theta * (-hess[i][j] + a_r[i][j] + 0.5 * (du[i] * gw[j] + du[j] * gw[i]));
        }
    }

    let induced = [
        g[0][0] + du[0] * du[0],
        g[0][1] + du[0] * du[1],
        g[1][1] + du[1] * du[1],
    ];
    let det_ind = induced[0] * induced[2] - induced[1] * induced[1];
    if det_ind <= 0.0 {
        return None;
    }
    let t2 = theta * theta;
    let induced_inv = [
        ginv[0][0] - t2 * w[0] * w[0],
        ginv[0][1] - t2 * w[0] * w[1],
        ginv[1][1] - t2 * w[1] * w[1],
    ];
    let h = induced_inv[0] * hform[0][0]
        + 2.0 * induced_inv[1] * hform[0][1]
        + induced_inv[2] * hform[1][1];
    Some(NodeOut {
        theta,
        h,
        induced,
        induced_inv,
        hform,
    })
}

/// Pointwise graph geometry: angle function, mean curvature and induced
/// metric. The normal is calibrated so a Fuchsian slice at r > 0 has
/// H = 2 tanh(r) > 0.
pub fn graph_geometry(grid: &BaseGrid, u: &[f64]) -> Result<GraphGeometry> {
    if grid.mode != GridMode::Periodic {
        return Err(Error::Domain(
            "flow operations require a periodic grid".into(),
        ));
    }
    if u.len() != grid.len() {
        return Err(Error::Domain("height array does not match grid".into()));
    }
    for &ui in u {
        if !ui.is_finite() || ui.abs() > MAX_RADIUS {
            return Err(Error::Overflow(ui, MAX_RADIUS));
        }
    }
    let derivs = grid.shape_derivs();
    let nodes: std::result::Result<Vec<NodeOut>, (usize, usize)> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let i = k % grid.nx;
            let j = k / grid.nx;
            let (du, ddu) = stencil(grid, u, i, j);
            let (da, db) = derivs[k];
            node_geometry(grid.sample(i, j), da, db, u[k], du, ddu).ok_or((i, j))
        })
        .collect();
    let nodes = nodes.map_err(|(i, j)| Error::SingularMetric(i, j))?;
    let mut geo = GraphGeometry {
        theta: Vec::with_capacity(nodes.len()),
        h: Vec::with_capacity(nodes.len()),
        induced: Vec::with_capacity(nodes.len()),
        induced_inv: Vec::with_capacity(nodes.len()),
    };
    for n in nodes {
        geo.theta.push(n.theta);
        geo.h.push(n.h);
        geo.induced.push(n.induced);
        geo.induced_inv.push(n.induced_inv);
    }
    Ok(geo)
}

/// The configured stability cap kappa h^2 min(det E) / max eig(g^{-1});
/// a hard precondition on user-supplied steps.
pub fn stability_cap(grid: &BaseGrid, u: &[f64], kappa: f64) -> Result<f64> {
    let h = grid.hx().min(grid.hy());
    let mut min_det = f64::INFINITY;
    let mut max_eig = 0.0f64;
    for (k, s) in grid.samples().iter().enumerate() {
        let uk = u[k];
        if !uk.is_finite() || uk.abs() > MAX_RADIUS {
            return Err(Error::Overflow(uk, MAX_RADIUS));
        }
        let l2 = s.lambda_sq();
        let sh = uk.sinh();
        let det_e = 1.0 + (1.0 - l2) * sh * sh;
        min_det = min_det.min(det_e);
        // eig_max(g^{-1}) = (tr(g) + sqrt(tr(g)^2 - 4 det(g))) / (2 det(g)),
        // det(g) = det_e^2, tr(g) = 2 (1 + (1 + l2) sinh^2 u)
        let tr_g = 2.0 * (1.0 + (1.0 + l2) * sh * sh);
        let det_g = det_e * det_e;
        let disc = (tr_g * tr_g - 4.0 * det_g).max(0.0).sqrt();
        max_eig = max_eig.max((tr_g + disc) / (2.0 * det_g));
    }
    Ok(kappa * h * h * min_det / max_eig)
}

/// Automatic step size: the parabolic bound from the actual diffusion
/// coefficients Theta^2 ghat^{ij}, additionally clamped by the configured
/// cap (the two cross near |u| ~ 1; the parabolic bound is the one that
/// scales correctly at large |u|).
pub fn auto_dt(grid: &BaseGrid, u: &[f64], geo: &GraphGeometry) -> Result<f64> {
    let (hx, hy) = (grid.hx(), grid.hy());
    let mut denom = 0.0f64;
    for k in 0..geo.theta.len() {
        let t2 = geo.theta[k] * geo.theta[k];
        let d = geo.induced_inv[k];
        let node =
            2.0 * t2 * (d[0] / (hx * hx) + d[2] / (hy * hy)) + 2.0 * t2 * d[1].abs() / (hx * hy);
        denom = denom.max(node);
    }
    Ok((0.8 / denom).min(stability_cap(grid, u, 0.2)?))
}

#[derive(Clone, Copy, Debug)]
pub enum DtPolicy {
    Fixed(f64),
    Auto,
}

/// One explicit Heun (RK2) step of u_t = -(H - c) Theta.
pub fn step_mmcf(state: &GraphState, dt: f64) -> Result<GraphState> {
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("dt = {dt} must be positive")));
    }
    let cap = stability_cap(&state.grid, &state.u, 0.2)?;
    if dt > cap * (1.0 + 1e-12) {
        return Err(Error::Domain(format!(
            "dt = {dt} violates the stability cap {cap}"
        )));
    }
    let c = state.c;
    let k1: Vec<f64> = (0..state.u.len())
        .map(|k| -(state.geo.h[k] - c) * state.geo.theta[k])
        .collect();
    let u_star: Vec<f64> = state.u.iter().zip(&k1).map(|(&u, &v)| u + dt * v).collect();
    let geo_star = graph_geometry(&state.grid, &u_star)?;
    let u_new: Vec<f64> = (0..state.u.len())
        .map(|k| {
            let k2 = -(geo_star.h[k] - c) * geo_star.theta[k];
            state.u[k] + 0.5 * dt * (k1[k] + k2)
        })
        .collect();
    let geo = graph_geometry(&state.grid, &u_new)?;
    Ok(GraphState {
        grid: Arc::clone(&state.grid),
        u: u_new,
        t: state.t + dt,
        c,
        geo,
    })
}

/// The radii organizing the height estimates, all for one (c, lambda_max):
/// r_c = atanh(c/2); r_tilde from the comparison ODE with the kept lower
/// bound b_tilde = min(b0, r_c); r_hat, the slice radius where the level
/// mean curvature first reaches c.
#[derive(Clone, Copy, Debug)]
pub struct CriticalRadii {
    pub c: f64,
    pub lambda_max: f64,
    pub r_c: f64,
    pub r_tilde: f64,
    pub r_hat: f64,
    pub b_tilde: f64,
}

pub fn critical_radii(c: f64, lambda_max: f64, b0: f64) -> Result<CriticalRadii> {
    if !(0.0..2.0).contains(&c) {
        return Err(Error::Domain(format!("c = {c} not in [0, 2)")));
    }
    if !(0.0..1.0).contains(&lambda_max) {
        return Err(Error::Domain(format!(
            "lambda_max = {lambda_max} not in [0, 1)"
        )));
    }
    let gate = (2.0 - c).sqrt() / 2.0;
    if lambda_max > gate {
        return Err(Error::Domain(format!(
            "lambda_max = {lambda_max} exceeds sqrt(2 - c)/2 = {gate}"
        )));
    }
    let r_c = (c / 2.0).atanh();
    let b_tilde = b0.min(r_c);
    let l2 = lambda_max * lambda_max;
    let r_tilde = (c / (2.0 - (2.0 - c * b_tilde.tanh()) * l2)).atanh();
    let r_hat = (c / (1.0 - l2 + ((1.0 - l2) * (1.0 - l2) + c * c * l2).sqrt())).atanh();
    Ok(CriticalRadii {
        c,
        lambda_max,
        r_c,
        r_tilde,
        r_hat,
        b_tilde,
    })
}

/// Scalar min/max/angle series recorded along a run.
#[derive(Clone, Debug, Default)]
pub struct FlowHistory {
    pub times: Vec<f64>,
    pub w: Vec<f64>,
    pub v: Vec<f64>,
    pub min_theta: Vec<f64>,
    pub max_h_minus_c: Vec<f64>,
    pub min_h_minus_c: Vec<f64>,
    /// Discrete extremum sign checks of the height Laplacian.
    pub ext_ok: Vec<bool>,
}

impl FlowHistory {
    pub fn record(&mut self, state: &GraphState, ext_slack: f64) {
        self.times.push(state.t);
        self.w.push(state.min_u());
        self.v.push(state.max_u());
        self.min_theta
            .push(state.theta().iter().cloned().fold(f64::INFINITY, f64::min));
        let c = state.c;
        let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
        for &h in state.h() {
            hi = hi.max(h - c);
            lo = lo.min(h - c);
        }
        self.max_h_minus_c.push(hi);
        self.min_h_minus_c.push(lo);
        self.ext_ok.push(extremum_sign_ok(state, ext_slack));
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// At the discrete argmax of u the metric Laplacian must be <= 0 (up to
/// slack), and >= 0 at the argmin; the sign forced by the height identity.
fn extremum_sign_ok(state: &GraphState, slack: f64) -> bool {
    let grid = &state.grid;
    let u = &state.u;
    let (mut kmin, mut kmax) = (0usize, 0usize);
    for k in 1..u.len() {
        if u[k] < u[kmin] {
            kmin = k;
        }
        if u[k] > u[kmax] {
            kmax = k;
        }
    }
    let lap = |k: usize| laplace_beltrami_at(grid, u, k % grid.nx, k / grid.nx);
    match (lap(kmax), lap(kmin)) {
        (Ok(lmax), Ok(lmin)) => lmax <= slack && lmin >= -slack,
        _ => false,
    }
}

/// Second fundamental form h_ij of the graph at one node (covariant
/// indices, evolving-surface orientation).
pub fn second_fundamental_form_at(grid: &BaseGrid, u: &[f64], i: usize, j: usize) -> Result<Mat2> {
    let (du, ddu) = stencil(grid, u, i, j);
    let k = grid.idx(i, j);
    let s = grid.sample(i, j);
    let (da, db) = if grid.approximate_codazzi {
        (
            [grid.fd_x(i, j, |t| t.a), grid.fd_y(i, j, |t| t.a)],
            [grid.fd_x(i, j, |t| t.b), grid.fd_y(i, j, |t| t.b)],
        )
    } else {
        ([s.m, s.n], [s.n, -s.m])
    };
    let out = node_geometry(s, da, db, u[k], du, ddu).ok_or(Error::SingularMetric(i, j))?;
    Ok(out.hform)
}

/// Laplace-Beltrami of u at one node with respect to the induced graph
/// metric, via its Christoffel symbols. Second-order accurate.
pub fn laplace_beltrami_at(grid: &BaseGrid, u: &[f64], i: usize, j: usize) -> Result<f64> {
    let (du, ddu) = stencil(grid, u, i, j);
    let k = grid.idx(i, j);
    let s = grid.sample(i, j);
    let (da, db) = if grid.approximate_codazzi {
        (
            [grid.fd_x(i, j, |t| t.a), grid.fd_y(i, j, |t| t.a)],
            [grid.fd_x(i, j, |t| t.b), grid.fd_y(i, j, |t| t.b)],
        )
    } else {
        ([s.m, s.n], [s.n, -s.m])
    };
    let uc = u[k];

    let (a, b) = (s.a, s.b);
    let l2 = a * a + b * b;
    let (ch, sh) = (uc.cosh(), uc.sinh());
    let sh2 = 2.0 * sh * ch;
    let ch2 = 2.0 * ch * ch - 1.0;
    let g = [
        [1.0 + (1.0 + l2) * sh * sh + a * sh2, b * sh2],
        [b * sh2, 1.0 + (1.0 + l2) * sh * sh - a * sh2],
    ];
    let a_r = [
        [0.5 * (1.0 + l2) * sh2 + a * ch2, b * ch2],
        [b * ch2, 0.5 * (1.0 + l2) * sh2 - a * ch2],
    ];
    let (d1g_r, d2g_r) = metric_spatial_derivs(a, b, da, db, uc);
    let dg_fixed = [d1g_r, d2g_r];

    // induced metric and its spatial derivatives
    let mut ghat = [[0.0f64; 2]; 2];
    for p in 0..2 {
        for q in 0..2 {
            ghat[p][q] = g[p][q] + du[p] * du[q];
        }
    }
    let det = ghat[0][0] * ghat[1][1] - ghat[0][1] * ghat[1][0];
    if det <= 0.0 {
        return Err(Error::SingularMetric(i, j));
    }
    let ghat_inv = [
        [ghat[1][1] / det, -ghat[0][1] / det],
        [-ghat[0][1] / det, ghat[0][0] / det],
    ];
    // d_i ghat_lj = d_i g_lj|_r + (d/dr g)_lj u_i + u_{li} u_j + u_l u_{ji}
    let mut dghat = [[[0.0f64; 2]; 2]; 2];
    for ii in 0..2 {
        for l in 0..2 {
            for jj in 0..2 {
                dghat[ii][l][jj] = dg_fixed[ii][l][jj]
                    + 2.0 * a_r[l][jj] * du[ii]
                    + ddu[l][ii] * du[jj]
                    + du[l] * ddu[jj][ii];
            }
        }
    }
    let mut lap = 0.0;
    for ii in 0..2 {
        for jj in 0..2 {
            let mut cov = ddu[ii][jj];
            for kk in 0..2 {
                let mut gam = 0.0;
                for mm in 0..2 {
                    gam += ghat_inv[kk][mm]
                        * (dghat[ii][mm][jj] + dghat[jj][mm][ii] - dghat[mm][ii][jj]);
                }
                cov -= 0.5 * gam * du[kk];
            }
            lap += ghat_inv[ii][jj] * cov;
        }
    }
    Ok(lap)
}

/// Nodewise residual of the height identity: Laplacian(u) + H Theta minus
/// [(1 - lambda^2)(Theta^2 + 1) cosh(u) sinh(u) + b (Theta^2 - 1)] over
/// (1 + (1 - lambda^2) sinh^2 u), the right-hand side evaluated at
/// `theta_rhs`. Pass the discrete Theta for the self-consistency form, or an
/// analytically known Theta to expose the O(h^2) truncation of the stencils.
pub fn laplacian_identity_residual_with(
    grid: &BaseGrid,
    u: &[f64],
    theta_rhs: &[f64],
) -> Result<Vec<f64>> {
    if theta_rhs.len() != u.len() {
        return Err(Error::Domain("theta array does not match grid".into()));
    }
    let geo = graph_geometry(grid, u)?;
    let mut out = Vec::with_capacity(u.len());
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let k = grid.idx(i, j);
            let s = grid.sample(i, j);
            let l2 = s.lambda_sq();
            let th = theta_rhs[k];
            let (ch, sh) = (u[k].cosh(), u[k].sinh());
            let rhs = ((1.0 - l2) * (th * th + 1.0) * ch * sh + s.b * (th * th - 1.0))
                / (1.0 + (1.0 - l2) * sh * sh);
            let lap = laplace_beltrami_at(grid, u, i, j)?;
            out.push(lap + geo.h[k] * geo.theta[k] - rhs);
        }
    }
    Ok(out)
}

/// Self-consistent form of the height identity residual: the identity is
/// pointwise algebra in the discrete jet, so this is round-off, not O(h^2).
pub fn laplacian_identity_residual(grid: &BaseGrid, u: &[f64]) -> Result<Vec<f64>> {
    let geo = graph_geometry(grid, u)?;
    laplacian_identity_residual_with(grid, u, &geo.theta)
}

/// Case-selected exponential height envelopes around a recorded run.
#[derive(Clone, Debug)]
pub struct HeightEnvelope {
    pub tau1: f64,
    pub tau2: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub static_lo: f64,
    pub static_hi: f64,
    pub violations: Vec<Violation>,
}

#[derive(Clone, Copy, Debug)]
pub struct Violation {
    pub step: usize,
    pub margin: f64,
}

/// Envelope selection: tau1 = 4 when w(T1) >= r_c, else (2 - c)/4; tau2 = 4
/// when v(T1) <= r_tilde, else (2 - c)/4. Checks the decaying envelopes and
/// the static sandwich b_tilde <= u <= max(v(0), r_tilde) at every recorded
/// step from T1 on.
pub fn height_envelope_monitor(
    hist: &FlowHistory,
    radii: &CriticalRadii,
    t1_index: usize,
    slack: f64,
) -> Result<HeightEnvelope> {
    if hist.is_empty() || t1_index >= hist.len() {
        return Err(Error::Domain("empty history or T1 out of range".into()));
    }
    if !(hist.w[0] > 0.0) {
        return Err(Error::Domain(format!(
            "height envelope needs w(0) > 0, got {}",
            hist.w[0]
        )));
    }
    let c = radii.c;
    let (w1, v1, t1) = (hist.w[t1_index], hist.v[t1_index], hist.times[t1_index]);
    let tau1 = if w1 >= radii.r_c {
        4.0
    } else {
        (2.0 - c) / 4.0
    };
    let tau2 = if v1 <= radii.r_tilde {
        4.0
    } else {
        (2.0 - c) / 4.0
    };
    let static_lo = radii.b_tilde;
    let static_hi = hist.v[0].max(radii.r_tilde);

    let mut lower = vec![f64::NEG_INFINITY; hist.len()];
    let mut upper = vec![f64::INFINITY; hist.len()];
    let mut violations = Vec::new();
    for k in t1_index..hist.len() {
        let dt = hist.times[k] - t1;
        lower[k] = radii.r_c + ((-tau1 * dt).exp() * (w1 - radii.r_c).sinh()).asinh();
        upper[k] = radii.r_tilde + ((-tau2 * dt).exp() * (v1 - radii.r_tilde).sinh()).asinh();
        if hist.w[k] < lower[k] - slack {
            violations.push(Violation {
                step: k,
                margin: lower[k] - hist.w[k],
            });
        }
        if hist.v[k] > upper[k] + slack {
            violations.push(Violation {
                step: k,
                margin: hist.v[k] - upper[k],
            });
        }
        if hist.w[k] < static_lo - slack {
            violations.push(Violation {
                step: k,
                margin: static_lo - hist.w[k],
            });
        }
        if hist.v[k] > static_hi + slack {
            violations.push(Violation {
                step: k,
                margin: hist.v[k] - static_hi,
            });
        }
    }
    Ok(HeightEnvelope {
        tau1,
        tau2,
        lower,
        upper,
        static_lo,
        static_hi,
        violations,
    })
}

/// Result of one monitor pass. `preconditions_met == false` downgrades the
/// check to informational: violations are reported but not failures.
#[derive(Clone, Debug)]
pub struct MonitorReport {
    pub name: &'static str,
    pub preconditions_met: bool,
    pub violations: Vec<Violation>,
    pub info: String,
}

impl MonitorReport {
    pub fn failed(&self) -> bool {
        self.preconditions_met && !self.violations.is_empty()
    }
}

/// v(t) non-increasing and min(H - c)(t) >= e^{-2t} min(H - c)(0) - slack,
/// valid when the initial surface is mean-convex (min H(0) >= c).
pub fn mean_convex_monitor(hist: &FlowHistory, slack: f64) -> MonitorReport {
    let pre = !hist.is_empty() && hist.min_h_minus_c[0] >= -1e-12;
    let mut violations = Vec::new();
    for k in 1..hist.len() {
        if hist.v[k] > hist.v[k - 1] + 1e-8 {
            violations.push(Violation {
                step: k,
                margin: hist.v[k] - hist.v[k - 1],
            });
        }
        let floor = (-2.0 * hist.times[k]).exp() * hist.min_h_minus_c[0] - slack;
        if hist.min_h_minus_c[k] < floor {
            violations.push(Violation {
                step: k,
                margin: floor - hist.min_h_minus_c[k],
            });
        }
    }
    MonitorReport {
        name: "mean_convex",
        preconditions_met: pre,
        violations,
        info: format!(
            "min(H-c)(0) = {}",
            hist.min_h_minus_c.first().copied().unwrap_or(f64::NAN)
        ),
    }
}

/// min Theta(t) >= 1/(1 + eps1/8) at every recorded step. `gates_hold`
/// says whether the scenario satisfies the smallness and initial-radius
/// windows; when it does not the report is informational.
pub fn angle_monitor(hist: &FlowHistory, eps1: f64, gates_hold: bool) -> MonitorReport {
    let bound = 1.0 / (1.0 + eps1 / 8.0);
    let mut violations = Vec::new();
    for k in 0..hist.len() {
        if hist.min_theta[k] < bound {
            violations.push(Violation {
                step: k,
                margin: bound - hist.min_theta[k],
            });
        }
    }
    MonitorReport {
        name: "angle",
        preconditions_met: gates_hold,
        violations,
        info: format!("bound = {bound}"),
    }
}

/// Extremum Laplacian sign flags recorded along the run, as a monitor.
pub fn extremum_monitor(hist: &FlowHistory) -> MonitorReport {
    let violations = hist
        .ext_ok
        .iter()
        .enumerate()
        .filter(|(_, ok)| !**ok)
        .map(|(k, _)| Violation {
            step: k,
            margin: 0.0,
        })
        .collect();
    MonitorReport {
        name: "extremum_sign",
        preconditions_met: true,
        violations,
        info: String::new(),
    }
}

/// Scalar comparison ODE w' = -2 (1 - lambda^2) tanh(w) / (1 - lambda^2
/// tanh^2 w) + c for spatially constant data, integrated with classical RK4,
/// plus its fixed point found by bisection on the right-hand side.
#[derive(Clone, Debug)]
pub struct OdeSeries {
    pub times: Vec<f64>,
    pub w: Vec<f64>,
    pub w_star: f64,
}

pub fn fuchsian_ode(c: f64, lambda: f64, w0: f64, t_end: f64, dt: f64) -> Result<OdeSeries> {
    if !(0.0..2.0).contains(&c) {
        return Err(Error::Domain(format!("c = {c} not in [0, 2)")));
    }
    if !(0.0..1.0).contains(&lambda) {
        return Err(Error::Domain(format!("lambda = {lambda} not in [0, 1)")));
    }
    if !(dt > 0.0 && t_end >= 0.0) {
        return Err(Error::Domain("need dt > 0 and t_end >= 0".into()));
    }
    let l2 = lambda * lambda;
    let rhs = |w: f64| {
        let t = w.tanh();
        -2.0 * (1.0 - l2) * t / (1.0 - l2 * t * t) + c
    };
    let mut times = vec![0.0];
    let mut ws = vec![w0];
    let mut t = 0.0;
    let mut w = w0;
    while t < t_end - 1e-15 {
        let step = dt.min(t_end - t);
        let k1 = rhs(w);
        let k2 = rhs(w + 0.5 * step * k1);
        let k3 = rhs(w + 0.5 * step * k2);
        let k4 = rhs(w + step * k3);
        w += step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += step;
        times.push(t);
        ws.push(w);
    }
    // rhs is strictly decreasing in w; bracket the root in [0, MAX_RADIUS]
    let (mut lo, mut hi) = (0.0f64, MAX_RADIUS);
    let w_star = if c == 0.0 {
        0.0
    } else {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if rhs(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    Ok(OdeSeries {
        times,
        w: ws,
        w_star,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct ConvergenceReport {
    pub converged: bool,
    pub t_final: f64,
    pub steps: usize,
    pub max_h_err: f64,
}

/// Step until max |H - c| < tol or t exceeds t_max; non-convergence is
/// reported, not thrown. Records scalar series every `record_every` steps
/// (and always the initial and final states).
pub fn run_to_convergence(
    mut state: GraphState,
    policy: DtPolicy,
    tol: f64,
    t_max: f64,
    record_every: usize,
) -> Result<(GraphState, FlowHistory, ConvergenceReport)> {
    let every = record_every.max(1);
    let grid = Arc::clone(&state.grid);
    let hd = grid.hx().max(grid.hy());
    let mut hist = FlowHistory::default();
    let mut steps = 0usize;
    let base_dt = match policy {
        DtPolicy::Fixed(dt) => dt,
        DtPolicy::Auto => auto_dt(&grid, &state.u, &state.geo)?,
    };
    let ext_slack = 10.0 * (hd * hd + base_dt);
    hist.record(&state, ext_slack);
    loop {
        let err = state.max_h_err();
        if err < tol {
            if hist.times.last() != Some(&state.t) {
                hist.record(&state, ext_slack);
            }
            let t_final = state.t;
            return Ok((
                state,
                hist,
                ConvergenceReport {
                    converged: true,
                    t_final,
                    steps,
                    max_h_err: err,
                },
            ));
        }
        if state.t >= t_max - 1e-12 {
            let t_final = state.t;
            return Ok((
                state,
                hist,
                ConvergenceReport {
                    converged: false,
                    t_final,
                    steps,
                    max_h_err: err,
                },
            ));
        }
        let dt = match policy {
            DtPolicy::Fixed(dt) => dt.min(t_max - state.t),
            DtPolicy::Auto => auto_dt(&grid, &state.u, &state.geo)?.min(t_max - state.t),
        };
        state = step_mmcf(&state, dt)?;
        steps += 1;
        if steps.is_multiple_of(every) || state.t >= t_max - 1e-12 {
            hist.record(&state, ext_slack);
        }
    }
}
