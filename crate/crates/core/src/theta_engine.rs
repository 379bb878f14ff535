//! The angle-function machinery: rotated frames at a minimum of the angle
//! function, the constrained second fundamental form, the Gamma coefficients
//! of the closed-form evolution of Theta^2 under the modified flow, and an
//! independent matrix-assembly route that recomputes the same scalar term by
//! term. The two routes share no algebra beyond the raw metric data, so
//! their agreement is a real check of the closed form.

use crate::error::{Error, Result};
use crate::linalg::{add, embed3, mul, scale, sub, transpose, Mat2, Mat3};
use crate::point_geometry::{
    build_metric_data, christoffels, MetricData, ShapeOperator, ShapeSample,
};

/// Below this the squared term's 1/Theta blows up; callers must clamp.
pub const THETA_FLOOR: f64 = 1e-6;

/// The change of frame between {nu, e1, e2} (evolving surface) and
/// {n, ehat1, ehat2} (level surface) at an angle-minimum point, symmetric
/// with respect to the n-nu plane.
#[derive(Clone, Debug)]
pub struct FramePair {
    pub theta: f64,
    /// Rows express (n, ehat1, ehat2) in the (nu, e1, e2) basis.
    pub rotation: Mat3,
    /// Rows express (nu, e1, e2) in the (n, ehat1, ehat2) basis.
    pub inverse: Mat3,
}

pub fn frame_pair(theta: f64) -> Result<FramePair> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::Domain(format!("theta = {theta} not in (0, 1]")));
    }
    let s = ((1.0 - theta * theta) / 2.0).sqrt();
    let p = (theta + 1.0) / 2.0;
    let q = (theta - 1.0) / 2.0;
    let rotation = [[theta, s, s], [-s, p, q], [-s, q, p]];
    let inverse = transpose(&rotation);
    Ok(FramePair {
        theta,
        rotation,
        inverse,
    })
}

/// Second fundamental form of the evolving surface at an angle minimum,
/// pinned by the two gradient constraints and the trace.
#[derive(Clone, Copy, Debug)]
pub struct ConstrainedSecondForm {
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
    pub h: f64,
}

impl ConstrainedSecondForm {
    pub fn norm_sq(&self) -> f64 {
        self.a11 * self.a11 + 2.0 * self.a12 * self.a12 + self.a22 * self.a22
    }
}

/// A11 = (H + alpha - eta)/2, A22 = (H - alpha + eta)/2,
/// A12 = (Theta (alpha + eta + 2 beta) - H)/2.
pub fn constrained_from_shape(
    f: &ShapeOperator,
    theta: f64,
    h: f64,
) -> Result<ConstrainedSecondForm> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::Domain(format!("theta = {theta} not in (0, 1]")));
    }
    Ok(ConstrainedSecondForm {
        a11: (h + f.alpha - f.eta) / 2.0,
        a22: (h - f.alpha + f.eta) / 2.0,
        a12: (theta * (f.alpha + f.eta + 2.0 * f.beta) - h) / 2.0,
        h,
    })
}

pub fn constrained_second_ff(
    metric: &MetricData,
    theta: f64,
    h: f64,
) -> Result<ConstrainedSecondForm> {
    constrained_from_shape(&metric.f, theta, h)
}

/// The five scalars multiplying the Theta-polynomials in the closed-form
/// evolution of Theta^2.
#[derive(Clone, Copy, Debug)]
pub struct GammaCoefficients {
    pub g1: f64,
    pub g2: f64,
    pub g3: f64,
    pub g4: f64,
    pub g5: f64,
}

fn check_c(c: f64) -> Result<()> {
    if !(0.0..2.0).contains(&c) {
        return Err(Error::Domain(format!("c = {c} not in [0, 2)")));
    }
    Ok(())
}

pub fn gamma_coefficients(sample: &ShapeSample, r0: f64, c: f64) -> Result<GammaCoefficients> {
    check_c(c)?;
    // validates lambda and the radius window
    build_metric_data(sample, r0)?;
    let (a, b, m, n) = (sample.a, sample.b, sample.m, sample.n);
    let l2 = sample.lambda_sq();
    let (ch, sh) = (r0.cosh(), r0.sinh());
    let (ch2, sh2) = ((2.0 * r0).cosh(), (2.0 * r0).sinh());
    let ch3 = (3.0 * r0).cosh();
    let (ch4, sh4) = ((4.0 * r0).cosh(), (4.0 * r0).sinh());
    let d = 1.0 + l2 + (1.0 - l2) * ch2;

    let g1 = -4.0 * d * ((1.0 - l2) * sh2 - 2.0 * b).powi(2);

    let g2 = 4.0 * (1.0 - l2) * (1.0 - l2) * (1.0 + l2) * ch4
        + 16.0 * (1.0 - l2) * ((1.0 - l2) * (1.0 - l2) + 2.0 * b * b) * ch2
        + 4.0
            * (1.0 + l2)
            * (3.0 * a.powi(4)
                + 3.0 * (b * b - 1.0) * (b * b - 1.0)
                + 2.0 * a * a * (3.0 * b * b - 7.0)
                - 12.0 * b * (1.0 - l2) * sh2)
        - 24.0 * b * (1.0 - l2) * (1.0 - l2) * sh4;

    let g3 = -4.0
        * ((-3.0 + a * a + 2.0 * a * b - b * b) * m + (3.0 - a * a + 2.0 * a * b + b * b) * n)
        * ch
        + 4.0
            * ((1.0 + a * a + 2.0 * a * b - b * b) * m + (-1.0 - a * a + 2.0 * a * b + b * b) * n)
            * ch3
        - 8.0
            * (3.0 * a * a * b * (m - n) + b * (1.0 + b * b) * (n - m) - a.powi(3) * (m + n)
                + a * (1.0 + 3.0 * b * b) * (m + n)
                + (b * (b * b - 1.0) * (m - n) + 3.0 * a * a * b * (n - m) + a.powi(3) * (m + n)
                    - a * (3.0 * b * b - 1.0) * (m + n))
                    * ch2)
            * sh;

    let g4 = 32.0
        * ((a * a * (m - n) + b * b * (n - m) + 2.0 * a * b * (m + n)) * sh
            - (b * (n - m) + a * (m + n)) * ch)
        * sh2;

    // second (common-denominator) form
    let g5 = (4.0 * c * sh * ch * (1.0 - l2) + 4.0 * b * c) / d;

    Ok(GammaCoefficients { g1, g2, g3, g4, g5 })
}

/// The a-priori envelopes for |Gamma_i| under a small-field hypothesis:
/// (108 cosh^3, 368 cosh^2, 376 cosh^2, 384 cosh^2, 6) of 2 r0.
pub fn gamma_bound_envelopes(r0: f64) -> [f64; 5] {
    let c2 = (2.0 * r0).cosh();
    [
        108.0 * c2.powi(3),
        368.0 * c2 * c2,
        376.0 * c2 * c2,
        384.0 * c2 * c2,
        6.0,
    ]
}

/// The named arrays of the trace assembly. P carries the radial second
/// derivative of the metric flow, Q/R the tangential connection action, and
/// U/V/W/T/S the frame-rotation weights.
#[derive(Clone, Debug)]
pub struct AssemblyWorkspace {
    pub p: Mat3,
    pub q1: Mat3,
    pub q2: Mat3,
    pub r1: Mat3,
    pub r2: Mat3,
    /// Diagonals of the three 4x4 weight matrices.
    pub u: [f64; 4],
    pub v: [f64; 4],
    pub w: [f64; 4],
    pub t: [[f64; 3]; 4],
    pub s: [[f64; 3]; 4],
}

pub fn assembly_workspace(sample: &ShapeSample, r0: f64, theta: f64) -> Result<AssemblyWorkspace> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::Domain(format!("theta = {theta} not in (0, 1]")));
    }
    let md = build_metric_data(sample, r0)?;
    let cs = christoffels(sample, r0)?;
    let f = md.f;
    let (a, b, m, n) = (sample.a, sample.b, sample.m, sample.n);
    let (ch2, sh2) = ((2.0 * r0).cosh(), (2.0 * r0).sinh());

    let m1 = [
        [0.0, f.alpha, f.beta],
        [-md.a_r[0][0], cs.b[0][0], cs.c[0][0]],
        [-md.a_r[0][1], cs.b[0][1], cs.c[0][1]],
    ];
    let m2 = [
        [0.0, f.beta, f.eta],
        [-md.a_r[0][1], cs.b[0][1], cs.c[0][1]],
        [-md.a_r[1][1], cs.b[1][1], cs.c[1][1]],
    ];
    let ar3 = embed3(&md.a_r);
    let q1 = mul(&m1, &ar3);
    let q2 = mul(&m2, &ar3);

    // spatial derivatives of E dE/dr with the Codazzi substitution
    let d1l2 = 2.0 * (a * m + b * n);
    let d2l2 = 2.0 * (a * n - b * m);
    let d1ar: Mat2 = [
        [0.5 * d1l2 * sh2 + m * ch2, n * ch2],
        [n * ch2, 0.5 * d1l2 * sh2 - m * ch2],
    ];
    let d2ar: Mat2 = [
        [0.5 * d2l2 * sh2 + n * ch2, -m * ch2],
        [-m * ch2, 0.5 * d2l2 * sh2 - n * ch2],
    ];
    let r1 = embed3(&d1ar);
    let r2 = embed3(&d2ar);

    let l2 = sample.lambda_sq();
    let mut p = [[0.0; 3]; 3];
    p[1][1] = 1.0 - l2;
    p[2][2] = 1.0 - l2;

    let ei = md.einv;
    let s = ((1.0 - theta * theta) / 2.0).sqrt();
    let sq2 = (2.0 * (1.0 - theta * theta)).sqrt();
    let row1 = [
        s,
        0.5 * (theta + 1.0) * ei[0][0] + 0.5 * (theta - 1.0) * ei[0][1],
        0.5 * (theta + 1.0) * ei[0][1] + 0.5 * (theta - 1.0) * ei[1][1],
    ];
    let row2 = [
        s,
        0.5 * (theta - 1.0) * ei[0][0] + 0.5 * (theta + 1.0) * ei[0][1],
        0.5 * (theta - 1.0) * ei[0][1] + 0.5 * (theta + 1.0) * ei[1][1],
    ];
    let row3 = [
        -2.0 * theta,
        sq2 * (ei[0][0] + ei[0][1]),
        sq2 * (ei[0][1] + ei[1][1]),
    ];

    let u = [theta, theta, s, s];
    let v = [
        sq2 * (ei[0][0] + ei[0][1]),
        sq2 * (ei[0][0] + ei[0][1]),
        -((theta + 1.0) * ei[0][0] + (theta - 1.0) * ei[0][1]),
        -((theta - 1.0) * ei[0][0] + (theta + 1.0) * ei[0][1]),
    ];
    let w = [
        sq2 * (ei[1][1] + ei[0][1]),
        sq2 * (ei[1][1] + ei[0][1]),
        -((theta + 1.0) * ei[0][1] + (theta - 1.0) * ei[1][1]),
        -((theta - 1.0) * ei[0][1] + (theta + 1.0) * ei[1][1]),
    ];
    let t = [row1, row2, row3, row3];
    let s_mat = [row1, row2, row1, row2];

    Ok(AssemblyWorkspace {
        p,
        q1,
        q2,
        r1,
        r2,
        u,
        v,
        w,
        t,
        s: s_mat,
    })
}

fn diag_mul4(d: &[f64; 4], t: &[[f64; 3]; 4]) -> [[f64; 3]; 4] {
    let mut out = [[0.0; 3]; 4];
    for i in 0..4 {
        for j in 0..3 {
            out[i][j] = d[i] * t[i][j];
        }
    }
    out
}

/// Tr{[U T P + V T (Q1 + Q1' - R1)/2 + W T (Q2 + Q2' - R2)/2] S'}.
fn assembly_trace(ws: &AssemblyWorkspace) -> f64 {
    let qt1 = sub(&add(&ws.q1, &transpose(&ws.q1)), &ws.r1);
    let qt2 = sub(&add(&ws.q2, &transpose(&ws.q2)), &ws.r2);
    let term1 = mul(&diag_mul4(&ws.u, &ws.t), &ws.p);
    let term2 = scale(0.5, &mul(&diag_mul4(&ws.v, &ws.t), &qt1));
    let term3 = scale(0.5, &mul(&diag_mul4(&ws.w, &ws.t), &qt2));
    let inner = add(&add(&term1, &term2), &term3);
    let prod = mul(&inner, &transpose(&ws.s));
    crate::linalg::trace(&prod)
}

/// The Lie-derivative matrix (L_n g)(e_i, e_j) on the evolving-surface
/// frame, from the rotated-frame expansion.
fn lie_matrix(f: &ShapeOperator, theta: f64) -> Mat2 {
    let (al, be, et) = (f.alpha, f.beta, f.eta);
    let p = 0.5 * (theta + 1.0) * (theta + 1.0);
    let q = 0.5 * (theta * theta - 1.0);
    let r = 0.5 * (theta - 1.0) * (theta - 1.0);
    [
        [
            p * al + q * (2.0 * be) + r * et,
            p * be + q * (et + al) + r * be,
        ],
        [
            p * be + q * (al + et) + r * be,
            p * et + q * (2.0 * be) + r * al,
        ],
    ]
}

/// (1 - Theta^2)(alpha + 2 beta + eta)/2, the c-free factor of the
/// Lie-derivative term in the normal direction.
pub fn lie_vv_factor(f: &ShapeOperator, theta: f64) -> f64 {
    0.5 * (1.0 - theta * theta) * (f.alpha + 2.0 * f.beta + f.eta)
}

pub fn lie_derivative_vv(sample: &ShapeSample, r0: f64, theta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::Domain(format!("theta = {theta} not in [0, 1]")));
    }
    let md = build_metric_data(sample, r0)?;
    Ok(lie_vv_factor(&md.f, theta))
}

fn check_theta_strict(theta: f64) -> Result<()> {
    if !(THETA_FLOOR..=1.0).contains(&theta) {
        return Err(Error::Domain(format!(
            "theta = {theta} outside [{THETA_FLOOR}, 1]"
        )));
    }
    Ok(())
}

/// Closed-form right-hand side of (d/dt - Laplacian) Theta^2 at an angle
/// minimum: the squared mean-curvature defect plus the Gamma-weighted
/// polynomial in Theta.
pub fn theta_rhs_closed_form(
    sample: &ShapeSample,
    r0: f64,
    c: f64,
    theta: f64,
    h: f64,
) -> Result<f64> {
    check_theta_strict(theta)?;
    let g = gamma_coefficients(sample, r0, c)?;
    let l2 = sample.lambda_sq();
    let (ch2, sh2) = ((2.0 * r0).cosh(), (2.0 * r0).sinh());
    let d = 1.0 + l2 + (1.0 - l2) * ch2;
    let t2 = theta * theta;
    let omt = 1.0 - t2;

    let defect = h - (-2.0 * sample.b * omt + (1.0 - l2) * (1.0 + t2) * sh2) / (theta * d);
    let sq_term = 2.0 * t2 * defect * defect;

    let root = (2.0 * omt).sqrt();
    let gam_term = (g.g1 * (1.0 - t2 * t2)
        + g.g2 * t2 * omt
        + g.g3 * theta * omt * root
        + g.g4 * t2 * theta * root)
        / (2.0 * d * d * d);

    Ok(sq_term + gam_term + g.g5 * theta * omt)
}

/// The same scalar assembled from the evolution equation term by term:
/// 2(|A|^2 - 2)Theta^2, the connection trace, the Lie-derivative trace
/// against the constrained second fundamental form, and the c-term. An
/// independent re-derivation path for theta_rhs_closed_form.
pub fn theta_rhs_assembled(
    sample: &ShapeSample,
    r0: f64,
    c: f64,
    theta: f64,
    h: f64,
) -> Result<f64> {
    check_theta_strict(theta)?;
    check_c(c)?;
    let md = build_metric_data(sample, r0)?;
    let ws = assembly_workspace(sample, r0, theta)?;
    let trace_term = assembly_trace(&ws);

    let aa = constrained_from_shape(&md.f, theta, h)?;
    let lmat = lie_matrix(&md.f, theta);
    let tr_la = lmat[0][0] * aa.a11 + (lmat[0][1] + lmat[1][0]) * aa.a12 + lmat[1][1] * aa.a22;
    let lvv = lie_vv_factor(&md.f, theta);

    let t2 = theta * theta;
    Ok(
        2.0 * (aa.norm_sq() - 2.0) * t2 + 2.0 * theta * trace_term - 2.0 * theta * tr_la
            + 2.0 * theta * c * lvv,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use crate::rng::SplitMix64;

    fn rand_sample(rng: &mut SplitMix64, eps: f64) -> ShapeSample {
        let (a, b) = rng.in_disc(eps);
        ShapeSample {
            a,
            b,
            m: rng.uniform(-eps, eps),
            n: rng.uniform(-eps, eps),
        }
    }

    #[test]
    fn frame_rotation_is_orthogonal() {
        let mut rng = SplitMix64::new(17);
        for _ in 0..100 {
            let theta = rng.uniform(1e-3, 1.0);
            let fp = frame_pair(theta).unwrap();
            let prod = mul(&fp.rotation, &fp.inverse);
            let mut err = 0.0f64;
            for i in 0..3 {
                for j in 0..3 {
                    let want = if i == j { 1.0 } else { 0.0 };
                    err = err.max((prod[i][j] - want).abs());
                }
            }
            assert!(err < 1e-14);
            // row n reconstructs Theta nu + s (e1 + e2)
            let s = ((1.0 - theta * theta) / 2.0).sqrt();
            assert_eq!(fp.rotation[0], [theta, s, s]);
        }
        assert!(frame_pair(0.0).is_err());
        assert!(frame_pair(1.2).is_err());
    }

    #[test]
    fn constrained_form_identities() {
        let mut rng = SplitMix64::new(23);
        for _ in 0..500 {
            let f = ShapeOperator {
                alpha: rng.uniform(-1.0, 1.0),
                beta: rng.uniform(-0.5, 0.5),
                eta: rng.uniform(-1.0, 1.0),
            };
            let theta = rng.uniform(0.05, 1.0);
            let h = rng.uniform(-3.0, 3.0);
            let a = constrained_from_shape(&f, theta, h).unwrap();
            let lhs1 = a.a11 + 2.0 * a.a12 + a.a22;
            let rhs1 = theta * (f.alpha + f.eta + 2.0 * f.beta);
            assert!((lhs1 - rhs1).abs() < 1e-13);
            assert!((a.a11 - a.a22 - (f.alpha - f.eta)).abs() < 1e-13);
            assert!((a.a11 + a.a22 - h).abs() < 1e-13);
        }
    }

    #[test]
    fn constrained_form_examples() {
        // Theta = 1, H = alpha + eta: the evolving surface osculates the
        // level surface, A = [[alpha, beta], [beta, eta]].
        let f = ShapeOperator {
            alpha: 0.4,
            beta: 0.12,
            eta: 0.25,
        };
        let a = constrained_from_shape(&f, 1.0, f.alpha + f.eta).unwrap();
        assert!((a.a11 - f.alpha).abs() < 1e-15);
        assert!((a.a12 - f.beta).abs() < 1e-15);
        assert!((a.a22 - f.eta).abs() < 1e-15);

        // Fuchsian: A = tanh(r) I
        let t = 0.8f64.tanh();
        let f = ShapeOperator {
            alpha: t,
            beta: 0.0,
            eta: t,
        };
        let a = constrained_from_shape(&f, 1.0, 2.0 * t).unwrap();
        assert!((a.a11 - t).abs() < 1e-15 && (a.a22 - t).abs() < 1e-15);
        assert!(a.a12.abs() < 1e-15);

        let f = ShapeOperator {
            alpha: 0.5,
            beta: 0.1,
            eta: 0.3,
        };
        let a = constrained_from_shape(&f, 0.8, 0.9).unwrap();
        assert!((a.a11 - 0.55).abs() < 1e-15);
        assert!((a.a22 - 0.35).abs() < 1e-15);
        assert!((a.a12 + 0.05).abs() < 1e-15);

        assert!(constrained_from_shape(&f, 0.0, 0.9).is_err());
        assert!(constrained_from_shape(&f, 1.5, 0.9).is_err());
    }

    #[test]
    fn gamma_fuchsian_center() {
        let s = ShapeSample::new(0.0, 0.0, 0.0, 0.0).unwrap();
        let g = gamma_coefficients(&s, 0.0, 1.3).unwrap();
        assert_eq!(g.g1, 0.0);
        assert!((g.g2 - 32.0).abs() < 1e-12);
        assert_eq!(g.g3, 0.0);
        assert_eq!(g.g4, 0.0);
        assert_eq!(g.g5, 0.0);
    }

    #[test]
    fn gamma5_fuchsian_is_tanh() {
        let s = ShapeSample::new(0.0, 0.0, 0.0, 0.0).unwrap();
        for r0 in [-1.5, -0.3, 0.4, 2.0] {
            for c in [0.0, 0.7, 1.9] {
                let g = gamma_coefficients(&s, r0, c).unwrap();
                assert!((g.g5 - 2.0 * c * f64::tanh(r0)).abs() < 1e-13);
            }
        }
        assert!(gamma_coefficients(&s, 0.5, 2.0).is_err());
        assert!(gamma_coefficients(&s, 0.5, -0.1).is_err());
    }

    #[test]
    fn gamma_bounds_small_field() {
        let mut rng = SplitMix64::new(99);
        let eps = 1e-6;
        for _ in 0..200 {
            let s = rand_sample(&mut rng, eps);
            let r0 = rng.uniform(-10.0, 10.0);
            let c = rng.uniform(0.0, 1.9);
            let g = gamma_coefficients(&s, r0, c).unwrap();
            let b = gamma_bound_envelopes(r0);
            assert!(g.g1.abs() <= b[0]);
            assert!(g.g2.abs() <= b[1]);
            assert!(g.g3.abs() <= b[2]);
            assert!(g.g4.abs() <= b[3]);
            assert!(g.g5.abs() <= b[4]);
        }
    }

    #[test]
    fn workspace_structure() {
        let mut rng = SplitMix64::new(41);
        for _ in 0..50 {
            let s = rand_sample(&mut rng, 0.2);
            let r0 = rng.uniform(-2.0, 2.0);
            let theta = rng.uniform(0.1, 1.0);
            let ws = assembly_workspace(&s, r0, theta).unwrap();
            let l2 = s.lambda_sq();
            assert_eq!(ws.p[0][0], 0.0);
            assert!((ws.p[1][1] - (1.0 - l2)).abs() < 1e-15);
            assert!((ws.p[2][2] - (1.0 - l2)).abs() < 1e-15);
            for k in 0..3 {
                assert_eq!(ws.r1[0][k], 0.0);
                assert_eq!(ws.r1[k][0], 0.0);
                assert_eq!(ws.r2[0][k], 0.0);
                assert_eq!(ws.r2[k][0], 0.0);
            }
        }
    }

    #[test]
    fn rhs_theta_one_reduces_to_square() {
        // At Theta = 1 every (1 - Theta^2) factor vanishes and the rhs is
        // 2 (H - (alpha + eta))^2 on both routes.
        let mut rng = SplitMix64::new(53);
        for _ in 0..100 {
            let s = rand_sample(&mut rng, 0.3);
            let r0 = rng.uniform(-2.0, 2.0);
            let c = rng.uniform(0.0, 1.9);
            let h = rng.uniform(-3.0, 3.0);
            let md = build_metric_data(&s, r0).unwrap();
            let want = 2.0 * (h - md.f.trace()).powi(2);
            let closed = theta_rhs_closed_form(&s, r0, c, 1.0, h).unwrap();
            let asm = theta_rhs_assembled(&s, r0, c, 1.0, h).unwrap();
            let scale = want.abs().max(1.0);
            assert!((closed - want).abs() < 1e-11 * scale);
            assert!((asm - want).abs() < 1e-11 * scale);
        }
    }

    #[test]
    fn rhs_fuchsian_stationary() {
        let s = ShapeSample::new(0.0, 0.0, 0.0, 0.0).unwrap();
        for r0 in [0.2, 0.9, 1.7] {
            let h = 2.0 * f64::tanh(r0);
            let closed = theta_rhs_closed_form(&s, r0, 1.0, 1.0, h).unwrap();
            let asm = theta_rhs_assembled(&s, r0, 1.0, 1.0, h).unwrap();
            assert!(closed.abs() < 1e-12, "closed = {closed}");
            assert!(asm.abs() < 1e-12, "assembled = {asm}");
        }
    }

    #[test]
    fn rhs_fuchsian_routes_agree_tightly() {
        let s = ShapeSample::new(0.0, 0.0, 0.0, 0.0).unwrap();
        let mut rng = SplitMix64::new(61);
        for _ in 0..200 {
            let r0 = rng.uniform(-2.0, 2.0);
            let c = rng.uniform(0.0, 1.9);
            let theta = rng.uniform(0.2, 1.0);
            let h = rng.uniform(-3.0, 3.0);
            let closed = theta_rhs_closed_form(&s, r0, c, theta, h).unwrap();
            let asm = theta_rhs_assembled(&s, r0, c, theta, h).unwrap();
            let scale = closed.abs().max(asm.abs()).max(1.0);
            assert!((closed - asm).abs() < 1e-12 * scale);
        }
    }

    #[test]
    fn oracle_equivalence_random_tuples() {
        let mut rng = SplitMix64::new(2024);
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            let s = rand_sample(&mut rng, 1e-2);
            let r0 = rng.uniform(-2.0, 2.0);
            let c = rng.uniform(0.0, 1.9);
            let theta = rng.uniform(0.2, 0.999);
            let h = rng.uniform(-3.0, 3.0);
            let closed = theta_rhs_closed_form(&s, r0, c, theta, h).unwrap();
            let asm = theta_rhs_assembled(&s, r0, c, theta, h).unwrap();
            let denom = closed.abs().max(asm.abs()).max(1e-3);
            worst = worst.max((closed - asm).abs() / denom);
        }
        assert!(worst < 1e-9, "worst relative discrepancy {worst}");
    }

    #[test]
    fn rhs_rejects_tiny_theta() {
        let s = ShapeSample::new(0.0, 0.0, 0.0, 0.0).unwrap();
        assert!(theta_rhs_closed_form(&s, 0.5, 1.0, 1e-7, 1.0).is_err());
        assert!(theta_rhs_assembled(&s, 0.5, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn lie_vv_values() {
        let f = ShapeOperator {
            alpha: 0.5,
            beta: 0.1,
            eta: 0.3,
        };
        assert!(lie_vv_factor(&f, 1.0).abs() < 1e-15);
        assert!((lie_vv_factor(&f, 0.6) - 0.32).abs() < 1e-15);

        // Fuchsian: (1 - Theta^2) tanh(r0)
        let s = ShapeSample::new(0.0, 0.0, 0.0, 0.0).unwrap();
        let got = lie_derivative_vv(&s, 0.7, 0.9).unwrap();
        let want = (1.0 - 0.81) * 0.7f64.tanh();
        assert!((got - want).abs() < 1e-14);
    }

    #[test]
    fn lie_matrix_trace_matches_height_identity() {
        // (1/2) sum L(e_i, e_i) = (Theta^2 + 1)(alpha + eta)/2
        //                         + (Theta^2 - 1) beta
        let mut rng = SplitMix64::new(71);
        for _ in 0..200 {
            let f = ShapeOperator {
                alpha: rng.uniform(-1.0, 1.0),
                beta: rng.uniform(-0.5, 0.5),
                eta: rng.uniform(-1.0, 1.0),
            };
            let theta = rng.uniform(0.0, 1.0);
            let l = lie_matrix(&f, theta);
            let got = 0.5 * (l[0][0] + l[1][1]);
            let t2 = theta * theta;
            let want = 0.5 * (t2 + 1.0) * (f.alpha + f.eta) + (t2 - 1.0) * f.beta;
            assert!((got - want).abs() < 1e-13);
            assert!(max_abs(&sub(&l, &transpose(&l))) < 1e-14);
        }
    }
}
