//! Pointwise closed-form geometry of the warped metric
//! g = dr^2 + (cosh(r) I + sinh(r) A)^2 over a minimal surface with
//! trace-free second fundamental form A = [[a, b], [b, -a]].
//!
//! Every operation here is an exact function of (a, b, m, n, r); nothing is
//! finite-differenced. m = d1(a) and n = d2(a) are the first derivatives of
//! the form, tied together by the Codazzi relations m = -d2(b), n = d1(b).

use crate::error::{Error, Result};
use crate::linalg::{mul, sub, Mat2};

/// Hyperbolic radius window. Beyond this cosh^2 terms drown double precision
/// in derived quantities, so operations reject rather than return infinities.
pub const MAX_RADIUS: f64 = 20.0;

/// Pointwise data of the central minimal surface: the entries of A and its
/// first derivatives in the orthonormal frame directions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShapeSample {
    pub a: f64,
    pub b: f64,
    pub m: f64,
    pub n: f64,
}

impl ShapeSample {
    pub fn new(a: f64, b: f64, m: f64, n: f64) -> Result<Self> {
        let s = ShapeSample { a, b, m, n };
        if s.lambda_sq() >= 1.0 {
            return Err(Error::Domain(format!(
                "principal curvature lambda = {} not < 1 (a = {a}, b = {b})",
                s.lambda()
            )));
        }
        Ok(s)
    }

    /// lambda^2 = a^2 + b^2, the squared principal curvature of the
    /// minimal surface at this point.
    pub fn lambda_sq(&self) -> f64 {
        self.a * self.a + self.b * self.b
    }

    pub fn lambda(&self) -> f64 {
        self.lambda_sq().sqrt()
    }

    pub fn a_matrix(&self) -> Mat2 {
        [[self.a, self.b], [self.b, -self.a]]
    }

    /// d1(A): derivatives of the entries in the e1 direction (Codazzi form).
    pub fn d1_a_matrix(&self) -> Mat2 {
        [[self.m, self.n], [self.n, -self.m]]
    }

    /// d2(A): derivatives of the entries in the e2 direction (Codazzi form).
    pub fn d2_a_matrix(&self) -> Mat2 {
        [[self.n, -self.m], [-self.m, -self.n]]
    }

    /// C1-size of the sample, max(lambda, |a|, |b|, |m|, |n|).
    pub fn c1_norm(&self) -> f64 {
        self.lambda()
            .max(self.a.abs())
            .max(self.b.abs())
            .max(self.m.abs())
            .max(self.n.abs())
    }
}

/// The radial Weingarten map F = E^{-1} dE/dr of the level surface, written
/// out as its three independent entries [[alpha, beta], [beta, eta]].
#[derive(Clone, Copy, Debug)]
pub struct ShapeOperator {
    pub alpha: f64,
    pub beta: f64,
    pub eta: f64,
}

impl ShapeOperator {
    pub fn as_matrix(&self) -> Mat2 {
        [[self.alpha, self.beta], [self.beta, self.eta]]
    }

    /// Mean curvature of the level surface, alpha + eta.
    pub fn trace(&self) -> f64 {
        self.alpha + self.eta
    }
}

/// All closed-form tensors at one point (x, r).
#[derive(Clone, Debug)]
pub struct MetricData {
    pub r: f64,
    pub e: Mat2,
    pub einv: Mat2,
    pub det_e: f64,
    pub g: Mat2,
    pub ginv: Mat2,
    pub f: ShapeOperator,
    /// E dE/dr, the second fundamental form of the level surface in the
    /// coordinate-induced frame.
    pub a_r: Mat2,
}

/// Connection coefficients of the ambient metric restricted to a level
/// surface: nabla_{e_i} e_j = -A_ij n + B_ij e1 + C_ij e2 and
/// nabla_{e_i} n = (mixed)_i^k e_k.
#[derive(Clone, Debug)]
pub struct ChristoffelSet {
    pub b: Mat2,
    pub c: Mat2,
    /// Coefficient of the normal in nabla_{e_i} e_j, i.e. -A_ij.
    pub radial_down: Mat2,
    /// Action of nabla_. n, equal to F.
    pub mixed: Mat2,
}

/// Principal curvatures of the level surface at signed distance r.
#[derive(Clone, Copy, Debug)]
pub struct EquidistantCurvatures {
    pub k1: f64,
    pub k2: f64,
    pub h: f64,
    pub dh_dr: f64,
}

fn check_radius(r: f64) -> Result<()> {
    if !r.is_finite() || r.abs() > MAX_RADIUS {
        return Err(Error::Overflow(r, MAX_RADIUS));
    }
    Ok(())
}

fn check_sample(s: &ShapeSample) -> Result<()> {
    if s.lambda_sq() >= 1.0 {
        return Err(Error::Domain(format!(
            "lambda = {} not < 1 (not almost-Fuchsian)",
            s.lambda()
        )));
    }
    Ok(())
}

/// Populate every tensor at (sample, r) from its own closed form.
pub fn build_metric_data(sample: &ShapeSample, r: f64) -> Result<MetricData> {
    check_sample(sample)?;
    check_radius(r)?;
    let (a, b) = (sample.a, sample.b);
    let l2 = sample.lambda_sq();
    let (ch, sh) = (r.cosh(), r.sinh());
    let (ch2, sh2) = ((2.0 * r).cosh(), (2.0 * r).sinh());
    let sh_sq = sh * sh;

    let e = [[ch + a * sh, b * sh], [b * sh, ch - a * sh]];
    let det_e = 1.0 + (1.0 - l2) * sh_sq;
    let einv = [
        [(ch - a * sh) / det_e, -b * sh / det_e],
        [-b * sh / det_e, (ch + a * sh) / det_e],
    ];
    let g = [
        [1.0 + (1.0 + l2) * sh_sq + a * sh2, b * sh2],
        [b * sh2, 1.0 + (1.0 + l2) * sh_sq - a * sh2],
    ];
    let dd = det_e * det_e;
    let ginv = [
        [(1.0 + (1.0 + l2) * sh_sq - a * sh2) / dd, -b * sh2 / dd],
        [-b * sh2 / dd, (1.0 + (1.0 + l2) * sh_sq + a * sh2) / dd],
    ];
    let half = 0.5 * (1.0 - l2) * sh2;
    let f = ShapeOperator {
        alpha: (half + a) / det_e,
        beta: b / det_e,
        eta: (half - a) / det_e,
    };
    let a_r = [
        [0.5 * (1.0 + l2) * sh2 + a * ch2, b * ch2],
        [b * ch2, 0.5 * (1.0 + l2) * sh2 - a * ch2],
    ];
    Ok(MetricData {
        r,
        e,
        einv,
        det_e,
        g,
        ginv,
        f,
        a_r,
    })
}

/// Principal curvatures tanh(atanh(+-lambda) + r) of the level surface,
/// their sum, and the (always positive) radial derivative of the sum.
pub fn equidistant_curvatures(sample: &ShapeSample, r: f64) -> Result<EquidistantCurvatures> {
    check_sample(sample)?;
    check_radius(r)?;
    let l = sample.lambda();
    let k1 = (l.atanh() + r).tanh();
    let k2 = ((-l).atanh() + r).tanh();
    Ok(EquidistantCurvatures {
        k1,
        k2,
        h: k1 + k2,
        dh_dr: dh_dr_pair(l, -l, r),
    })
}

/// Level-surface mean curvature for a point whose central principal
/// curvatures are (l1, l2); the equidistant tanh-addition law.
pub fn h_pair(l1: f64, l2: f64, r: f64) -> f64 {
    (l1.atanh() + r).tanh() + (l2.atanh() + r).tanh()
}

/// dH/dr along the normal for central principal curvatures (l1, l2):
/// sum of (1 - l_i^2) / (cosh r + l_i sinh r)^2.
pub fn dh_dr_pair(l1: f64, l2: f64, r: f64) -> f64 {
    let (ch, sh) = (r.cosh(), r.sinh());
    let t1 = ch + l1 * sh;
    let t2 = ch + l2 * sh;
    (1.0 - l1 * l1) / (t1 * t1) + (1.0 - l2 * l2) / (t2 * t2)
}

/// Closed-form tangential Christoffels B_ij, C_ij of the level surface,
/// assuming the sample's (m, n) satisfy the Codazzi relations.
pub fn christoffels(sample: &ShapeSample, r: f64) -> Result<ChristoffelSet> {
    let md = build_metric_data(sample, r)?;
    let (a, b, m, n) = (sample.a, sample.b, sample.m, sample.n);
    let (ch, sh) = (r.cosh(), r.sinh());
    let d = 1.0 + sample.lambda_sq() + (1.0 - sample.lambda_sq()) * (2.0 * r).cosh();

    let b11 = -2.0 * sh * (-m * ch + (a * m + b * n) * sh) / d;
    let b12 = 2.0 * sh * (n * ch + (b * m - a * n) * sh) / d;
    let c11 = 2.0 * sh * (n * ch + (a * n - b * m) * sh) / d;
    let c12 = -2.0 * sh * (m * ch + (a * m + b * n) * sh) / d;

    let bm = [[b11, b12], [b12, -b11]];
    let cm = [[c11, c12], [c12, -c11]];
    let radial_down = [
        [-md.a_r[0][0], -md.a_r[0][1]],
        [-md.a_r[1][0], -md.a_r[1][1]],
    ];
    Ok(ChristoffelSet {
        b: bm,
        c: cm,
        radial_down,
        mixed: md.f.as_matrix(),
    })
}

/// Spatial derivatives (d1 g, d2 g) of the level metric at fixed r, from
/// arbitrary first derivatives da = (d1 a, d2 a), db = (d1 b, d2 b).
/// Works for non-Codazzi fields; the Codazzi case is da = (m, n),
/// db = (n, -m).
pub fn metric_spatial_derivs(a: f64, b: f64, da: [f64; 2], db: [f64; 2], r: f64) -> (Mat2, Mat2) {
    let (ch, sh) = (r.cosh(), r.sinh());
    let e = [[ch + a * sh, b * sh], [b * sh, ch - a * sh]];
    let mut out = [[[0.0; 2]; 2]; 2];
    for i in 0..2 {
        let d_a = [[da[i], db[i]], [db[i], -da[i]]];
        let de = [
            [sh * d_a[0][0], sh * d_a[0][1]],
            [sh * d_a[1][0], sh * d_a[1][1]],
        ];
        let dg = crate::linalg::add(&mul(&de, &e), &mul(&e, &de));
        out[i] = dg;
    }
    (out[0], out[1])
}

/// Tangential Christoffels from the generic formula
/// Gamma^k_ij = g^{kl}(d_i g_lj + d_j g_li - d_l g_ij)/2, valid for any
/// (not necessarily Codazzi) first derivatives of the field.
pub fn christoffels_general(
    a: f64,
    b: f64,
    da: [f64; 2],
    db: [f64; 2],
    r: f64,
) -> Result<(Mat2, Mat2)> {
    let sample = ShapeSample {
        a,
        b,
        m: 0.0,
        n: 0.0,
    };
    let md = build_metric_data(&sample, r)?;
    let (d1g, d2g) = metric_spatial_derivs(a, b, da, db, r);
    let dg = [d1g, d2g];
    let mut gamma = [[[0.0; 2]; 2]; 2];
    for k in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                let mut s = 0.0;
                for l in 0..2 {
                    s += md.ginv[k][l] * (dg[i][l][j] + dg[j][l][i] - dg[l][i][j]);
                }
                gamma[k][i][j] = 0.5 * s;
            }
        }
    }
    Ok((gamma[0], gamma[1]))
}

/// Residual of the radial metric ODE
/// (1/2) g'' - (1/4) g' g^{-1} g' - g, evaluated through the closed forms.
/// Analytically the zero matrix; numerically round-off.
pub fn radial_ode_residual(sample: &ShapeSample, r: f64) -> Result<Mat2> {
    check_sample(sample)?;
    check_radius(r)?;
    let md = build_metric_data(sample, r)?;
    let (ch, sh) = (r.cosh(), r.sinh());
    let (a, b) = (sample.a, sample.b);
    let er = [[sh + a * ch, b * ch], [b * ch, sh - a * ch]];
    // g' = 2 E E', g'' = 2 (E'^2 + E^2) since E'' = E
    let gp = crate::linalg::scale(2.0, &mul(&md.e, &er));
    let gpp = crate::linalg::scale(2.0, &crate::linalg::add(&mul(&er, &er), &mul(&md.e, &md.e)));
    let term2 = crate::linalg::scale(0.25, &mul(&mul(&gp, &md.ginv), &gp));
    let res = sub(&sub(&crate::linalg::scale(0.5, &gpp), &term2), &md.g);
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{det2, max_abs, I2};
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
    fn identity_at_r_zero() {
        let s = ShapeSample::new(0.3, 0.4, 0.0, 0.0).unwrap();
        let md = build_metric_data(&s, 0.0).unwrap();
        assert_eq!(md.e, I2);
        assert_eq!(md.det_e, 1.0);
        let f = md.f.as_matrix();
        assert_eq!(f, [[0.3, 0.4], [0.4, -0.3]]);
    }

    #[test]
    fn fuchsian_umbilic_levels() {
        let s = ShapeSample::new(0.0, 0.0, 0.0, 0.0).unwrap();
        let md = build_metric_data(&s, 1.0).unwrap();
        let c = 1.0f64.cosh();
        let t = 1.0f64.tanh();
        assert!((md.e[0][0] - c).abs() < 1e-15 && (md.e[1][1] - c).abs() < 1e-15);
        assert!(md.e[0][1] == 0.0);
        assert!((md.f.alpha - t).abs() < 1e-15 && (md.f.eta - t).abs() < 1e-15);
    }

    #[test]
    fn diagonal_case_closed_values() {
        // a = 0.1, b = 0, r = 1: E diagonal, detE = 1 + 0.99 sinh^2(1).
        let s = ShapeSample::new(0.1, 0.0, 0.0, 0.0).unwrap();
        let md = build_metric_data(&s, 1.0).unwrap();
        let (ch, sh) = (1.0f64.cosh(), 1.0f64.sinh());
        assert!((md.e[0][0] - (ch + 0.1 * sh)).abs() < 1e-15);
        assert!((md.e[1][1] - (ch - 0.1 * sh)).abs() < 1e-15);
        assert!((md.det_e - (1.0 + 0.99 * sh * sh)).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_almost_fuchsian() {
        assert!(ShapeSample::new(0.8, 0.7, 0.0, 0.0).is_err());
        let s = ShapeSample {
            a: 1.0,
            b: 0.2,
            m: 0.0,
            n: 0.0,
        };
        assert!(build_metric_data(&s, 0.5).is_err());
    }

    #[test]
    fn rejects_radius_overflow() {
        let s = ShapeSample::new(0.1, 0.0, 0.0, 0.0).unwrap();
        assert!(build_metric_data(&s, 20.5).is_err());
        assert!(matches!(
            build_metric_data(&s, -25.0),
            Err(Error::Overflow(..))
        ));
    }

    #[test]
    fn metric_consistency_random() {
        let mut rng = SplitMix64::new(11);
        for _ in 0..1000 {
            let s = rand_sample(&mut rng, 0.6);
            let r = rng.uniform(-3.0, 3.0);
            let md = build_metric_data(&s, r).unwrap();
            // E Einv = I, g = E^2, ginv = Einv^2, Ar = E E', F = Einv E'
            let id = mul(&md.e, &md.einv);
            assert!(max_abs(&sub(&id, &I2)) < 1e-13);
            assert!(max_abs(&sub(&mul(&md.e, &md.e), &md.g)) < 1e-12);
            assert!(max_abs(&sub(&mul(&md.einv, &md.einv), &md.ginv)) < 1e-12);
            assert!((det2(&md.e) - md.det_e).abs() < 1e-12 * md.det_e.abs().max(1.0));
            let f_mat = md.f.as_matrix();
            let a_r_from_f = mul(&md.g, &f_mat);
            assert!(max_abs(&sub(&a_r_from_f, &md.a_r)) < 1e-11 * max_abs(&md.a_r).max(1.0));
            // F commutes with E
            let comm = sub(&mul(&f_mat, &md.e), &mul(&md.e, &f_mat));
            assert!(max_abs(&comm) < 1e-13);
        }
    }

    #[test]
    fn mean_curvature_cross_module_1000() {
        let mut rng = SplitMix64::new(5);
        for _ in 0..1000 {
            let s = rand_sample(&mut rng, 0.7);
            let r = rng.uniform(-2.5, 2.5);
            let md = build_metric_data(&s, r).unwrap();
            let eq = equidistant_curvatures(&s, r).unwrap();
            assert!((md.f.trace() - eq.h).abs() < 1e-12);
            // alpha - eta = 2a / detE
            let want = 2.0 * s.a / md.det_e;
            assert!((md.f.alpha - md.f.eta - want).abs() < 1e-12);
        }
    }

    #[test]
    fn equidistant_anchor_values() {
        // lambda = 0, r = atanh(0.5): umbilic with k = 0.5.
        let s = ShapeSample::new(0.0, 0.0, 0.0, 0.0).unwrap();
        let eq = equidistant_curvatures(&s, 0.5f64.atanh()).unwrap();
        assert!((eq.k1 - 0.5).abs() < 1e-15 && (eq.k2 - 0.5).abs() < 1e-15);
        assert!((eq.h - 1.0).abs() < 1e-15);

        // lambda = 0.5, r = 0: the central surface is minimal.
        let s = ShapeSample::new(0.5, 0.0, 0.0, 0.0).unwrap();
        let eq = equidistant_curvatures(&s, 0.0).unwrap();
        assert!((eq.k1 - 0.5).abs() < 1e-15 && (eq.k2 + 0.5).abs() < 1e-15);
        assert!(eq.h.abs() < 1e-15);

        // lambda = 0.2, r = 0.7: the rational closed form and the
        // tanh-addition route agree; value frozen from the latter.
        let s = ShapeSample::new(0.2, 0.0, 0.0, 0.0).unwrap();
        let eq = equidistant_curvatures(&s, 0.7).unwrap();
        let t = 0.7f64.tanh();
        let want = 2.0 * (1.0 - 0.04) * t / (1.0 - 0.04 * t * t);
        assert!((eq.h - want).abs() < 1e-12);
        assert!((eq.h - 1.1775912302892952).abs() < 1e-12);
    }

    #[test]
    fn dh_dr_positive_and_matches_fd() {
        let mut rng = SplitMix64::new(9);
        for _ in 0..300 {
            let s = rand_sample(&mut rng, 0.8);
            let r = rng.uniform(-2.0, 2.0);
            let eq = equidistant_curvatures(&s, r).unwrap();
            assert!(eq.dh_dr > 0.0);
            let h = 1e-5;
            let hp = equidistant_curvatures(&s, r + h).unwrap().h;
            let hm = equidistant_curvatures(&s, r - h).unwrap().h;
            let fd = (hp - hm) / (2.0 * h);
            assert!((fd - eq.dh_dr).abs() <= 1e-7 * eq.dh_dr.abs().max(1.0));
        }
    }

    #[test]
    fn curvatures_inside_unit_band() {
        let mut rng = SplitMix64::new(77);
        for _ in 0..500 {
            let s = rand_sample(&mut rng, 0.9);
            let r = rng.uniform(-10.0, 10.0);
            let eq = equidistant_curvatures(&s, r).unwrap();
            assert!(eq.k1 > -1.0 && eq.k1 < 1.0);
            assert!(eq.k2 > -1.0 && eq.k2 < 1.0);
        }
    }

    #[test]
    fn shape_operator_limits_at_far_radius() {
        let mut rng = SplitMix64::new(3);
        for _ in 0..200 {
            let s = rand_sample(&mut rng, 0.8);
            for (r, sign) in [(MAX_RADIUS, 1.0), (-MAX_RADIUS, -1.0)] {
                let f = build_metric_data(&s, r).unwrap().f;
                assert!((f.alpha - sign).abs() < 1e-8);
                assert!((f.eta - sign).abs() < 1e-8);
                assert!(f.beta.abs() < 1e-8);
            }
        }
    }

    #[test]
    fn e_is_even_under_joint_flip() {
        // E(-r; A) = E(r; -A) entrywise; detE even in r.
        let mut rng = SplitMix64::new(21);
        for _ in 0..200 {
            let s = rand_sample(&mut rng, 0.7);
            let neg = ShapeSample {
                a: -s.a,
                b: -s.b,
                m: s.m,
                n: s.n,
            };
            let r = rng.uniform(0.0, 3.0);
            let e1 = build_metric_data(&s, -r).unwrap();
            let e2 = build_metric_data(&neg, r).unwrap();
            assert!(max_abs(&sub(&e1.e, &e2.e)) < 1e-14);
            assert!((e1.det_e - build_metric_data(&s, r).unwrap().det_e).abs() < 1e-12);
        }
    }

    #[test]
    fn christoffels_vanish_on_central_surface() {
        let mut rng = SplitMix64::new(31);
        for _ in 0..100 {
            let s = rand_sample(&mut rng, 0.5);
            let cs = christoffels(&s, 0.0).unwrap();
            assert!(max_abs(&cs.b) == 0.0 && max_abs(&cs.c) == 0.0);
        }
        // Fuchsian with zero derivatives: B = C = 0 at any r.
        let s = ShapeSample::new(0.0, 0.0, 0.0, 0.0).unwrap();
        let cs = christoffels(&s, 1.3).unwrap();
        assert!(max_abs(&cs.b) == 0.0 && max_abs(&cs.c) == 0.0);
    }

    #[test]
    fn christoffel_b11_example() {
        let s = ShapeSample::new(0.1, 0.0, 0.05, 0.0).unwrap();
        let cs = christoffels(&s, 0.5).unwrap();
        let (ch, sh) = (0.5f64.cosh(), 0.5f64.sinh());
        let want = -2.0 * sh * (-0.05 * ch + 0.005 * sh) / (1.0 + 0.01 + 0.99 * 1.0f64.cosh());
        assert!((cs.b[0][0] - want).abs() < 1e-15);
    }

    #[test]
    fn christoffels_match_general_route() {
        // Closed forms against the generic Gamma^k_ij formula with the
        // Codazzi substitution d1a = m, d2a = n, d1b = n, d2b = -m.
        let mut rng = SplitMix64::new(13);
        for _ in 0..500 {
            let s = rand_sample(&mut rng, 0.5);
            let r = rng.uniform(-2.5, 2.5);
            let cs = christoffels(&s, r).unwrap();
            let (bg, cg) = christoffels_general(s.a, s.b, [s.m, s.n], [s.n, -s.m], r).unwrap();
            assert!(max_abs(&sub(&cs.b, &bg)) < 1e-13);
            assert!(max_abs(&sub(&cs.c, &cg)) < 1e-13);
            // the normal and mixed parts come straight from A_r and F
            let md = build_metric_data(&s, r).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    assert_eq!(cs.radial_down[i][j], -md.a_r[i][j]);
                }
            }
            assert_eq!(cs.mixed, md.f.as_matrix());
        }
    }

    #[test]
    fn radial_ode_residual_is_roundoff() {
        let s = ShapeSample::new(0.0, 0.0, 0.0, 0.0).unwrap();
        assert!(max_abs(&radial_ode_residual(&s, 1.3).unwrap()) < 1e-13);
        let s = ShapeSample::new(0.2, 0.1, 0.0, 0.0).unwrap();
        assert!(max_abs(&radial_ode_residual(&s, -0.8).unwrap()) < 1e-12);
        // boundary-adjacent: lambda = sqrt(0.72) < 1 accepted
        let s = ShapeSample::new(0.6, 0.6, 0.0, 0.0).unwrap();
        assert!(max_abs(&radial_ode_residual(&s, 0.4).unwrap()) < 1e-12);
    }
}
