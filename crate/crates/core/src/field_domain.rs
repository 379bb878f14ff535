//! Discrete base domains carrying shape-sample fields.
//!
//! Two flavors: a doubly periodic grid (the desk-scale stand-in for a closed
//! base surface, used by the flow solver) and a non-periodic patch carrying
//! exactly-Codazzi data from a holomorphic polynomial (used by the
//! derivative-sensitive identity suites). Exact global Codazzi data on a
//! periodic grid forces constants (Liouville), so non-constant periodic
//! fields are flagged `approximate_codazzi` and only used as stress inputs.

use crate::error::{Error, Result};
use crate::point_geometry::ShapeSample;
use num_complex::Complex64;
use std::io::{BufRead, Write};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridMode {
    Periodic,
    Patch,
}

#[derive(Clone, Debug)]
pub struct BaseGrid {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub mode: GridMode,
    pub approximate_codazzi: bool,
    samples: Vec<ShapeSample>,
}

impl BaseGrid {
    fn validate(&self) -> Result<()> {
        if self.nx < 4 || self.ny < 4 {
            return Err(Error::Domain(format!(
                "grid {}x{} too small (need at least 4x4)",
                self.nx, self.ny
            )));
        }
        if !(self.lx > 0.0 && self.ly > 0.0) {
            return Err(Error::Domain("grid period lengths must be positive".into()));
        }
        let lmax = self.lambda_max();
        if lmax >= 1.0 {
            return Err(Error::Domain(format!("lambda_max = {lmax} not < 1")));
        }
        Ok(())
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn sample(&self, i: usize, j: usize) -> &ShapeSample {
        &self.samples[self.idx(i, j)]
    }

    pub fn samples(&self) -> &[ShapeSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Grid step in x. Periodic grids omit the wrap node; patches include
    /// both endpoints.
    pub fn hx(&self) -> f64 {
        match self.mode {
            GridMode::Periodic => self.lx / self.nx as f64,
            GridMode::Patch => self.lx / (self.nx - 1) as f64,
        }
    }

    pub fn hy(&self) -> f64 {
        match self.mode {
            GridMode::Periodic => self.ly / self.ny as f64,
            GridMode::Patch => self.ly / (self.ny - 1) as f64,
        }
    }

    pub fn node_x(&self, i: usize) -> f64 {
        match self.mode {
            GridMode::Periodic => i as f64 * self.hx(),
            GridMode::Patch => -0.5 * self.lx + i as f64 * self.hx(),
        }
    }

    pub fn node_y(&self, j: usize) -> f64 {
        match self.mode {
            GridMode::Periodic => j as f64 * self.hy(),
            GridMode::Patch => -0.5 * self.ly + j as f64 * self.hy(),
        }
    }

    pub fn lambda_max(&self) -> f64 {
        self.samples
            .iter()
            .fold(0.0f64, |acc, s| acc.max(s.lambda()))
    }

    /// max over nodes of max(lambda, |a|, |b|, |m|, |n|); the discrete C1
    /// size of the field, used by the admissibility gates.
    pub fn c1_norm(&self) -> f64 {
        self.samples
            .iter()
            .fold(0.0f64, |acc, s| acc.max(s.c1_norm()))
    }

    /// Per-node first derivatives (d1a, d2a), (d1b, d2b) of the field.
    /// Exactly-Codazzi grids read them off the stored (m, n); flagged
    /// approximate grids fall back to finite differences of (a, b).
    pub fn shape_derivs(&self) -> Vec<([f64; 2], [f64; 2])> {
        if !self.approximate_codazzi {
            return self
                .samples
                .iter()
                .map(|s| ([s.m, s.n], [s.n, -s.m]))
                .collect();
        }
        let mut out = Vec::with_capacity(self.samples.len());
        for j in 0..self.ny {
            for i in 0..self.nx {
                let da = [self.fd_x(i, j, |s| s.a), self.fd_y(i, j, |s| s.a)];
                let db = [self.fd_x(i, j, |s| s.b), self.fd_y(i, j, |s| s.b)];
                out.push((da, db));
            }
        }
        out
    }

    /// Central x-derivative of a per-sample quantity, periodic wrap or
    /// one-sided second-order at patch edges.
    pub fn fd_x(&self, i: usize, j: usize, f: impl Fn(&ShapeSample) -> f64) -> f64 {
        let h = self.hx();
        match self.mode {
            GridMode::Periodic => {
                let ip = (i + 1) % self.nx;
                let im = (i + self.nx - 1) % self.nx;
                (f(self.sample(ip, j)) - f(self.sample(im, j))) / (2.0 * h)
            }
            GridMode::Patch => {
                if i == 0 {
                    (-3.0 * f(self.sample(0, j)) + 4.0 * f(self.sample(1, j))
                        - f(self.sample(2, j)))
                        / (2.0 * h)
                } else if i == self.nx - 1 {
                    (3.0 * f(self.sample(i, j)) - 4.0 * f(self.sample(i - 1, j))
                        + f(self.sample(i - 2, j)))
                        / (2.0 * h)
                } else {
                    (f(self.sample(i + 1, j)) - f(self.sample(i - 1, j))) / (2.0 * h)
                }
            }
        }
    }

    pub fn fd_y(&self, i: usize, j: usize, f: impl Fn(&ShapeSample) -> f64) -> f64 {
        let h = self.hy();
        match self.mode {
            GridMode::Periodic => {
                let jp = (j + 1) % self.ny;
                let jm = (j + self.ny - 1) % self.ny;
                (f(self.sample(i, jp)) - f(self.sample(i, jm))) / (2.0 * h)
            }
            GridMode::Patch => {
                if j == 0 {
                    (-3.0 * f(self.sample(i, 0)) + 4.0 * f(self.sample(i, 1))
                        - f(self.sample(i, 2)))
                        / (2.0 * h)
                } else if j == self.ny - 1 {
                    (3.0 * f(self.sample(i, j)) - 4.0 * f(self.sample(i, j - 1))
                        + f(self.sample(i, j - 2)))
                        / (2.0 * h)
                } else {
                    (f(self.sample(i, j + 1)) - f(self.sample(i, j - 1))) / (2.0 * h)
                }
            }
        }
    }
}

/// Constant field: every node carries (a, b, 0, 0). Exactly Codazzi.
pub fn make_constant_field(
    a: f64,
    b: f64,
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
) -> Result<BaseGrid> {
    let sample = ShapeSample::new(a, b, 0.0, 0.0)?;
    let grid = BaseGrid {
        nx,
        ny,
        lx,
        ly,
        mode: GridMode::Periodic,
        approximate_codazzi: false,
        samples: vec![sample; nx * ny],
    };
    grid.validate()?;
    Ok(grid)
}

/// Evaluate p and p' at z by Horner's rule; coeffs[k] multiplies z^k.
fn poly_eval(coeffs: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &ck in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + ck;
    }
    (p, dp)
}

/// Non-periodic patch with a = Re p, b = -Im p for a complex polynomial p,
/// so the Codazzi relations hold exactly with m = Re p', n = -Im p'.
/// Rejects polynomials with |p| >= 1 anywhere on a dense sampling of the
/// patch.
pub fn make_holomorphic_patch(
    coeffs: &[Complex64],
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
) -> Result<BaseGrid> {
    // dense pre-check on a refined lattice
    let dense = 4 * nx.max(ny);
    for jj in 0..=dense {
        for ii in 0..=dense {
            let x = -0.5 * lx + lx * ii as f64 / dense as f64;
            let y = -0.5 * ly + ly * jj as f64 / dense as f64;
            let (p, _) = poly_eval(coeffs, Complex64::new(x, y));
            if p.norm() >= 1.0 {
                return Err(Error::Domain(format!(
                    "|p({x}, {y})| = {} not < 1 on the patch",
                    p.norm()
                )));
            }
        }
    }
    let mut samples = Vec::with_capacity(nx * ny);
    let proto = BaseGrid {
        nx,
        ny,
        lx,
        ly,
        mode: GridMode::Patch,
        approximate_codazzi: false,
        samples: Vec::new(),
    };
    for j in 0..ny {
        for i in 0..nx {
            let z = Complex64::new(proto.node_x(i), proto.node_y(j));
            let (p, dp) = poly_eval(coeffs, z);
            samples.push(ShapeSample::new(p.re, -p.im, dp.re, -dp.im)?);
        }
    }
    let grid = BaseGrid { samples, ..proto };
    grid.validate()?;
    Ok(grid)
}

/// Periodic grid sampled from an arbitrary (a, b) field. Stored (m, n) are
/// the central differences of a; the grid is flagged approximate unless its
/// Codazzi residual is at round-off.
pub fn make_custom_periodic(
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    f: impl Fn(f64, f64) -> (f64, f64),
) -> Result<BaseGrid> {
    let mut grid = BaseGrid {
        nx,
        ny,
        lx,
        ly,
        mode: GridMode::Periodic,
        approximate_codazzi: false,
        samples: vec![
            ShapeSample {
                a: 0.0,
                b: 0.0,
                m: 0.0,
                n: 0.0
            };
            nx * ny
        ],
    };
    for j in 0..ny {
        for i in 0..nx {
            let (a, b) = f(grid.node_x(i), grid.node_y(j));
            let k = grid.idx(i, j);
            grid.samples[k] = ShapeSample::new(a, b, 0.0, 0.0)?;
        }
    }
    for j in 0..ny {
        for i in 0..nx {
            let m = grid.fd_x(i, j, |s| s.a);
            let n = grid.fd_y(i, j, |s| s.a);
            let k = grid.idx(i, j);
            grid.samples[k].m = m;
            grid.samples[k].n = n;
        }
    }
    grid.approximate_codazzi = codazzi_residual(&grid) > 1e-10;
    grid.validate()?;
    Ok(grid)
}

/// Holomorphic polynomial sampled on a *periodic* grid. The field values are
/// pointwise Codazzi but the periodic wrap breaks the relations globally, so
/// the grid is flagged approximate; flows then use finite-difference field
/// derivatives.
pub fn make_holomorphic_periodic(
    coeffs: &[Complex64],
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
) -> Result<BaseGrid> {
    let mut grid = make_custom_periodic(nx, ny, lx, ly, |x, y| {
        let (p, _) = poly_eval(coeffs, Complex64::new(x, y));
        (p.re, -p.im)
    })?;
    grid.approximate_codazzi = true;
    Ok(grid)
}

/// Discrete Codazzi residual: max over nodes of |d1 a + d2 b| + |d2 a - d1 b|
/// using the grid's difference stencils on the stored (a, b) fields.
pub fn codazzi_residual(grid: &BaseGrid) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let d1a = grid.fd_x(i, j, |s| s.a);
            let d2a = grid.fd_y(i, j, |s| s.a);
            let d1b = grid.fd_x(i, j, |s| s.b);
            let d2b = grid.fd_y(i, j, |s| s.b);
            worst = worst.max((d1a + d2b).abs() + (d2a - d1b).abs());
        }
    }
    worst
}

/// Variance-style spread of the field, max entrywise deviation from the mean
/// of (a, b). Used by the Liouville self-consistency test.
pub fn field_spread(grid: &BaseGrid) -> f64 {
    let nn = grid.len() as f64;
    let (ma, mb) = grid
        .samples
        .iter()
        .fold((0.0, 0.0), |(sa, sb), s| (sa + s.a, sb + s.b));
    let (ma, mb) = (ma / nn, mb / nn);
    grid.samples.iter().fold(0.0f64, |acc, s| {
        acc.max((s.a - ma).abs()).max((s.b - mb).abs())
    })
}

/// Text serialization: header `nx ny lx ly mode`, then one `i j a b m n`
/// line per node in row-major order.
pub fn write_grid<W: Write>(grid: &BaseGrid, out: &mut W) -> Result<()> {
    let mode = match grid.mode {
        GridMode::Periodic => "periodic",
        GridMode::Patch => "patch",
    };
    writeln!(
        out,
        "{} {} {} {} {}",
        grid.nx, grid.ny, grid.lx, grid.ly, mode
    )?;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let s = grid.sample(i, j);
            writeln!(out, "{} {} {} {} {} {}", i, j, s.a, s.b, s.m, s.n)?;
        }
    }
    Ok(())
}

pub fn read_grid<R: BufRead>(input: &mut R) -> Result<BaseGrid> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::config(1, "empty grid file"))??;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 5 {
        return Err(Error::config(1, "expected header `nx ny lx ly mode`"));
    }
    let nx: usize = parts[0]
        .parse()
        .map_err(|_| Error::config(1, "bad nx in grid header"))?;
    let ny: usize = parts[1]
        .parse()
        .map_err(|_| Error::config(1, "bad ny in grid header"))?;
    let lx: f64 = parts[2]
        .parse()
        .map_err(|_| Error::config(1, "bad lx in grid header"))?;
    let ly: f64 = parts[3]
        .parse()
        .map_err(|_| Error::config(1, "bad ly in grid header"))?;
    let mode = match parts[4] {
        "periodic" => GridMode::Periodic,
        "patch" => GridMode::Patch,
        other => return Err(Error::config(1, format!("unknown grid mode `{other}`"))),
    };
    let mut samples = vec![
        ShapeSample {
            a: 0.0,
            b: 0.0,
            m: 0.0,
            n: 0.0
        };
        nx * ny
    ];
    let mut seen = 0usize;
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let p: Vec<&str> = line.split_whitespace().collect();
        if p.len() != 6 {
            return Err(Error::config(lineno + 2, "expected `i j a b m n`"));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::config(lineno + 2, format!("bad number `{s}`")))
        };
        let i: usize = p[0]
            .parse()
            .map_err(|_| Error::config(lineno + 2, "bad node index"))?;
        let j: usize = p[1]
            .parse()
            .map_err(|_| Error::config(lineno + 2, "bad node index"))?;
        if i >= nx || j >= ny {
            return Err(Error::config(lineno + 2, "node index out of range"));
        }
        samples[j * nx + i] =
            ShapeSample::new(parse(p[2])?, parse(p[3])?, parse(p[4])?, parse(p[5])?)?;
        seen += 1;
    }
    if seen != nx * ny {
        return Err(Error::config(
            0,
            format!("grid file has {seen} nodes, expected {}", nx * ny),
        ));
    }
    let mut grid = BaseGrid {
        nx,
        ny,
        lx,
        ly,
        mode,
        approximate_codazzi: false,
        samples,
    };
    grid.approximate_codazzi = mode == GridMode::Periodic && codazzi_residual(&grid) > 1e-10;
    grid.validate()?;
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::BufReader;

    #[test]
    fn constant_fields() {
        let g = make_constant_field(0.0, 0.0, 32, 32, 1.0, 1.0).unwrap();
        assert_eq!(g.lambda_max(), 0.0);
        assert_eq!(codazzi_residual(&g), 0.0);

        let g = make_constant_field(0.1, 0.0, 64, 64, 1.0, 1.0).unwrap();
        assert_eq!(g.lambda_max(), 0.1);
        assert_eq!(codazzi_residual(&g), 0.0);

        let g = make_constant_field(0.3, 0.4, 16, 16, 1.0, 1.0).unwrap();
        assert!((g.lambda_max() - 0.5).abs() < 1e-15);

        assert!(make_constant_field(0.8, 0.7, 16, 16, 1.0, 1.0).is_err());
    }

    #[test]
    fn holomorphic_patch_constant_and_linear() {
        let c = |re, im| Complex64::new(re, im);
        let g = make_holomorphic_patch(&[c(0.1, 0.0)], 16, 16, 2.0, 2.0).unwrap();
        for s in g.samples() {
            assert_eq!((s.a, s.b, s.m, s.n), (0.1, 0.0, 0.0, 0.0));
        }

        // p(z) = 0.05 z on [-1,1]^2: m = 0.05, n = 0 everywhere.
        let g = make_holomorphic_patch(&[c(0.0, 0.0), c(0.05, 0.0)], 21, 21, 2.0, 2.0).unwrap();
        for s in g.samples() {
            assert!((s.m - 0.05).abs() < 1e-15 && s.n.abs() < 1e-15);
        }
        // and the stored m matches finite differences of a in the interior
        let d = g.fd_x(10, 10, |s| s.a);
        assert!((d - 0.05).abs() < 1e-12);
    }

    #[test]
    fn holomorphic_patch_quadratic_values() {
        // p(z) = 0.02 z^2 at z = 1 + i: p = 0.04i, so a = 0, b = -0.04;
        // p' = 0.04 z.
        let c = |re, im| Complex64::new(re, im);
        let g = make_holomorphic_patch(&[c(0.0, 0.0), c(0.0, 0.0), c(0.02, 0.0)], 21, 21, 2.0, 2.0)
            .unwrap();
        let s = g.sample(20, 20); // node (1, 1)
        assert!(s.a.abs() < 1e-15);
        assert!((s.b + 0.04).abs() < 1e-15);
        let dp = Complex64::new(0.04, 0.04); // 0.04 (1 + i)
        assert!((s.m - dp.re).abs() < 1e-15 && (s.n + dp.im).abs() < 1e-15);
    }

    #[test]
    fn patch_rejects_large_polynomial() {
        let c = |re, im| Complex64::new(re, im);
        assert!(make_holomorphic_patch(&[c(0.0, 0.0), c(0.9, 0.0)], 16, 16, 2.0, 2.0).is_err());
    }

    #[test]
    fn codazzi_residual_of_patch_refines_quadratically() {
        let c = |re, im| Complex64::new(re, im);
        let coeffs = [c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.05, 0.0)]; // 0.05 z^3
        let r1 = codazzi_residual(&make_holomorphic_patch(&coeffs, 26, 26, 2.0, 2.0).unwrap());
        let r2 = codazzi_residual(&make_holomorphic_patch(&coeffs, 51, 51, 2.0, 2.0).unwrap());
        assert!(r1 > 0.0 && r2 > 0.0);
        let ratio = r1 / r2;
        assert!(
            (3.0..5.0).contains(&ratio),
            "expected ~4x drop, got {ratio} ({r1} -> {r2})"
        );
    }

    #[test]
    fn sinusoid_residual_matches_analytic_scale() {
        // Refinement does not shrink the residual of a genuinely
        // non-Codazzi field: it settles at the field's own derivative
        // scale eps*k (up to the sinc factor of the central stencil).
        let eps = 1e-3;
        let lx = 2.0 * std::f64::consts::PI;
        let k = 2.0 * std::f64::consts::PI / lx;
        for n in [64usize, 128] {
            let g = make_custom_periodic(n, n, lx, lx, |x, _| (eps * (k * x).sin(), 0.0)).unwrap();
            assert!(g.approximate_codazzi);
            let res = codazzi_residual(&g);
            let kh = k * g.hx();
            let expect = eps * k * (kh.sin() / kh);
            assert!(
                (res - expect).abs() < 0.01 * expect,
                "n = {n}: residual {res} vs analytic {expect}"
            );
        }
    }

    #[test]
    fn liouville_periodic_codazzi_fields_are_constant() {
        // Every generator-suite periodic field with round-off Codazzi
        // residual must be (numerically) constant.
        let fields: Vec<BaseGrid> = vec![
            make_constant_field(0.2, -0.1, 24, 24, 1.5, 1.0).unwrap(),
            make_constant_field(0.0, 0.0, 16, 16, 1.0, 1.0).unwrap(),
            make_custom_periodic(32, 32, 6.3, 6.3, |x, _| (1e-4 * x.sin(), 0.0)).unwrap(),
        ];
        for g in &fields {
            if codazzi_residual(g) < 1e-10 {
                assert!(field_spread(g) < 1e-10);
            } else {
                assert!(field_spread(g) > 1e-10);
            }
        }
    }

    #[test]
    fn custom_periodic_mn_match_central_differences() {
        let lx = 2.0 * std::f64::consts::PI;
        let g = make_custom_periodic(48, 48, lx, lx, |x, y| {
            (1e-3 * x.sin() * y.cos(), 5e-4 * (x + y).cos())
        })
        .unwrap();
        for j in 0..g.ny {
            for i in 0..g.nx {
                let s = g.sample(i, j);
                assert_eq!(s.m, g.fd_x(i, j, |s| s.a));
                assert_eq!(s.n, g.fd_y(i, j, |s| s.a));
            }
        }
    }

    #[test]
    fn grid_text_roundtrip() {
        let c = Complex64::new;
        let g = make_holomorphic_patch(&[c(0.1, 0.02), c(0.05, -0.01)], 8, 6, 2.0, 1.0).unwrap();
        let mut buf = Vec::new();
        write_grid(&g, &mut buf).unwrap();
        let back = read_grid(&mut BufReader::new(&buf[..])).unwrap();
        assert_eq!(back.nx, g.nx);
        assert_eq!(back.ny, g.ny);
        assert_eq!(back.mode, g.mode);
        for (s, t) in g.samples().iter().zip(back.samples()) {
            assert_eq!(s, t);
        }
    }

    #[test]
    fn read_grid_rejects_malformed() {
        let bad = "4 4 1.0 1.0 hexagonal\n";
        assert!(read_grid(&mut BufReader::new(bad.as_bytes())).is_err());
        let bad = "4 4 1.0 1.0 periodic\n0 0 0.1 0.0\n";
        assert!(read_grid(&mut BufReader::new(bad.as_bytes())).is_err());
    }
}
