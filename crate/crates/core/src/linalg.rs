//! Tiny fixed-size matrix helpers. Everything here is stack-allocated row
//! arrays; the tensor algebra in this crate never exceeds 4x4.

pub type Mat2 = [[f64; 2]; 2];
pub type Mat3 = [[f64; 3]; 3];

pub const I2: Mat2 = [[1.0, 0.0], [0.0, 1.0]];

pub fn mul<const R: usize, const K: usize, const C: usize>(
    a: &[[f64; K]; R],
    b: &[[f64; C]; K],
) -> [[f64; C]; R] {
    let mut out = [[0.0; C]; R];
    for i in 0..R {
        for k in 0..K {
            let aik = a[i][k];
            for j in 0..C {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

pub fn transpose<const R: usize, const C: usize>(a: &[[f64; C]; R]) -> [[f64; R]; C] {
    let mut out = [[0.0; R]; C];
    for i in 0..R {
        for j in 0..C {
            out[j][i] = a[i][j];
        }
    }
    out
}

pub fn add<const R: usize, const C: usize>(a: &[[f64; C]; R], b: &[[f64; C]; R]) -> [[f64; C]; R] {
    let mut out = [[0.0; C]; R];
    for i in 0..R {
        for j in 0..C {
            out[i][j] = a[i][j] + b[i][j];
        }
    }
    out
}

pub fn sub<const R: usize, const C: usize>(a: &[[f64; C]; R], b: &[[f64; C]; R]) -> [[f64; C]; R] {
    let mut out = [[0.0; C]; R];
    for i in 0..R {
        for j in 0..C {
            out[i][j] = a[i][j] - b[i][j];
        }
    }
    out
}

pub fn scale<const R: usize, const C: usize>(s: f64, a: &[[f64; C]; R]) -> [[f64; C]; R] {
    let mut out = [[0.0; C]; R];
    for i in 0..R {
        for j in 0..C {
            out[i][j] = s * a[i][j];
        }
    }
    out
}

pub fn trace<const N: usize>(a: &[[f64; N]; N]) -> f64 {
    (0..N).map(|i| a[i][i]).sum()
}

/// Frobenius-style max-abs entry, used in round-off assertions.
pub fn max_abs<const R: usize, const C: usize>(a: &[[f64; C]; R]) -> f64 {
    let mut m = 0.0f64;
    for row in a {
        for &x in row {
            m = m.max(x.abs());
        }
    }
    m
}

/// Embed a 2x2 block into the lower-right corner of a zero 3x3 matrix.
pub fn embed3(a: &Mat2) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..2 {
        for j in 0..2 {
            out[i + 1][j + 1] = a[i][j];
        }
    }
    out
}

pub fn det2(a: &Mat2) -> f64 {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

/// Eigenvalues of a 2x2 matrix with real spectrum, ascending.
/// Returns None when the discriminant is negative beyond round-off.
pub fn eigenvalues2(a: &Mat2) -> Option<(f64, f64)> {
    let tr = a[0][0] + a[1][1];
    let det = det2(a);
    let disc = tr * tr - 4.0 * det;
    if disc < -1e-12 * tr.mul_add(tr, 1.0) {
        return None;
    }
    let s = disc.max(0.0).sqrt();
    Some(((tr - s) / 2.0, (tr + s) / 2.0))
}
