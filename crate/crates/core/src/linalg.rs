//! Small fixed-size helpers for 3-vectors and 3x3 matrices over any [`Real`].

use crate::real::Real;

pub type Vec3<T> = [T; 3];
pub type Mat3<T> = [[T; 3]; 3];
/// `c[a][b][c]`: first index up, last two down for connections.
pub type Tensor3<T> = [[[T; 3]; 3]; 3];
pub type Tensor4<T> = [[[[T; 3]; 3]; 3]; 3];

pub fn zeros3<T: Real>() -> Vec3<T> {
    [T::zero(); 3]
}

pub fn zeros33<T: Real>() -> Mat3<T> {
    [[T::zero(); 3]; 3]
}

pub fn identity<T: Real>() -> Mat3<T> {
    let mut m = zeros33();
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = T::cst(1.0);
    }
    m
}

pub fn lift3<T: Real>(v: &[f64; 3]) -> Vec3<T> {
    [T::cst(v[0]), T::cst(v[1]), T::cst(v[2])]
}

pub fn re3<T: Real>(v: &Vec3<T>) -> [f64; 3] {
    [v[0].re(), v[1].re(), v[2].re()]
}

pub fn dot<T: Real>(a: &Vec3<T>, b: &Vec3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross<T: Real>(a: &Vec3<T>, b: &Vec3<T>) -> Vec3<T> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn mat_vec<T: Real>(m: &Mat3<T>, v: &Vec3<T>) -> Vec3<T> {
    [dot(&m[0], v), dot(&m[1], v), dot(&m[2], v)]
}

/// `a^T m b`.
pub fn bilinear<T: Real>(m: &Mat3<T>, a: &Vec3<T>, b: &Vec3<T>) -> T {
    dot(a, &mat_vec(m, b))
}

pub fn det3<T: Real>(m: &Mat3<T>) -> T {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Inverse by cofactors. The caller guarantees invertibility.
pub fn inv3<T: Real>(m: &Mat3<T>) -> Mat3<T> {
    let inv_det = det3(m).recip();
    let mut r = zeros33();
    for i in 0..3 {
        for j in 0..3 {
            let (a, b) = ((j + 1) % 3, (j + 2) % 3);
            let (c, d) = ((i + 1) % 3, (i + 2) % 3);
            r[i][j] = (m[a][c] * m[b][d] - m[a][d] * m[b][c]) * inv_det;
        }
    }
    r
}

/// Cholesky factorisation succeeds (strictly positive pivots).
pub fn is_positive_definite(m: &Mat3<f64>) -> bool {
    let mut l = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..=i {
            let mut s = m[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if !(s > 0.0) {
                    return false;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    true
}
