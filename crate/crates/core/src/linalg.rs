//! Small fixed-size vector helpers used throughout the geometric code.

use crate::ad::Scalar;

pub type Vec3<S = f64> = [S; 3];
/// Row-major 3x3 matrix: `m[i][j] = ∂X_i/∂q_j` for Jacobians.
pub type Mat3<S = f64> = [[S; 3]; 3];

#[inline]
pub fn dot<S: Scalar>(a: &Vec3<S>, b: &Vec3<S>) -> S {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross<S: Scalar>(a: &Vec3<S>, b: &Vec3<S>) -> Vec3<S> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Determinant of the matrix whose columns are `a`, `b`, `c`.
#[inline]
pub fn det3<S: Scalar>(a: &Vec3<S>, b: &Vec3<S>, c: &Vec3<S>) -> S {
    dot(a, &cross(b, c))
}

#[inline]
pub fn add<S: Scalar>(a: &Vec3<S>, b: &Vec3<S>) -> Vec3<S> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub<S: Scalar>(a: &Vec3<S>, b: &Vec3<S>) -> Vec3<S> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale<S: Scalar>(k: S, a: &Vec3<S>) -> Vec3<S> {
    [k * a[0], k * a[1], k * a[2]]
}

/// `a + k b`
#[inline]
pub fn axpy<S: Scalar>(a: &Vec3<S>, k: S, b: &Vec3<S>) -> Vec3<S> {
    [a[0] + k * b[0], a[1] + k * b[1], a[2] + k * b[2]]
}

#[inline]
pub fn mat_vec<S: Scalar>(m: &Mat3<S>, v: &Vec3<S>) -> Vec3<S> {
    [dot(&m[0], v), dot(&m[1], v), dot(&m[2], v)]
}

/// `mᵀ v`
#[inline]
pub fn mat_t_vec<S: Scalar>(m: &Mat3<S>, v: &Vec3<S>) -> Vec3<S> {
    std::array::from_fn(|j| m[0][j] * v[0] + m[1][j] * v[1] + m[2][j] * v[2])
}

#[inline]
pub fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn normalized(a: &Vec3) -> Vec3 {
    let n = norm(a);
    [a[0] / n, a[1] / n, a[2] / n]
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn determinant_of_columns() {
        let e1 = [1.0, 0.0, 0.0];
        let e2 = [0.0, 1.0, 0.0];
        let e3 = [0.0, 0.0, 1.0];
        assert_eq!(det3(&e1, &e2, &e3), 1.0);
        assert_eq!(det3(&e2, &e1, &e3), -1.0);
        assert_eq!(det3(&e1, &e1, &e3), 0.0);
    }

    #[test]
    fn transpose_product() {
        let m = [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0], [7.0, 8.0, 9.0]];
        assert_eq!(mat_t_vec(&m, &[1.0, 0.0, 0.0]), [1.0, 2.0, 3.0]);
        assert_eq!(mat_vec(&m, &[1.0, 0.0, 0.0]), [1.0, 4.0, 7.0]);
    }
}
