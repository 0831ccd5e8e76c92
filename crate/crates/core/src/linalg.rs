//! Small dense linear-algebra helpers shared by the kernel modules.

use nalgebra::DMatrix;
pub use num_complex::Complex64 as C64;

pub type CMat = DMatrix<C64>;

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn det(m: &CMat) -> C64 {
    RightDivisor::new(m).determinant()
}

/// Product of row norms, an upper bound for `|det m|`.
pub fn hadamard_bound(m: &CMat) -> f64 {
    m.row_iter().map(|r| r.norm()).product()
}

pub fn submatrix(m: &CMat, rows: &[usize], cols: &[usize]) -> CMat {
    CMat::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

pub fn principal(m: &CMat, idx: &[usize]) -> CMat {
    submatrix(m, idx, idx)
}

/// `diag(left) · m · diag(right)`.
pub fn scale(m: &CMat, left: &[f64], right: &[f64]) -> CMat {
    CMat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * (left[i] * right[j]))
}

/// `diag(d) · m`.
pub fn scale_rows(m: &CMat, d: &[f64]) -> CMat {
    CMat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * d[i])
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `max |m - m^H|`.
pub fn hermitian_defect(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..=i {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn sqrt_weights(w: &[f64]) -> Vec<f64> {
    w.iter().map(|x| x.max(0.0).sqrt()).collect()
}

/// Eigenvalues (ascending) and eigenvectors of the hermitian matrix
/// `W^{1/2} m W^{1/2}`; the input is hermitized first.
pub fn weighted_eigen(m: &CMat, weights: &[f64]) -> (Vec<f64>, CMat) {
    let s = sqrt_weights(weights);
    let a = scale(m, &s, &s);
    let h = (&a + a.adjoint()) * c(0.5);
    // real symmetric input takes the (much faster) real solver
    let (lambda, vecs) = if h.iter().all(|z| z.im == 0.0) {
        let eig = h.map(|z| z.re).symmetric_eigen();
        (eig.eigenvalues, eig.eigenvectors.map(c))
    } else {
        let eig = h.symmetric_eigen();
        (eig.eigenvalues, eig.eigenvectors)
    };
    let mut order: Vec<usize> = (0..lambda.len()).collect();
    order.sort_by(|&i, &j| lambda[i].total_cmp(&lambda[j]));
    let values = order.iter().map(|&i| lambda[i]).collect();
    let vectors = CMat::from_fn(vecs.nrows(), order.len(), |r, k| vecs[(r, order[k])]);
    (values, vectors)
}

/// Solves `x · a = b` for `x` (right division), via the LU of `a^T`.
pub fn right_divide(b: &CMat, a: &CMat) -> Option<CMat> {
    RightDivisor::new(a).solve(b)
}

fn is_real(m: &CMat) -> bool {
    m.iter().all(|z| z.im == 0.0)
}

/// One LU of `a^T` serving both `det a` and right division by `a`; real
/// matrices are factored in real arithmetic.
pub enum RightDivisor {
    Real(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
    Complex(nalgebra::LU<C64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl RightDivisor {
    pub fn new(a: &CMat) -> Self {
        if is_real(a) {
            RightDivisor::Real(a.transpose().map(|z| z.re).lu())
        } else {
            RightDivisor::Complex(a.transpose().lu())
        }
    }

    pub fn determinant(&self) -> C64 {
        match self {
            RightDivisor::Real(lu) if lu.l().nrows() == 0 => c(1.0),
            RightDivisor::Complex(lu) if lu.l().nrows() == 0 => c(1.0),
            RightDivisor::Real(lu) => c(lu.determinant()),
            RightDivisor::Complex(lu) => lu.determinant(),
        }
    }

    /// `x` with `x · a = b`.
    pub fn solve(&self, b: &CMat) -> Option<CMat> {
        match self {
            RightDivisor::Real(lu) if is_real(b) => lu.solve(&b.transpose().map(|z| z.re)).map(|x| x.transpose().map(c)),
            RightDivisor::Real(lu) => {
                let re = lu.solve(&b.transpose().map(|z| z.re))?;
                let im = lu.solve(&b.transpose().map(|z| z.im))?;
                Some(CMat::from_fn(b.nrows(), b.ncols(), |i, j| C64::new(re[(j, i)], im[(j, i)])))
            }
            RightDivisor::Complex(lu) => lu.solve(&b.transpose()).map(|x| x.transpose()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_and_complex_division_agree() {
        let a = CMat::from_fn(4, 4, |i, j| c(if i == j { 3.0 } else { 0.3 * (i as f64 - 1.5 * j as f64) }));
        let b = CMat::from_fn(2, 4, |i, j| C64::new(i as f64 + 0.5 * j as f64, 0.25 * j as f64));
        let real = RightDivisor::new(&a);
        assert!(matches!(real, RightDivisor::Real(_)));
        let complex = RightDivisor::Complex(a.transpose().lu());
        let (x, y) = (real.solve(&b).unwrap(), complex.solve(&b).unwrap());
        assert!(max_abs(&(&x - &y)) < 1e-14);
        assert!(max_abs(&(&x * &a - &b)) < 1e-13);
        assert!((real.determinant() - complex.determinant()).norm() < 1e-12);
        assert_eq!(det(&CMat::zeros(0, 0)), c(1.0));
    }
}
