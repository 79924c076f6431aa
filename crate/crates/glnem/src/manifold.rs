//! Centered semi-orthogonal matrices: n×d matrices with orthonormal columns
//! that are each orthogonal to the all-ones vector.
//!
//! The construction maps an unconstrained n×d matrix B to the last d columns
//! of the unique positive-diagonal QR factor of [1ₙ, B]. The map is smooth
//! wherever [1ₙ, B] has full column rank, and `CenteredQr::vjp` provides the
//! exact adjoint needed by gradient-based samplers.

use crate::error::{GlnemError, Result};
use crate::linalg::{householder_qr, jacobi_eigh, solve_upper, Mat};

/// An n×d matrix U with UᵀU = I and Uᵀ1 = 0.
#[derive(Debug, Clone)]
pub struct LatentBasis {
    u: Mat,
}

impl LatentBasis {
    pub fn matrix(&self) -> &Mat {
        &self.u
    }

    pub fn into_matrix(self) -> Mat {
        self.u
    }

    pub fn n(&self) -> usize {
        self.u.rows()
    }

    pub fn d(&self) -> usize {
        self.u.cols()
    }
}

/// Cached QR factorization of [1ₙ, B], kept around so the forward map and its
/// adjoint share one decomposition.
pub struct CenteredQr {
    q: Mat, // n × (d+1)
    r: Mat, // (d+1) × (d+1), positive diagonal
}

impl CenteredQr {
    /// Factorizes [1ₙ, B]. Errors when the augmented matrix is rank
    /// deficient.
    pub fn new(b: &Mat) -> Result<Self> {
        let n = b.rows();
        let d = b.cols();
        if n < d + 1 {
            return Err(GlnemError::Degenerate(format!(
                "need n >= d+1 rows, got n={n}, d={d}"
            )));
        }
        let mut a = Mat::zeros(n, d + 1);
        for i in 0..n {
            *a.at_mut(i, 0) = 1.0;
            for j in 0..d {
                *a.at_mut(i, j + 1) = b.at(i, j);
            }
        }
        let qr = householder_qr(&a)?;
        Ok(CenteredQr { q: qr.q, r: qr.r })
    }

    /// The centered semi-orthogonal factor: columns 2..=d+1 of Q.
    pub fn basis(&self) -> LatentBasis {
        let n = self.q.rows();
        let d = self.q.cols() - 1;
        let u = Mat::from_fn(n, d, |i, j| self.q.at(i, j + 1));
        LatentBasis { u }
    }

    /// Adjoint of the map B ↦ U: given the gradient `u_bar` of a scalar with
    /// respect to U, returns the gradient with respect to B.
    ///
    /// With Q̄ = [0, Ū] and N = QᵀQ̄, the adjoint of the positive-diagonal
    /// thin QR is Ā = (Q·tril(N − Nᵀ, −1) + Q̄ − Q·N) R⁻ᵀ; B̄ drops the first
    /// column of Ā.
    pub fn vjp(&self, u_bar: &Mat) -> Mat {
        let n = self.q.rows();
        let m = self.q.cols(); // d + 1
        let d = m - 1;
        assert_eq!(u_bar.rows(), n);
        assert_eq!(u_bar.cols(), d);

        // Q̄ = [0, Ū]
        let mut q_bar = Mat::zeros(n, m);
        for i in 0..n {
            for j in 0..d {
                *q_bar.at_mut(i, j + 1) = u_bar.at(i, j);
            }
        }
        let big_n = self.q.tr_matmul(&q_bar); // m × m

        // H = tril(N − Nᵀ, −1) − N  (combining the skew part and −QQᵀQ̄ term)
        let mut h = Mat::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                let mut v = -big_n.at(i, j);
                if i > j {
                    v += big_n.at(i, j) - big_n.at(j, i);
                }
                *h.at_mut(i, j) = v;
            }
        }

        // Z = Q H + Q̄, then Ā = Z R⁻ᵀ row by row.
        let mut z = self.q.matmul(&h);
        z.add_assign(&q_bar);
        let mut a_bar = Mat::zeros(n, m);
        let mut row = vec![0.0; m];
        for i in 0..n {
            row.copy_from_slice(z.row(i));
            solve_upper(&self.r, &mut row);
            a_bar.row_mut(i).copy_from_slice(&row);
        }

        Mat::from_fn(n, d, |i, j| a_bar.at(i, j + 1))
    }
}

/// Maps an unconstrained matrix to the centered semi-orthogonal manifold.
pub fn centered_orthogonalize(b: &Mat) -> Result<LatentBasis> {
    Ok(CenteredQr::new(b)?.basis())
}

/// Checks the two membership invariants within `tol`.
pub fn is_member(u: &Mat, tol: f64) -> bool {
    let d = u.cols();
    let gram = u.tr_matmul(u);
    for i in 0..d {
        for j in 0..d {
            let target = if i == j { 1.0 } else { 0.0 };
            if (gram.at(i, j) - target).abs() > tol {
                return false;
            }
        }
    }
    for j in 0..d {
        let s: f64 = (0..u.rows()).map(|i| u.at(i, j)).sum();
        if s.abs() > tol {
            return false;
        }
    }
    true
}

/// Fréchet mean of a set of bases: the orthogonal polar factor of their
/// element-wise mean, computed through the d×d Gram matrix.
///
/// When every draw is centered the mean's column space stays orthogonal to
/// the ones vector, so the result is again a centered basis.
pub fn frechet_mean(draws: &[Mat]) -> Result<LatentBasis> {
    if draws.is_empty() {
        return Err(GlnemError::Degenerate("frechet_mean of an empty set".into()));
    }
    let n = draws[0].rows();
    let d = draws[0].cols();
    let mut mean = Mat::zeros(n, d);
    for m in draws {
        assert_eq!((m.rows(), m.cols()), (n, d), "inconsistent draw shapes");
        mean.add_assign(m);
    }
    mean.scale(1.0 / draws.len() as f64);
    polar_orthogonal(&mean)
}

/// Orthogonal polar factor M (MᵀM)^{-1/2} of a full-column-rank matrix.
pub fn polar_orthogonal(m: &Mat) -> Result<LatentBasis> {
    let d = m.cols();
    if d == 0 {
        return Ok(LatentBasis { u: m.clone() });
    }
    let gram = m.tr_matmul(m);
    let (w, v) = jacobi_eigh(&gram);
    let scale = w[0].max(1e-300);
    if w[d - 1] <= scale * 1e-12 || w[d - 1] <= 0.0 {
        return Err(GlnemError::Degenerate(
            "rank-deficient mean in polar decomposition".into(),
        ));
    }
    // (MᵀM)^{-1/2} = V diag(w^{-1/2}) Vᵀ
    let mut inv_sqrt = Mat::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let mut acc = 0.0;
            for k in 0..d {
                acc += v.at(i, k) * v.at(j, k) / w[k].sqrt();
            }
            *inv_sqrt.at_mut(i, j) = acc;
        }
    }
    Ok(LatentBasis { u: m.matmul(&inv_sqrt) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_mat(rng: &mut StdRng, n: usize, d: usize) -> Mat {
        Mat::from_fn(n, d, |_, _| rng.random_range(-2.0..2.0))
    }

    fn random_basis(rng: &mut StdRng, n: usize, d: usize) -> Mat {
        centered_orthogonalize(&random_mat(rng, n, d))
            .unwrap()
            .into_matrix()
    }

    #[test]
    fn construction_invariants_hold() {
        let mut rng = StdRng::seed_from_u64(19);
        for _ in 0..50 {
            let n = rng.random_range(4..60);
            let d = rng.random_range(1..(n - 1).min(8));
            let u = random_basis(&mut rng, n, d);
            assert!(is_member(&u, 1e-12));
        }
    }

    #[test]
    fn hand_gram_schmidt_two_by_one() {
        // [1₂, (0,1)ᵀ]: second orthonormal direction is (−1/√2, 1/√2).
        let b = Mat::from_rows(&[vec![0.0], vec![1.0]]);
        let u = centered_orthogonalize(&b).unwrap().into_matrix();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((u.at(0, 0) + s).abs() < 1e-14);
        assert!((u.at(1, 0) - s).abs() < 1e-14);
    }

    #[test]
    fn fixed_point_on_the_manifold() {
        // Feeding a member back in reproduces it exactly (surjectivity witness).
        let mut rng = StdRng::seed_from_u64(23);
        for _ in 0..20 {
            let n = rng.random_range(4..40);
            let d = rng.random_range(1..(n - 1).min(6));
            let u = random_basis(&mut rng, n, d);
            let u2 = centered_orthogonalize(&u).unwrap().into_matrix();
            assert!(u.max_abs_diff(&u2) < 1e-12);
        }
    }

    #[test]
    fn rejects_rank_deficiency() {
        // A column equal to the ones vector makes [1, B] singular.
        let b = Mat::from_fn(6, 2, |_, j| if j == 0 { 1.0 } else { 0.0 });
        assert!(centered_orthogonalize(&b).is_err());
    }

    #[test]
    fn is_member_examples() {
        let mut rng = StdRng::seed_from_u64(29);
        let u = random_basis(&mut rng, 10, 3);
        assert!(is_member(&u, 1e-10));
        let ones = Mat::from_fn(10, 1, |_, _| 1.0);
        assert!(!is_member(&ones, 1e-8));
    }

    #[test]
    fn vjp_matches_finite_differences() {
        // Scalar function: f(U) = Σ c_ij U_ij for fixed random c, plus a
        // quadratic term to exercise nonlinearity in the pullback inputs.
        let mut rng = StdRng::seed_from_u64(31);
        for _ in 0..10 {
            let n = rng.random_range(5..16);
            let d = rng.random_range(1..4);
            let b = random_mat(&mut rng, n, d);
            let c = random_mat(&mut rng, n, d);
            let f = |b: &Mat| -> f64 {
                let u = centered_orthogonalize(b).unwrap().into_matrix();
                let mut acc = 0.0;
                for i in 0..n {
                    for j in 0..d {
                        acc += c.at(i, j) * u.at(i, j) + 0.3 * u.at(i, j) * u.at(i, j) * c.at(i, j);
                    }
                }
                acc
            };
            let qr = CenteredQr::new(&b).unwrap();
            let u = qr.basis().into_matrix();
            let u_bar = Mat::from_fn(n, d, |i, j| c.at(i, j) * (1.0 + 0.6 * u.at(i, j)));
            let b_bar = qr.vjp(&u_bar);
            for i in 0..n {
                for j in 0..d {
                    let h = 1e-6;
                    let mut bp = b.clone();
                    *bp.at_mut(i, j) += h;
                    let mut bm = b.clone();
                    *bm.at_mut(i, j) -= h;
                    let fd = (f(&bp) - f(&bm)) / (2.0 * h);
                    let an = b_bar.at(i, j);
                    let scale = an.abs().max(fd.abs()).max(1e-4);
                    assert!(
                        (an - fd).abs() / scale < 1e-5,
                        "vjp mismatch at ({i},{j}): {an} vs {fd}"
                    );
                }
            }
        }
    }

    #[test]
    fn frechet_mean_of_identical_draws() {
        let mut rng = StdRng::seed_from_u64(37);
        let u = random_basis(&mut rng, 12, 3);
        let mean = frechet_mean(&[u.clone(), u.clone(), u.clone()]).unwrap();
        assert!(mean.matrix().max_abs_diff(&u) < 1e-10);
    }

    #[test]
    fn frechet_mean_of_random_pair_is_member() {
        let mut rng = StdRng::seed_from_u64(41);
        for _ in 0..10 {
            let a = random_basis(&mut rng, 15, 4);
            let b = random_basis(&mut rng, 15, 4);
            match frechet_mean(&[a, b]) {
                Ok(mean) => assert!(is_member(mean.matrix(), 1e-10)),
                // A random pair can have a nearly rank-deficient average;
                // rejecting it is the contract.
                Err(GlnemError::Degenerate(_)) => {}
                Err(e) => panic!("unexpected error {e}"),
            }
        }
    }

    #[test]
    fn frechet_mean_rejects_empty_and_degenerate() {
        assert!(frechet_mean(&[]).is_err());
        let mean_zero = Mat::zeros(8, 2);
        assert!(frechet_mean(&[mean_zero.clone(), mean_zero]).is_err());
    }
}
