//! Dense complex matrix algebra and superoperator vectorization.
//!
//! All superoperators act on column-stacked density matrices:
//! `vec(A ρ B) = (Bᵀ ⊗ A) vec(ρ)`. Every builder in the crate goes through
//! [`sandwich_superop`] so the convention lives in exactly one place.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{FcsError, Result};

pub type C64 = Complex64;

/// Square complex matrix on a D-dimensional Hilbert space.
pub type OperatorMatrix = DMatrix<C64>;

/// D²×D² matrix acting on column-stacked operators.
pub type SuperOperator = DMatrix<C64>;

/// Column-stacked operator of length D².
pub type StateVector = DVector<C64>;

/// Tolerance for Hermiticity checks, relative to `max(1, max|entry|)`.
pub const HERMITIAN_TOL: f64 = 1e-12;

pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn identity(dim: usize) -> OperatorMatrix {
    OperatorMatrix::identity(dim, dim)
}

pub fn sigma_x() -> OperatorMatrix {
    OperatorMatrix::from_row_slice(2, 2, &[re(0.0), re(1.0), re(1.0), re(0.0)])
}

pub fn sigma_y() -> OperatorMatrix {
    OperatorMatrix::from_row_slice(2, 2, &[re(0.0), c(0.0, -1.0), c(0.0, 1.0), re(0.0)])
}

/// `diag(1, -1)`: basis state 0 is the upper level.
pub fn sigma_z() -> OperatorMatrix {
    OperatorMatrix::from_row_slice(2, 2, &[re(1.0), re(0.0), re(0.0), re(-1.0)])
}

/// Lowering operator `(σx − iσy)/2`, taking basis state 0 (upper) to 1 (lower).
pub fn sigma_minus() -> OperatorMatrix {
    (sigma_x() - sigma_y() * I) * re(0.5)
}

pub fn sigma_plus() -> OperatorMatrix {
    sigma_minus().adjoint()
}

/// Truncated annihilation operator on `n` Fock levels.
pub fn annihilation(n: usize) -> OperatorMatrix {
    let mut a = OperatorMatrix::zeros(n, n);
    for k in 1..n {
        a[(k - 1, k)] = re((k as f64).sqrt());
    }
    a
}

pub fn kron(a: &OperatorMatrix, b: &OperatorMatrix) -> OperatorMatrix {
    a.kronecker(b)
}

pub fn vectorize(rho: &OperatorMatrix) -> StateVector {
    StateVector::from_column_slice(rho.as_slice())
}

pub fn devectorize(v: &StateVector) -> Result<OperatorMatrix> {
    let dim = (v.len() as f64).sqrt().round() as usize;
    if dim * dim != v.len() {
        return Err(FcsError::DimensionMismatch {
            expected: dim * dim,
            found: v.len(),
        });
    }
    Ok(OperatorMatrix::from_column_slice(dim, dim, v.as_slice()))
}

/// Superoperator of `ρ ↦ A ρ B`.
pub fn sandwich_superop(a: &OperatorMatrix, b: &OperatorMatrix) -> Result<SuperOperator> {
    check_square(a)?;
    check_square(b)?;
    if a.nrows() != b.nrows() {
        return Err(FcsError::DimensionMismatch {
            expected: a.nrows(),
            found: b.nrows(),
        });
    }
    Ok(b.transpose().kronecker(a))
}

/// `ρ ↦ A ρ`
pub fn left_superop(a: &OperatorMatrix) -> SuperOperator {
    identity(a.nrows()).kronecker(a)
}

/// `ρ ↦ ρ B`
pub fn right_superop(b: &OperatorMatrix) -> SuperOperator {
    b.transpose().kronecker(&identity(b.nrows()))
}

/// `ρ ↦ [H, ρ]`
pub fn commutator_superop(h: &OperatorMatrix) -> SuperOperator {
    left_superop(h) - right_superop(h)
}

/// `ρ ↦ {K, ρ}`
pub fn anticommutator_superop(k: &OperatorMatrix) -> SuperOperator {
    left_superop(k) + right_superop(k)
}

pub fn trace(m: &OperatorMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// Row vector `vec(I)ᵀ`; `vec(I)ᵀ · vec(ρ) = Tr ρ`.
pub fn trace_functional(dim: usize) -> StateVector {
    vectorize(&identity(dim))
}

pub fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn hermiticity_deviation(m: &OperatorMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn is_hermitian(m: &OperatorMatrix) -> bool {
    m.is_square() && hermiticity_deviation(m) <= HERMITIAN_TOL * max_abs(m).max(1.0)
}

pub fn ensure_hermitian(m: &OperatorMatrix) -> Result<()> {
    check_square(m)?;
    if is_hermitian(m) {
        Ok(())
    } else {
        Err(FcsError::NotHermitian {
            deviation: hermiticity_deviation(m),
        })
    }
}

fn check_square(m: &OperatorMatrix) -> Result<()> {
    if m.is_square() {
        Ok(())
    } else {
        Err(FcsError::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        })
    }
}

/// Eigen-decomposition of a Hermitian matrix with ascending eigenvalues.
/// Columns of the returned matrix are the eigenvectors.
pub fn hermitian_eigen(h: &OperatorMatrix) -> Result<(Vec<f64>, OperatorMatrix)> {
    ensure_hermitian(h)?;
    // symmetrize away round-off so the solver sees an exactly Hermitian input
    let sym = (h + h.adjoint()) * re(0.5);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..h.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = OperatorMatrix::zeros(h.nrows(), h.ncols());
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

/// `exp(z·H)` for Hermitian `H`, through its eigen-decomposition.
pub fn hermitian_exponential_factor(h: &OperatorMatrix, z: C64) -> Result<OperatorMatrix> {
    let (values, vectors) = hermitian_eigen(h)?;
    Ok(spectral_function(&values, &vectors, |e| (z * e).exp()))
}

/// `V f(Λ) V†`.
pub fn spectral_function(
    values: &[f64],
    vectors: &OperatorMatrix,
    f: impl Fn(f64) -> C64,
) -> OperatorMatrix {
    let mut scaled = vectors.clone();
    for (k, &e) in values.iter().enumerate() {
        let fk = f(e);
        scaled.column_mut(k).iter_mut().for_each(|x| *x *= fk);
    }
    scaled * vectors.adjoint()
}

/// Smallest eigenvalue of the Hermitian part of `m`.
pub fn min_eigenvalue(m: &OperatorMatrix) -> f64 {
    let sym = (m + m.adjoint()) * re(0.5);
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Spectral-norm bound via the Frobenius norm.
pub fn norm_bound(m: &OperatorMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}


#[cfg(test)]
mod tests {
    use super::testing::*;
    use super::*;
    use proptest::prelude::*;

    fn close(a: &DMatrix<C64>, b: &DMatrix<C64>, tol: f64) -> bool {
        a.shape() == b.shape() && max_abs(&(a - b)) <= tol
    }

    #[test]
    fn kron_of_identities() {
        assert_eq!(kron(&identity(2), &identity(2)), identity(4));
    }

    #[test]
    fn kron_flips_first_qubit_only() {
        let op = kron(&sigma_x(), &identity(2));
        let mut ket = DVector::<C64>::zeros(4);
        ket[0] = re(1.0); // |0>|0>
        let out = op * ket;
        // |1>|0> sits at index 2 in the standard layout
        assert_eq!(out[2], re(1.0));
        assert_eq!(out.iter().filter(|z| z.norm() > 0.0).count(), 1);
    }

    #[test]
    fn vectorize_stacks_columns() {
        let v = vectorize(&identity(2));
        assert_eq!(v.as_slice(), &[re(1.0), re(0.0), re(0.0), re(1.0)]);
        let m = OperatorMatrix::from_row_slice(2, 2, &[re(1.0), re(2.0), re(3.0), re(4.0)]);
        assert_eq!(vectorize(&m).as_slice(), &[re(1.0), re(3.0), re(2.0), re(4.0)]);
    }

    #[test]
    fn devectorize_rejects_non_square_length() {
        let v = StateVector::zeros(5);
        assert!(matches!(devectorize(&v), Err(FcsError::DimensionMismatch { .. })));
    }

    #[test]
    fn sandwich_of_identities_is_identity() {
        assert_eq!(sandwich_superop(&identity(3), &identity(3)).unwrap(), identity(9));
    }

    #[test]
    fn sandwich_dimension_mismatch() {
        assert!(sandwich_superop(&identity(2), &identity(3)).is_err());
    }

    #[test]
    fn lowering_sandwich_moves_upper_to_lower_projector() {
        let upper = OperatorMatrix::from_row_slice(2, 2, &[re(1.0), re(0.0), re(0.0), re(0.0)]);
        let lower = OperatorMatrix::from_row_slice(2, 2, &[re(0.0), re(0.0), re(0.0), re(1.0)]);
        let sup = sandwich_superop(&sigma_minus(), &sigma_plus()).unwrap();
        let out = devectorize(&(sup * vectorize(&upper))).unwrap();
        assert!(close(&out, &lower, 0.0));
    }

    #[test]
    fn exponential_at_zero_is_identity() {
        let h = sigma_x() + sigma_z() * re(0.3);
        let e = hermitian_exponential_factor(&h, re(0.0)).unwrap();
        assert!(close(&e, &identity(2), 1e-14));
    }

    #[test]
    fn exponential_of_diagonal() {
        let h = sigma_z() * re(0.5);
        let e = hermitian_exponential_factor(&h, c(0.0, std::f64::consts::PI)).unwrap();
        let half_pi = std::f64::consts::FRAC_PI_2;
        let expected = OperatorMatrix::from_row_slice(
            2,
            2,
            &[c(0.0, half_pi).exp(), re(0.0), re(0.0), c(0.0, -half_pi).exp()],
        );
        assert!(close(&e, &expected, 1e-14));
    }

    #[test]
    fn exponential_rejects_non_hermitian() {
        let err = hermitian_exponential_factor(&sigma_minus(), re(1.0)).unwrap_err();
        assert!(matches!(err, FcsError::NotHermitian { .. }));
    }

    #[test]
    fn annihilation_ladder() {
        let a = annihilation(5);
        let n = a.adjoint() * &a;
        for k in 0..5 {
            assert!((n[(k, k)] - re(k as f64)).norm() < 1e-14);
        }
        let comm = &a * a.adjoint() - a.adjoint() * &a;
        for k in 0..4 {
            assert!((comm[(k, k)] - re(1.0)).norm() < 1e-14);
        }
    }

    proptest! {
        #[test]
        fn mixed_product_identity(a in complex_matrix(2), b in complex_matrix(2),
                                  c_ in complex_matrix(2), d in complex_matrix(2)) {
            let lhs = kron(&a, &b) * kron(&c_, &d);
            // direct oracle: entry-wise definition of the tensor product of the products
            let ac = &a * &c_;
            let bd = &b * &d;
            let mut rhs = OperatorMatrix::zeros(4, 4);
            for i in 0..2 { for j in 0..2 { for k in 0..2 { for l in 0..2 {
                rhs[(2 * i + k, 2 * j + l)] = ac[(i, j)] * bd[(k, l)];
            }}}}
            prop_assert!(close(&lhs, &rhs, 1e-12));
        }

        #[test]
        fn kron_associative(a in complex_matrix(2), b in complex_matrix(3), c_ in complex_matrix(2)) {
            let l = kron(&kron(&a, &b), &c_);
            let r = kron(&a, &kron(&b, &c_));
            prop_assert!(close(&l, &r, 1e-12));
        }

        #[test]
        fn vectorize_round_trip(m in complex_matrix(3)) {
            prop_assert_eq!(devectorize(&vectorize(&m)).unwrap(), m);
        }

        #[test]
        fn sandwich_matches_direct_product(a in complex_matrix(2), b in complex_matrix(2),
                                           rho in complex_matrix(2)) {
            let via_super = sandwich_superop(&a, &b).unwrap() * vectorize(&rho);
            let direct = vectorize(&(&a * &rho * &b));
            prop_assert!((via_super - direct).camax() < 1e-12);
        }

        #[test]
        fn sandwich_trace_is_expectation(s in complex_matrix(2), rho in density_matrix(2)) {
            let sup = sandwich_superop(&s, &s.adjoint()).unwrap();
            let out = devectorize(&(sup * vectorize(&rho))).unwrap();
            let expectation = trace(&(s.adjoint() * &s * &rho));
            prop_assert!((trace(&out) - expectation).norm() < 1e-12);
        }

        #[test]
        fn trace_two_routes(m in complex_matrix(3), n in complex_matrix(3), rho in complex_matrix(3)) {
            let sup = sandwich_superop(&m, &n).unwrap();
            let via_super = trace_functional(3).transpose() * (sup * vectorize(&rho));
            let via_matrix = trace(&(&m * &rho * &n));
            prop_assert!((via_super[(0, 0)] - via_matrix).norm() < 1e-10);
        }

        #[test]
        fn exponential_inverse_pair(h in hermitian_matrix(3)) {
            let z = c(0.0, 0.3);
            let p = hermitian_exponential_factor(&h, z).unwrap();
            let q = hermitian_exponential_factor(&h, -z).unwrap();
            prop_assert!(close(&(p * q), &identity(3), 1e-12));
        }

        #[test]
        fn commutator_superop_matches_matrix_route(h in hermitian_matrix(2), rho in complex_matrix(2)) {
            let via_super = devectorize(&(commutator_superop(&h) * vectorize(&rho))).unwrap();
            let direct = &h * &rho - &rho * &h;
            prop_assert!(close(&via_super, &direct, 1e-12));
        }
    }
}
