//! Scalar abstraction shared by every module.
//!
//! All of the math is written against [`Real`], which is implemented for
//! `f32` and `f64`. Dense factorizations (Hermitian eigensolves, SVD, QR and
//! matrix products) are delegated to `faer` through the trait so the rest of
//! the crate never names a backend type.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use faer::{MatRef, Side};
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

use crate::numerics::CMatrix;

/// Real floating point scalar (`f32` or `f64`).
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Relative tolerance used when validating Hermitian inputs.
    const HERMITIAN_TOL: f64;

    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Eigendecomposition of a Hermitian matrix: eigenvalues ascending and
    /// the matching orthonormal eigenvectors as columns. Only the lower
    /// triangle is read.
    fn eigh(h: &CMatrix<Self>) -> (Vec<Self>, CMatrix<Self>);

    /// Eigenvalues only, ascending.
    fn eigvalsh(h: &CMatrix<Self>) -> Vec<Self>;

    /// Dense product `a * b`.
    fn gemm(a: &CMatrix<Self>, b: &CMatrix<Self>) -> CMatrix<Self>;

    /// Thin SVD `a = U diag(s) V*` with `s` non-increasing.
    fn thin_svd(a: &CMatrix<Self>) -> (CMatrix<Self>, Vec<Self>, CMatrix<Self>);

    /// Thin QR `a = Q R`.
    fn thin_qr(a: &CMatrix<Self>) -> (CMatrix<Self>, CMatrix<Self>);
}

macro_rules! impl_real {
    ($t:ty, $tol:expr) => {
        impl Real for $t {
            const HERMITIAN_TOL: f64 = $tol;

            fn eigh(h: &CMatrix<Self>) -> (Vec<Self>, CMatrix<Self>) {
                let n = h.rows();
                if n == 0 {
                    return (Vec::new(), CMatrix::zeros(0, 0));
                }
                let m = MatRef::from_column_major_slice(h.as_slice(), n, n);
                let evd = m
                    .self_adjoint_eigen(Side::Lower)
                    .expect("self-adjoint eigendecomposition failed to converge");
                let s = evd.S().column_vector();
                let values: Vec<$t> = (0..n).map(|i| s[i].re).collect();
                let u = evd.U();
                let vectors = CMatrix::from_fn(n, n, |i, j| u[(i, j)]);
                (values, vectors)
            }

            fn eigvalsh(h: &CMatrix<Self>) -> Vec<Self> {
                let n = h.rows();
                if n == 0 {
                    return Vec::new();
                }
                let m = MatRef::from_column_major_slice(h.as_slice(), n, n);
                let mut values = m
                    .self_adjoint_eigenvalues(Side::Lower)
                    .expect("self-adjoint eigenvalues failed to converge");
                values.sort_by(|a, b| a.total_cmp(b));
                values
            }

            fn gemm(a: &CMatrix<Self>, b: &CMatrix<Self>) -> CMatrix<Self> {
                assert_eq!(a.cols(), b.rows(), "inner dimensions must agree");
                if a.rows() == 0 || b.cols() == 0 || a.cols() == 0 {
                    return CMatrix::zeros(a.rows(), b.cols());
                }
                let ma = MatRef::from_column_major_slice(a.as_slice(), a.rows(), a.cols());
                let mb = MatRef::from_column_major_slice(b.as_slice(), b.rows(), b.cols());
                let p = ma * mb;
                CMatrix::from_fn(a.rows(), b.cols(), |i, j| p[(i, j)])
            }

            fn thin_svd(a: &CMatrix<Self>) -> (CMatrix<Self>, Vec<Self>, CMatrix<Self>) {
                let ma = MatRef::from_column_major_slice(a.as_slice(), a.rows(), a.cols());
                let svd = ma.thin_svd().expect("svd failed to converge");
                let k = a.rows().min(a.cols());
                let s = svd.S().column_vector();
                let sv: Vec<$t> = (0..k).map(|i| s[i].re).collect();
                let (u, v) = (svd.U(), svd.V());
                (
                    CMatrix::from_fn(a.rows(), k, |i, j| u[(i, j)]),
                    sv,
                    CMatrix::from_fn(a.cols(), k, |i, j| v[(i, j)]),
                )
            }

            fn thin_qr(a: &CMatrix<Self>) -> (CMatrix<Self>, CMatrix<Self>) {
                let ma = MatRef::from_column_major_slice(a.as_slice(), a.rows(), a.cols());
                let qr = ma.qr();
                let q = qr.compute_thin_Q();
                let r = qr.thin_R();
                (
                    CMatrix::from_fn(q.nrows(), q.ncols(), |i, j| q[(i, j)]),
                    CMatrix::from_fn(r.nrows(), r.ncols(), |i, j| r[(i, j)]),
                )
            }
        }
    };
}

impl_real!(f64, 1e-12);
impl_real!(f32, 1e-5);
