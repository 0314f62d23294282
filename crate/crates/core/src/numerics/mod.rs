//! Dense Hermitian linear algebra and the small proximal/metric helpers the
//! recovery algorithms are built from.

mod matrix;

pub use matrix::CMatrix;

use num_complex::Complex;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::graphs::MeasurementGraph;
use crate::model::EdgeData;
use crate::scalar::Real;

/// Relative gap below which the top two eigenvalues count as degenerate.
pub const DEGENERATE_GAP_REL: f64 = 1e-8;

/// Full spectral decomposition of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermitianEigen<T> {
    /// Ascending.
    pub values: Vec<T>,
    /// Orthonormal eigenvectors, one per column, matching `values`.
    pub vectors: CMatrix<T>,
}

impl<T: Real> HermitianEigen<T> {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, k: usize) -> Vec<Complex<T>> {
        self.vectors.column(k)
    }

    /// `sum_k f(lambda_k) v_k v_k*`, skipping terms where `f` returns zero.
    pub fn reconstruct_with(&self, f: impl Fn(T) -> T) -> CMatrix<T> {
        let n = self.vectors.rows();
        let kept: Vec<(usize, T)> = self
            .values
            .iter()
            .enumerate()
            .map(|(k, &l)| (k, f(l)))
            .filter(|(_, w)| !w.is_zero())
            .collect();
        if kept.is_empty() {
            return CMatrix::zeros(n, n);
        }
        let basis = CMatrix::from_fn(n, kept.len(), |i, c| self.vectors[(i, kept[c].0)]);
        let weights: Vec<T> = kept.iter().map(|&(_, w)| w).collect();
        let mut out = basis.weighted_gram(&weights);
        out.make_hermitian_from_lower();
        out
    }

    pub fn reconstruct(&self) -> CMatrix<T> {
        self.reconstruct_with(|l| l)
    }
}

/// Eigenpair with a unit-norm eigenvector.
#[derive(Clone, Debug)]
pub struct EigenPair<T> {
    pub value: T,
    pub vector: Vec<Complex<T>>,
    /// Set when the neighbouring eigenvalue is within
    /// [`DEGENERATE_GAP_REL`] of this one, so the vector is not well defined.
    pub degenerate: bool,
}

fn check_hermitian<T: Real>(h: &CMatrix<T>) -> Result<()> {
    if !h.is_square() {
        return Err(Error::invalid(format!(
            "expected a square matrix, got {}x{}",
            h.rows(),
            h.cols()
        )));
    }
    let scale = h.max_abs().max(T::one());
    let defect = h.hermitian_defect();
    if defect > T::lit(T::HERMITIAN_TOL) * scale {
        return Err(Error::invalid(format!(
            "matrix is not Hermitian (defect {:e})",
            defect
        )));
    }
    Ok(())
}

/// Validated Hermitian eigendecomposition with ascending eigenvalues.
pub fn hermitian_eigendecomposition<T: Real>(h: &CMatrix<T>) -> Result<HermitianEigen<T>> {
    check_hermitian(h)?;
    Ok(eigh_unchecked(h))
}

pub(crate) fn eigh_unchecked<T: Real>(h: &CMatrix<T>) -> HermitianEigen<T> {
    let (values, vectors) = T::eigh(h);
    HermitianEigen { values, vectors }
}

/// Ascending eigenvalues of a Hermitian matrix, validated.
pub fn hermitian_eigenvalues<T: Real>(h: &CMatrix<T>) -> Result<Vec<T>> {
    check_hermitian(h)?;
    Ok(T::eigvalsh(h))
}

fn degenerate_pair<T: Real>(a: T, b: T, scale: T) -> bool {
    (a - b).abs() <= T::lit(DEGENERATE_GAP_REL) * scale.max(T::min_positive_value())
}

fn pair_from<T: Real>(eig: &HermitianEigen<T>, k: usize, neighbour: Option<usize>) -> EigenPair<T> {
    let scale = eig
        .values
        .iter()
        .fold(T::zero(), |m, v| m.max(v.abs()));
    let degenerate = neighbour
        .map(|j| degenerate_pair(eig.values[k], eig.values[j], scale))
        .unwrap_or(false);
    let mut vector = eig.vector(k);
    let norm = vec_norm(&vector);
    if norm > T::zero() {
        vector.iter_mut().for_each(|v| *v /= norm);
    }
    EigenPair {
        value: eig.values[k],
        vector,
        degenerate,
    }
}

/// Largest eigenvalue and its unit eigenvector. The lower triangle of `h` is
/// taken as authoritative.
pub fn top_eigenpair<T: Real>(h: &CMatrix<T>) -> EigenPair<T> {
    let eig = eigh_unchecked(h);
    top_of(&eig)
}

pub(crate) fn top_of<T: Real>(eig: &HermitianEigen<T>) -> EigenPair<T> {
    let n = eig.dim();
    assert!(n > 0, "empty matrix has no eigenpair");
    pair_from(eig, n - 1, n.checked_sub(2))
}

/// Smallest eigenvalue and its unit eigenvector; `degenerate` compares
/// against the second-smallest.
pub fn bottom_eigenpair<T: Real>(h: &CMatrix<T>) -> EigenPair<T> {
    let eig = eigh_unchecked(h);
    assert!(eig.dim() > 0, "empty matrix has no eigenpair");
    pair_from(&eig, 0, (eig.dim() > 1).then_some(1))
}

/// Spectral norm of a Hermitian matrix.
pub fn hermitian_spectral_norm<T: Real>(h: &CMatrix<T>) -> T {
    if h.rows() == 0 {
        return T::zero();
    }
    let v = T::eigvalsh(h);
    v[0].abs().max(v[v.len() - 1].abs())
}

/// Frobenius-nearest positive semidefinite matrix: negative eigenvalues are
/// clipped to zero.
pub fn psd_project<T: Real>(h: &CMatrix<T>) -> CMatrix<T> {
    eigh_unchecked(h).reconstruct_with(|l| l.max(T::zero()))
}

/// `z * max(1 - tau/|z|, 0)`: shrinks the modulus by `tau` and keeps the
/// phase.
#[inline]
pub fn complex_soft_threshold<T: Real>(z: Complex<T>, tau: T) -> Complex<T> {
    let r = z.norm();
    if r <= tau || r.is_zero() {
        Complex::zero()
    } else {
        z * ((r - tau) / r)
    }
}

pub fn vec_norm<T: Real>(x: &[Complex<T>]) -> T {
    x.iter().map(|v| v.norm_sqr()).sum::<T>().sqrt()
}

/// `<a, b> = sum conj(a_i) b_i`.
pub fn inner<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Distance after removing the global phase ambiguity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlignedDistance<T> {
    /// `min_a ||x - e^{ia} x0||`.
    pub distance: T,
    /// Minimizing phase in `[0, 2pi)`.
    pub alpha: T,
}

/// `min_a ||x - e^{ia} x0||` together with the minimizing `a`, which is the
/// phase of `<x0, x>` (zero when the inner product vanishes).
pub fn phase_aligned_distance<T: Real>(x: &[Complex<T>], x0: &[Complex<T>]) -> Result<AlignedDistance<T>> {
    if x.len() != x0.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} vs {}",
            x.len(),
            x0.len()
        )));
    }
    let ip = inner(x0, x);
    let alpha = if ip.is_zero() {
        T::zero()
    } else {
        let a = ip.arg();
        if a < T::zero() {
            a + T::TAU()
        } else {
            a
        }
    };
    let rot = Complex::from_polar(T::one(), alpha);
    // Direct evaluation avoids the cancellation in the closed form.
    let distance = x
        .iter()
        .zip(x0)
        .map(|(&a, &b)| (a - rot * b).norm_sqr())
        .sum::<T>()
        .sqrt();
    let alpha = if alpha >= T::TAU() { T::zero() } else { alpha };
    Ok(AlignedDistance { distance, alpha })
}

/// Norms of edge-indexed values.
///
/// `l1` counts every unordered pair once. `l1_symmetric` sums over ordered
/// pairs (each off-diagonal value twice, diagonal values once), which is the
/// convention the stability bounds are proved in.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeNorms<T> {
    pub l1: T,
    pub l1_symmetric: T,
    pub linf: T,
    pub spectral: T,
}

impl<T: Real> EdgeNorms<T> {
    pub fn zero() -> Self {
        Self {
            l1: T::zero(),
            l1_symmetric: T::zero(),
            linf: T::zero(),
            spectral: T::zero(),
        }
    }
}

/// Norms of `values` over the edges of `graph`, plus the diagonal when
/// `include_diagonal` is set. Every index in that set must be present.
pub fn edge_norms<T: Real>(
    values: &EdgeData<T>,
    graph: &MeasurementGraph,
    include_diagonal: bool,
) -> Result<EdgeNorms<T>> {
    let n = graph.n();
    if values.n() != n {
        return Err(Error::invalid(format!(
            "edge data dimension {} does not match graph size {}",
            values.n(),
            n
        )));
    }
    let mut l1 = T::zero();
    let mut l1_symmetric = T::zero();
    let mut linf = T::zero();
    let mut embedding = CMatrix::zeros(n, n);
    let two = T::lit(2.0);
    for &(i, j) in graph.edges() {
        let v = values
            .get(i, j)
            .ok_or_else(|| Error::invalid(format!("missing value on edge ({i}, {j})")))?;
        let a = v.norm();
        l1 += a;
        l1_symmetric += two * a;
        linf = linf.max(a);
        embedding[(i, j)] = v;
        embedding[(j, i)] = v.conj();
    }
    if include_diagonal {
        for i in 0..n {
            let v = values
                .get(i, i)
                .ok_or_else(|| Error::invalid(format!("missing diagonal value at {i}")))?;
            let a = v.norm();
            l1 += a;
            l1_symmetric += a;
            linf = linf.max(a);
            embedding[(i, i)] = Complex::new(v.re, T::zero());
        }
    }
    Ok(EdgeNorms {
        l1,
        l1_symmetric,
        linf,
        spectral: hermitian_spectral_norm(&embedding),
    })
}
