//! Forward operators, interferometric data, noise and the polarization
//! converter.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::graphs::MeasurementGraph;
use crate::numerics::{edge_norms, CMatrix, EdgeNorms};
use crate::scalar::Real;

/// Sparse Hermitian values indexed by unordered pairs. The value at
/// `(j, i)` is the conjugate of the stored value at `(i, j)`, `i <= j`.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeData<T> {
    n: usize,
    includes_diagonal: bool,
    entries: BTreeMap<(usize, usize), Complex<T>>,
}

impl<T: Real> EdgeData<T> {
    pub fn new(n: usize, includes_diagonal: bool) -> Self {
        Self {
            n,
            includes_diagonal,
            entries: BTreeMap::new(),
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn includes_diagonal(&self) -> bool {
        self.includes_diagonal
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Stores `v` at `(i, j)`, i.e. `conj(v)` at `(j, i)`. Diagonal values
    /// keep only their real part.
    pub fn insert(&mut self, i: usize, j: usize, v: Complex<T>) -> Result<()> {
        if i >= self.n || j >= self.n {
            return Err(Error::invalid(format!(
                "index ({i}, {j}) out of range for n = {}",
                self.n
            )));
        }
        if i == j && !self.includes_diagonal {
            return Err(Error::invalid(format!(
                "diagonal entry ({i}, {i}) in data without diagonal"
            )));
        }
        let (key, val) = match i.cmp(&j) {
            std::cmp::Ordering::Less => ((i, j), v),
            std::cmp::Ordering::Greater => ((j, i), v.conj()),
            std::cmp::Ordering::Equal => ((i, i), Complex::new(v.re, T::zero())),
        };
        self.entries.insert(key, val);
        Ok(())
    }

    pub fn get(&self, i: usize, j: usize) -> Option<Complex<T>> {
        if i <= j {
            self.entries.get(&(i, j)).copied()
        } else {
            self.entries.get(&(j, i)).map(|v| v.conj())
        }
    }

    /// Stored entries `(i, j, value)` with `i <= j`, in index order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, Complex<T>)> + '_ {
        self.entries.iter().map(|(&(i, j), &v)| (i, j, v))
    }

    /// Dense Hermitian matrix with the stored values and zeros elsewhere.
    pub fn to_hermitian_matrix(&self) -> CMatrix<T> {
        let mut h = CMatrix::zeros(self.n, self.n);
        for (i, j, v) in self.iter() {
            h[(i, j)] = v;
            h[(j, i)] = v.conj();
        }
        h
    }

    /// Entrywise sum; both operands must cover the same index set.
    pub fn try_add(&self, other: &Self) -> Result<Self> {
        if self.n != other.n || self.entries.len() != other.entries.len() {
            return Err(Error::invalid("edge data index sets differ"));
        }
        let mut out = self.clone();
        out.includes_diagonal |= other.includes_diagonal;
        for (key, v) in out.entries.iter_mut() {
            let w = other
                .entries
                .get(key)
                .ok_or_else(|| Error::invalid("edge data index sets differ"))?;
            *v += w;
        }
        Ok(out)
    }

    pub fn scale(&self, c: T) -> Self {
        let mut out = self.clone();
        out.entries.values_mut().for_each(|v| *v *= c);
        out
    }

    /// Conjugation by a diagonal phase field: `B_ij -> p_i B_ij conj(p_j)`.
    pub fn rephase(&self, phases: &[Complex<T>]) -> Result<Self> {
        if phases.len() != self.n {
            return Err(Error::invalid("phase vector length mismatch"));
        }
        let mut out = self.clone();
        for (&(i, j), v) in out.entries.iter_mut() {
            *v = phases[i] * *v * phases[j].conj();
        }
        Ok(out)
    }

    /// Text form: header `n m diag=0|1`, then one `i j re im` row per stored
    /// entry with `i <= j`.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{} {} diag={}\n",
            self.n,
            self.entries.len(),
            u8::from(self.includes_diagonal)
        );
        for (i, j, v) in self.iter() {
            let _ = writeln!(s, "{i} {j} {} {}", v.re, v.im);
        }
        s
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let perr = |line, message: String| Error::Parse { line, message };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(k, l)| (k + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (hl, header) = lines.next().ok_or_else(|| perr(1, "missing header".into()))?;
        let head: Vec<&str> = header.split_whitespace().collect();
        if head.len() != 3 {
            return Err(perr(hl, "expected header `n m diag=0|1`".into()));
        }
        let n: usize = head[0]
            .parse()
            .map_err(|_| perr(hl, format!("bad n: {:?}", head[0])))?;
        let m: usize = head[1]
            .parse()
            .map_err(|_| perr(hl, format!("bad m: {:?}", head[1])))?;
        let diag = match head[2] {
            "diag=0" => false,
            "diag=1" => true,
            other => return Err(perr(hl, format!("bad diag flag: {other:?}"))),
        };
        let mut data = Self::new(n, diag);
        let mut count = 0;
        for (line, l) in lines {
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() != 4 {
                return Err(perr(line, format!("expected 4 fields, found {}", f.len())));
            }
            let i: usize = f[0].parse().map_err(|_| perr(line, format!("bad index {:?}", f[0])))?;
            let j: usize = f[1].parse().map_err(|_| perr(line, format!("bad index {:?}", f[1])))?;
            let re: f64 = f[2].parse().map_err(|_| perr(line, format!("bad number {:?}", f[2])))?;
            let im: f64 = f[3].parse().map_err(|_| perr(line, format!("bad number {:?}", f[3])))?;
            if i > j {
                return Err(perr(line, format!("expected i <= j, got {i} {j}")));
            }
            data.insert(i, j, Complex::new(T::lit(re), T::lit(im)))
                .map_err(|e| perr(line, e.to_string()))?;
            count += 1;
        }
        if count != m || data.len() != m {
            return Err(perr(hl, format!("header declares {m} entries, found {count}")));
        }
        Ok(data)
    }
}

/// Dense left-invertible `m x n` operator with its thin SVD
/// `A = U diag(s) V*`.
#[derive(Clone, Debug)]
pub struct ForwardOperator<T> {
    matrix: CMatrix<T>,
    u: CMatrix<T>,
    s: Vec<T>,
    v: CMatrix<T>,
    kappa: T,
}

impl<T: Real> ForwardOperator<T> {
    /// Fails unless `m >= n` and the smallest singular value is positive.
    pub fn from_matrix(matrix: CMatrix<T>) -> Result<Self> {
        let (m, n) = (matrix.rows(), matrix.cols());
        if n == 0 || m < n {
            return Err(Error::invalid(format!(
                "forward operator must be tall with n >= 1, got {m}x{n}"
            )));
        }
        let (u, s, v) = T::thin_svd(&matrix);
        let smin = s[n - 1];
        if !(smin > T::zero()) {
            return Err(Error::invalid("forward operator is not left-invertible"));
        }
        let kappa = s[0] / smin;
        Ok(Self {
            matrix,
            u,
            s,
            v,
            kappa,
        })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::from_matrix(CMatrix::identity(n))
    }

    #[inline]
    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.matrix.rows()
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.matrix.cols()
    }

    #[inline]
    pub fn kappa(&self) -> T {
        self.kappa
    }

    /// Singular values, non-increasing.
    pub fn singular_values(&self) -> &[T] {
        &self.s
    }

    /// Spectral norm.
    pub fn norm(&self) -> T {
        self.s[0]
    }

    /// Orthonormal basis of the range (left singular vectors), `m x n`.
    pub fn range_basis(&self) -> &CMatrix<T> {
        &self.u
    }

    pub fn right_singular_vectors(&self) -> &CMatrix<T> {
        &self.v
    }

    pub fn apply(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        self.matrix.mul_vec(x)
    }

    /// `A^+ y = V diag(1/s) U* y`.
    pub fn pinv_apply(&self, y: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut c = self.u.adjoint().mul_vec(y);
        for (ck, &sk) in c.iter_mut().zip(&self.s) {
            *ck /= sk;
        }
        self.v.mul_vec(&c)
    }

    /// Dense pseudo-inverse, `n x m`.
    pub fn pinv(&self) -> CMatrix<T> {
        let vs = CMatrix::from_fn(self.n(), self.n(), |i, j| self.v[(i, j)] / self.s[j]);
        vs.matmul(&self.u.adjoint())
    }
}

fn gaussian<T: Real>(rng: &mut impl Rng) -> T {
    T::lit(rng.sample::<f64, _>(StandardNormal))
}

/// Haar-like random matrix with orthonormal columns.
fn random_orthonormal<T: Real>(rows: usize, cols: usize, rng: &mut impl Rng) -> CMatrix<T> {
    let half = T::lit(0.5).sqrt();
    let g = CMatrix::from_fn(rows, cols, |_, _| {
        Complex::new(gaussian::<T>(rng), gaussian::<T>(rng)) * half
    });
    let (mut q, r) = T::thin_qr(&g);
    // fix the column phases so the distribution does not depend on the QR sign convention
    for j in 0..cols {
        let d = r[(j, j)];
        let ph = if d.is_zero() {
            Complex::new(T::one(), T::zero())
        } else {
            d / d.norm()
        };
        for i in 0..rows {
            q[(i, j)] *= ph;
        }
    }
    q
}

/// Random `m x n` operator with singular values geometrically spaced from
/// 1 down to `1/kappa_target`.
pub fn make_operator<T: Real>(m: usize, n: usize, kappa_target: T, seed: u64) -> Result<ForwardOperator<T>> {
    if n == 0 || m < n {
        return Err(Error::invalid(format!("need m >= n >= 1, got m = {m}, n = {n}")));
    }
    if !(kappa_target >= T::one()) || !kappa_target.is_finite() {
        return Err(Error::invalid(format!("kappa must be finite and >= 1, got {kappa_target}")));
    }
    if n == 1 && kappa_target != T::one() {
        return Err(Error::invalid("a single column has condition number 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = random_orthonormal::<T>(m, n, &mut rng);
    let v = random_orthonormal::<T>(n, n, &mut rng);
    let s: Vec<T> = (0..n)
        .map(|k| {
            if n == 1 {
                T::one()
            } else {
                kappa_target.powf(-T::lit(k as f64 / (n - 1) as f64))
            }
        })
        .collect();
    let us = CMatrix::from_fn(m, n, |i, j| u[(i, j)] * s[j]);
    ForwardOperator::from_matrix(us.matmul(&v.adjoint()))
}

/// Entries `e^{i theta}` with `theta` uniform on `[0, 2pi)`.
pub fn unit_modulus_signal<T: Real>(n: usize, seed: u64) -> Vec<Complex<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let theta = rng.random::<f64>() * std::f64::consts::TAU;
            Complex::new(T::lit(theta.cos()), T::lit(theta.sin()))
        })
        .collect()
}

/// Clean data `b_i conj(b_j)` with `b = A x0` (or `b = x0` when `op` is
/// `None`) on the edges of `g`, plus `|b_i|^2` on the diagonal when asked.
pub fn synthesize_clean<T: Real>(
    op: Option<&ForwardOperator<T>>,
    x0: &[Complex<T>],
    g: &MeasurementGraph,
    include_diagonal: bool,
) -> Result<EdgeData<T>> {
    let b = match op {
        Some(a) => {
            if a.n() != x0.len() {
                return Err(Error::invalid(format!(
                    "operator has {} columns, signal has length {}",
                    a.n(),
                    x0.len()
                )));
            }
            a.apply(x0)
        }
        None => {
            if include_diagonal {
                return Err(Error::invalid(
                    "the phase problem carries no diagonal measurements",
                ));
            }
            x0.to_vec()
        }
    };
    if b.len() != g.n() {
        return Err(Error::invalid(format!(
            "measurement vector has length {}, graph has {} nodes",
            b.len(),
            g.n()
        )));
    }
    let mut data = EdgeData::new(g.n(), include_diagonal);
    for &(i, j) in g.edges() {
        data.insert(i, j, b[i] * b[j].conj())?;
    }
    if include_diagonal {
        for (k, bk) in b.iter().enumerate() {
            data.insert(k, k, Complex::new(bk.norm_sqr(), T::zero()))?;
        }
    }
    Ok(data)
}

/// Hermitian noise on the edges of a graph.
#[derive(Clone, Debug)]
pub struct NoiseRealization<T> {
    pub data: EdgeData<T>,
    pub norms: EdgeNorms<T>,
    pub eta: T,
}

/// Circular complex Gaussian noise of standard deviation `eta` per unordered
/// pair, made Hermitian by construction. Diagonal draws keep their real
/// part.
///
/// The draws for the full upper triangle are generated in a fixed order and
/// then restricted to the graph, so two graphs on the same node set share
/// the noise on their common edges.
pub fn hermitian_gaussian_noise<T: Real>(
    g: &MeasurementGraph,
    eta: T,
    seed: u64,
    include_diagonal: bool,
) -> Result<NoiseRealization<T>> {
    if !(eta >= T::zero()) || !eta.is_finite() {
        return Err(Error::invalid(format!("noise level must be finite and >= 0, got {eta}")));
    }
    let n = g.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = eta * T::lit(0.5).sqrt();
    let mut upper = vec![Complex::zero(); n * (n + 1) / 2];
    for z in upper.iter_mut() {
        let re = gaussian::<T>(&mut rng);
        let im = gaussian::<T>(&mut rng);
        *z = Complex::new(re, im) * scale;
    }
    // row-major packed upper triangle including the diagonal
    let at = |i: usize, j: usize| upper[i * n - i * (i + 1) / 2 + j];
    let mut data = EdgeData::new(n, include_diagonal);
    for &(i, j) in g.edges() {
        data.insert(i, j, at(i, j))?;
    }
    if include_diagonal {
        for k in 0..n {
            data.insert(k, k, at(k, k))?;
        }
    }
    let norms = edge_norms(&data, g, include_diagonal)?;
    Ok(NoiseRealization { data, norms, eta })
}

/// The four intensities `|f_i + i^k f_j|^2`, `k = 1..4`.
pub fn intensity_quadruple<T: Real>(fi: Complex<T>, fj: Complex<T>) -> [T; 4] {
    let i = Complex::new(T::zero(), T::one());
    let mut p = Complex::new(T::one(), T::zero());
    let mut q = [T::zero(); 4];
    for qk in q.iter_mut() {
        p *= i;
        *qk = (fi + p * fj).norm_sqr();
    }
    q
}

/// Recovers `f_i conj(f_j) = 1/4 sum_k e^{i pi k/2} q_k` for every listed
/// pair. Pairs with `i == j` become diagonal entries.
pub fn polarization_products<T: Real>(
    n: usize,
    quadruples: &[((usize, usize), [T; 4])],
) -> Result<EdgeData<T>> {
    let has_diag = quadruples.iter().any(|&((i, j), _)| i == j);
    let mut data = EdgeData::new(n, has_diag);
    let quarter = T::lit(0.25);
    for &((i, j), q) in quadruples {
        if let Some(k) = q.iter().position(|&v| !(v >= T::zero())) {
            return Err(Error::invalid(format!(
                "intensity q_{} for pair ({i}, {j}) is negative",
                k + 1
            )));
        }
        // e^{i pi k/2} for k = 1..4 is i, -1, -i, 1. The conjugate weights
        // would return conj(f_i) f_j.
        let re = q[3] - q[1];
        let im = q[0] - q[2];
        data.insert(i, j, Complex::new(re, im) * quarter)?;
    }
    Ok(data)
}
