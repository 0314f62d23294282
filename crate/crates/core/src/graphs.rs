//! Measurement graphs, the random ensembles used in experiments, and the
//! Laplacian variants whose spectral gap controls recovery stability.

use std::fmt::Write as _;

use num_complex::Complex;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::EdgeData;
use crate::numerics::{hermitian_eigenvalues, CMatrix};
use crate::scalar::Real;

/// Threshold on λ2 above which a graph counts as connected.
pub const CONNECTED_GAP_TOL: f64 = 1e-10;

/// Default resampling budget for [`erdos_renyi_connected`].
pub const DEFAULT_MAX_ATTEMPTS: usize = 1000;

/// Undirected simple graph on `0..n`, stored as a sorted list of pairs
/// `(i, j)` with `i < j`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MeasurementGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl MeasurementGraph {
    /// Normalizes each pair to `i < j` and drops duplicates. Self-loops and
    /// out-of-range indices are rejected.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("graph must have at least one node"));
        }
        let mut list = Vec::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::invalid(format!("self-loop at node {a}")));
            }
            if a >= n || b >= n {
                return Err(Error::invalid(format!(
                    "edge ({a}, {b}) out of range for n = {n}"
                )));
            }
            list.push((a.min(b), a.max(b)));
        }
        list.sort_unstable();
        list.dedup();
        Ok(Self { n, edges: list })
    }

    /// Graph with no edges.
    pub fn empty(n: usize) -> Result<Self> {
        Self::new(n, [])
    }

    pub fn complete(n: usize) -> Result<Self> {
        Self::new(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))))
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    #[inline]
    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn contains_edge(&self, i: usize, j: usize) -> bool {
        self.edges.binary_search(&(i.min(j), i.max(j))).is_ok()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n];
        for &(i, j) in &self.edges {
            d[i] += 1;
            d[j] += 1;
        }
        d
    }

    pub fn max_degree(&self) -> usize {
        self.degrees().into_iter().max().unwrap_or(0)
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        adj
    }

    /// Copy with one extra edge.
    pub fn with_edge(&self, i: usize, j: usize) -> Result<Self> {
        Self::new(self.n, self.edges.iter().copied().chain([(i, j)]))
    }

    /// Spectral gap of the combinatorial Laplacian.
    pub fn lambda2(&self) -> f64 {
        spectral_report(&laplacian::<f64>(self))
            .map(|r| r.lambda2())
            .unwrap_or(0.0)
    }

    pub fn is_connected(&self) -> bool {
        self.n == 1 || self.lambda2() > CONNECTED_GAP_TOL
    }

    /// Plain-text edge list: `n m` on the first line, then `i j` per edge.
    pub fn to_edge_list(&self) -> String {
        let mut s = format!("{} {}\n", self.n, self.edges.len());
        for &(i, j) in &self.edges {
            let _ = writeln!(s, "{i} {j}");
        }
        s
    }

    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(k, l)| (k + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hl, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "missing header".into(),
        })?;
        let head = parse_usizes(header, hl, 2)?;
        let (n, m) = (head[0], head[1]);
        let mut edges = Vec::with_capacity(m);
        for (line, l) in lines {
            let v = parse_usizes(l, line, 2)?;
            if v[0] >= v[1] {
                return Err(Error::Parse {
                    line,
                    message: format!("expected i < j, got {} {}", v[0], v[1]),
                });
            }
            edges.push((v[0], v[1]));
        }
        if edges.len() != m {
            return Err(Error::Parse {
                line: hl,
                message: format!("header declares {m} edges, found {}", edges.len()),
            });
        }
        let g = Self::new(n, edges)?;
        if g.num_edges() != m {
            return Err(Error::Parse {
                line: hl,
                message: "duplicate edges".into(),
            });
        }
        Ok(g)
    }
}

fn parse_usizes(line: &str, lineno: usize, count: usize) -> Result<Vec<usize>> {
    let parts: Vec<&str> = line.split_whitespace().collect();
    if parts.len() != count {
        return Err(Error::Parse {
            line: lineno,
            message: format!("expected {count} fields, found {}", parts.len()),
        });
    }
    parts
        .iter()
        .map(|p| {
            p.parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("not a non-negative integer: {p:?}"),
            })
        })
        .collect()
}

/// `P_n`: edges `{i, i+1}`.
pub fn path_graph(n: usize) -> Result<MeasurementGraph> {
    if n < 2 {
        return Err(Error::invalid(format!("path graph needs n >= 2, got {n}")));
    }
    MeasurementGraph::new(n, (0..n - 1).map(|i| (i, i + 1)))
}

/// `P_n` plus `k` distinct non-path edges drawn uniformly without
/// replacement.
pub fn path_plus_random_edges(n: usize, k: usize, seed: u64) -> Result<MeasurementGraph> {
    let path = path_graph(n)?;
    let room = n * (n - 1) / 2 - (n - 1);
    if k > room {
        return Err(Error::invalid(format!(
            "cannot add {k} edges to P_{n}: only {room} non-path pairs exist"
        )));
    }
    let complement: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 2..n).map(move |j| (i, j)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = index::sample(&mut rng, complement.len(), k);
    MeasurementGraph::new(
        n,
        path.edges
            .iter()
            .copied()
            .chain(picked.into_iter().map(|t| complement[t])),
    )
}

/// G(n, p) resampled until connected. Returns the graph and the number of
/// draws it took.
pub fn erdos_renyi_connected(
    n: usize,
    p: f64,
    seed: u64,
    max_attempts: usize,
) -> Result<(MeasurementGraph, usize)> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("edge probability must be in (0, 1), got {p}")));
    }
    if n < 2 {
        return Err(Error::invalid(format!("random graph needs n >= 2, got {n}")));
    }
    if max_attempts == 0 {
        return Err(Error::invalid("max_attempts must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last = 0.0;
    for attempt in 1..=max_attempts {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random::<f64>() < p {
                    edges.push((i, j));
                }
            }
        }
        let g = MeasurementGraph::new(n, edges)?;
        last = g.lambda2();
        if last > CONNECTED_GAP_TOL {
            return Ok((g, attempt));
        }
    }
    Err(Error::NotConnected {
        attempts: max_attempts,
        last_lambda2: last,
    })
}

fn real<T: Real>(x: T) -> Complex<T> {
    Complex::new(x, T::zero())
}

/// Combinatorial Laplacian `D - W`.
pub fn laplacian<T: Real>(g: &MeasurementGraph) -> CMatrix<T> {
    let deg: Vec<T> = g.degrees().into_iter().map(|d| T::lit(d as f64)).collect();
    let mut l = CMatrix::from_real_diagonal(&deg);
    for &(i, j) in g.edges() {
        l[(i, j)] = real(-T::one());
        l[(j, i)] = real(-T::one());
    }
    l
}

fn check_len(g: &MeasurementGraph, len: usize) -> Result<()> {
    if len != g.n() {
        return Err(Error::invalid(format!(
            "vector length {len} does not match graph size {}",
            g.n()
        )));
    }
    Ok(())
}

/// Laplacian with diagonal `sum_{k~i} w_k` and off-diagonal `-c_ij` where
/// `w` and `c` come from the closures.
fn weighted<T: Real>(
    g: &MeasurementGraph,
    node_weight: impl Fn(usize) -> T,
    edge_value: impl Fn(usize, usize) -> Complex<T>,
) -> CMatrix<T> {
    let n = g.n();
    let mut diag = vec![T::zero(); n];
    for &(i, j) in g.edges() {
        diag[i] += node_weight(j);
        diag[j] += node_weight(i);
    }
    let mut l = CMatrix::from_real_diagonal(&diag);
    for &(i, j) in g.edges() {
        let v = edge_value(i, j);
        l[(i, j)] = -v;
        l[(j, i)] = -v.conj();
    }
    l
}

/// `L_|b|`: diagonal `sum_{k~i} |b_k|^2`, off-diagonal `-|b_i||b_j|`.
pub fn data_weighted_laplacian<T: Real>(g: &MeasurementGraph, magnitudes: &[T]) -> Result<CMatrix<T>> {
    check_len(g, magnitudes.len())?;
    if let Some(k) = magnitudes.iter().position(|&v| !(v >= T::zero())) {
        return Err(Error::invalid(format!("magnitude {k} is negative or NaN")));
    }
    Ok(weighted(
        g,
        |k| magnitudes[k] * magnitudes[k],
        |i, j| real(magnitudes[i] * magnitudes[j]),
    ))
}

/// Laplacian with phases: off-diagonal `-b_i conj(b_j)`. Its null space is
/// spanned by `b` on connected graphs with nonzero `b`.
pub fn phased_laplacian<T: Real>(g: &MeasurementGraph, b: &[Complex<T>]) -> Result<CMatrix<T>> {
    check_len(g, b.len())?;
    Ok(weighted(g, |k| b[k].norm_sqr(), |i, j| b[i] * b[j].conj()))
}

fn edge_value<T: Real>(data: &EdgeData<T>, i: usize, j: usize) -> Result<Complex<T>> {
    data.get(i, j)
        .ok_or_else(|| Error::invalid(format!("missing value on edge ({i}, {j})")))
}

fn check_data_dim<T: Real>(g: &MeasurementGraph, data: &EdgeData<T>) -> Result<()> {
    if data.n() != g.n() {
        return Err(Error::invalid(format!(
            "edge data dimension {} does not match graph size {}",
            data.n(),
            g.n()
        )));
    }
    Ok(())
}

/// Noisy phase Laplacian: diagonal `d_i`, off-diagonal `-B_ij`. Entries of
/// `data` outside the edge set are ignored.
pub fn noisy_phase_laplacian<T: Real>(g: &MeasurementGraph, data: &EdgeData<T>) -> Result<CMatrix<T>> {
    check_data_dim(g, data)?;
    let mut l = laplacian(g);
    for &(i, j) in g.edges() {
        let v = edge_value(data, i, j)?;
        l[(i, j)] = -v;
        l[(j, i)] = -v.conj();
    }
    Ok(l)
}

/// Noisy data Laplacian: diagonal `sum_{k~i} B_kk`, off-diagonal `-B_ij`.
pub fn noisy_data_laplacian<T: Real>(g: &MeasurementGraph, data: &EdgeData<T>) -> Result<CMatrix<T>> {
    check_data_dim(g, data)?;
    let n = g.n();
    let mut diag_vals = Vec::with_capacity(n);
    for k in 0..n {
        let v = data
            .get(k, k)
            .ok_or_else(|| Error::invalid(format!("missing diagonal value at {k}")))?;
        diag_vals.push(v.re);
    }
    for &(i, j) in g.edges() {
        edge_value(data, i, j)?;
    }
    Ok(weighted(
        g,
        |k| diag_vals[k],
        |i, j| data.get(i, j).expect("checked above"),
    ))
}

/// Ascending spectrum of a Hermitian matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralReport<T> {
    pub eigenvalues: Vec<T>,
}

impl<T: Real> SpectralReport<T> {
    pub fn lambda1(&self) -> T {
        self.eigenvalues.first().copied().unwrap_or_else(T::zero)
    }

    /// Second-smallest eigenvalue; zero for a 1x1 matrix.
    pub fn lambda2(&self) -> T {
        self.eigenvalues.get(1).copied().unwrap_or_else(T::zero)
    }

    pub fn lambda_max(&self) -> T {
        self.eigenvalues.last().copied().unwrap_or_else(T::zero)
    }
}

pub fn spectral_report<T: Real>(h: &CMatrix<T>) -> Result<SpectralReport<T>> {
    Ok(SpectralReport {
        eigenvalues: hermitian_eigenvalues(h)?,
    })
}
