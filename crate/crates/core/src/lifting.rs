//! Recovery algorithms: the eigenvector method and three lifted
//! formulations solved with an ADMM splitting of an l1 misfit against the
//! positive semidefinite cone.
//!
//! Misfits are summed over ordered index pairs: an off-diagonal residual
//! counts twice (once for `(i, j)` and once for `(j, i)`), a diagonal
//! residual once. This matches the norm the stability bounds are stated in.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::graphs::{noisy_data_laplacian, noisy_phase_laplacian, MeasurementGraph};
use crate::model::{EdgeData, ForwardOperator};
use crate::numerics::{
    complex_soft_threshold, eigh_unchecked, phase_aligned_distance, top_of, vec_norm, CMatrix,
    EigenPair, HermitianEigen, DEGENERATE_GAP_REL,
};
use crate::scalar::Real;

/// Residual balancing keeps the penalty within this factor of its initial
/// value. Unbounded doubling freezes the iteration once the primal residual
/// reaches its floating-point floor.
const RHO_RANGE: f64 = 1e3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Eigenvector,
    LiftedPhase,
    LiftedBasic,
    LiftedTwostep,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Eigenvector,
        Method::LiftedPhase,
        Method::LiftedBasic,
        Method::LiftedTwostep,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Eigenvector => "eigenvector",
            Method::LiftedPhase => "lifted-phase",
            Method::LiftedBasic => "lifted-basic",
            Method::LiftedTwostep => "lifted-twostep",
        }
    }

    /// Whether the method solves the phase problem (`A = I`, no diagonal).
    pub fn is_phase_problem(self) -> bool {
        matches!(self, Method::Eigenvector | Method::LiftedPhase)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown method {s:?}")))
    }
}

/// Initial `(Z, U)` for the splitting.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum WarmStart {
    /// `Z = I`, `U = 0`.
    Identity,
    /// Rank-one lift of the eigenvector estimate, with the dual seeded by
    /// the noisy Laplacian.
    #[default]
    Spectral,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverParams<T> {
    pub rho: T,
    pub max_iter: usize,
    pub tol_primal: T,
    pub tol_dual: T,
    /// Target misfit. `None` (or zero) minimizes the misfit; a positive
    /// value returns a strictly feasible interior point with misfit close
    /// to `sigma` once the minimum is below it.
    pub sigma: Option<T>,
    pub warm_start: WarmStart,
    /// Record one [`TraceRow`] per iteration.
    pub trace: bool,
    /// Iterations between penalty rebalancing steps; 0 disables it.
    pub balance_every: usize,
}

impl<T: Real> Default for SolverParams<T> {
    fn default() -> Self {
        Self {
            rho: T::one(),
            max_iter: 5000,
            tol_primal: T::lit(1e-7),
            tol_dual: T::lit(1e-7),
            sigma: None,
            warm_start: WarmStart::Spectral,
            trace: false,
            balance_every: 10,
        }
    }
}

impl<T: Real> SolverParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > T::zero()) || !self.rho.is_finite() {
            return Err(Error::invalid(format!("rho must be positive, got {}", self.rho)));
        }
        if !(self.tol_primal > T::zero()) || !(self.tol_dual > T::zero()) {
            return Err(Error::invalid("tolerances must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be at least 1"));
        }
        if let Some(s) = self.sigma {
            if !(s >= T::zero()) || !s.is_finite() {
                return Err(Error::invalid(format!("sigma must be finite and >= 0, got {s}")));
            }
        }
        Ok(())
    }

    fn target(&self) -> Option<T> {
        self.sigma.filter(|&s| s > T::zero())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow<T> {
    pub iter: usize,
    /// Misfit of the positive semidefinite iterate.
    pub misfit: T,
    pub primal_res: T,
    pub dual_res: T,
}

/// Output of a lifted solve.
#[derive(Clone, Debug)]
pub struct LiftedEstimate<T> {
    /// Positive semidefinite lift (`n x n` for every method).
    pub matrix: CMatrix<T>,
    pub top: EigenPair<T>,
    pub achieved_misfit: T,
    pub iterations: usize,
    pub converged: bool,
    pub primal_res: T,
    pub dual_res: T,
    /// Set when a target misfit was requested: whether it was met.
    pub feasible: Option<bool>,
    pub trace: Vec<TraceRow<T>>,
}

/// Targets of the l1 data-fit term.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DataFit<T> {
    /// Off-diagonal targets at `(i, j)`, `i < j`.
    pub pairs: Vec<(usize, usize, Complex<T>)>,
    /// Diagonal targets.
    pub diagonal: Vec<(usize, T)>,
}

impl<T: Real> DataFit<T> {
    pub fn empty() -> Self {
        Self {
            pairs: Vec::new(),
            diagonal: Vec::new(),
        }
    }

    /// Values of `data` on the edges of `g`, plus its diagonal when asked.
    pub fn from_edge_data(g: &MeasurementGraph, data: &EdgeData<T>, include_diagonal: bool) -> Result<Self> {
        if data.n() != g.n() {
            return Err(Error::invalid(format!(
                "edge data dimension {} does not match graph size {}",
                data.n(),
                g.n()
            )));
        }
        let mut pairs = Vec::with_capacity(g.num_edges());
        for &(i, j) in g.edges() {
            let v = data
                .get(i, j)
                .ok_or_else(|| Error::invalid(format!("missing value on edge ({i}, {j})")))?;
            pairs.push((i, j, v));
        }
        let mut diagonal = Vec::new();
        if include_diagonal {
            for k in 0..g.n() {
                let v = data
                    .get(k, k)
                    .ok_or_else(|| Error::invalid(format!("missing diagonal value at {k}")))?;
                diagonal.push((k, v.re));
            }
        }
        Ok(Self { pairs, diagonal })
    }

    fn validate(&self, dim: usize) -> Result<()> {
        for &(i, j, _) in &self.pairs {
            if i >= j || j >= dim {
                return Err(Error::invalid(format!("bad data-fit pair ({i}, {j}) for dimension {dim}")));
            }
        }
        for &(k, _) in &self.diagonal {
            if k >= dim {
                return Err(Error::invalid(format!("bad data-fit diagonal index {k}")));
            }
        }
        Ok(())
    }

    /// Ordered-pair l1 misfit of a Hermitian matrix.
    pub fn misfit(&self, m: &CMatrix<T>) -> T {
        self.misfit_with(|i, j| m[(i, j)])
    }

    /// Misfit of the rank-one lift `b b*`.
    pub fn misfit_rank_one(&self, b: &[Complex<T>]) -> T {
        self.misfit_with(|i, j| b[i] * b[j].conj())
    }

    fn misfit_with(&self, entry: impl Fn(usize, usize) -> Complex<T>) -> T {
        let two = T::lit(2.0);
        let off: T = self
            .pairs
            .iter()
            .map(|&(i, j, b)| two * (entry(i, j) - b).norm())
            .sum();
        let diag: T = self
            .diagonal
            .iter()
            .map(|&(k, b)| (entry(k, k).re - b).abs())
            .sum();
        off + diag
    }
}

/// Constraint set handled by the cone step.
#[derive(Clone, Debug)]
pub enum Structure<T> {
    /// `X_ii = 1`.
    UnitDiagonal,
    /// Diagonal left free (or fitted when the data-fit has diagonal targets).
    FreeDiagonal,
    /// `X = Q W Q*` for the given orthonormal basis `Q`.
    Range(CMatrix<T>),
}

/// Starting point of the splitting.
#[derive(Clone, Debug)]
pub struct AdmmStart<T> {
    pub z: CMatrix<T>,
    pub u: CMatrix<T>,
}

struct Stage<T> {
    x: CMatrix<T>,
    z: CMatrix<T>,
    u: CMatrix<T>,
    rho: T,
    iterations: usize,
    converged: bool,
    primal_res: T,
    dual_res: T,
    trace: Vec<TraceRow<T>>,
}

struct Admm<'a, T: Real> {
    dim: usize,
    fit: &'a DataFit<T>,
    structure: &'a Structure<T>,
    params: &'a SolverParams<T>,
}

impl<T: Real> Admm<'_, T> {
    fn cone_dim(&self) -> usize {
        match self.structure {
            Structure::Range(q) => q.cols(),
            _ => self.dim,
        }
    }

    /// Cone step. With `barrier = Some(mu)` this is the prox of
    /// `-mu log det` instead of the projection.
    fn cone_step(&self, v: &CMatrix<T>, rho: T, barrier: Option<T>) -> CMatrix<T> {
        let spectral = |eig: &HermitianEigen<T>| match barrier {
            None => eig.reconstruct_with(|l| l.max(T::zero())),
            Some(mu) => {
                let c = T::lit(4.0) * mu / rho;
                let half = T::lit(0.5);
                eig.reconstruct_with(|l| half * (l + (l * l + c).sqrt()))
            }
        };
        match self.structure {
            Structure::Range(q) => {
                let compressed = q.adjoint().matmul(v).matmul(q).hermitian_part();
                let w = spectral(&eigh_unchecked(&compressed));
                let mut x = q.matmul(&w).matmul(&q.adjoint());
                x.make_hermitian_from_lower();
                x
            }
            _ => spectral(&eigh_unchecked(v)),
        }
    }

    fn data_step(&self, w: &CMatrix<T>, rho: T) -> CMatrix<T> {
        let tau = rho.recip();
        let half = T::lit(0.5);
        let mut z = w.clone();
        for &(i, j, b) in &self.fit.pairs {
            let wij = (w[(i, j)] + w[(j, i)].conj()) * half;
            let zij = b + complex_soft_threshold(wij - b, tau);
            z[(i, j)] = zij;
            z[(j, i)] = zij.conj();
        }
        for k in 0..self.dim {
            z[(k, k)].im = T::zero();
        }
        match self.structure {
            Structure::UnitDiagonal => {
                for k in 0..self.dim {
                    z[(k, k)] = Complex::new(T::one(), T::zero());
                }
            }
            _ => {
                for &(k, b) in &self.fit.diagonal {
                    let d = w[(k, k)].re - b;
                    let shrunk = d.signum() * (d.abs() - tau).max(T::zero());
                    z[(k, k)] = Complex::new(b + shrunk, T::zero());
                }
            }
        }
        z
    }

    /// The matrix reported for an iterate: the cone iterate itself, with
    /// the diagonal rescaled to one under [`Structure::UnitDiagonal`].
    fn output(&self, x: &CMatrix<T>) -> CMatrix<T> {
        match self.structure {
            Structure::UnitDiagonal => unit_diagonal_rescale(x),
            _ => x.clone(),
        }
    }

    fn output_misfit(&self, x: &CMatrix<T>) -> T {
        match self.structure {
            Structure::UnitDiagonal => {
                let d: Vec<T> = x.real_diagonal();
                let s = |k: usize| if d[k] > T::zero() { d[k].sqrt().recip() } else { T::zero() };
                self.fit.misfit_with(|i, j| if i == j { Complex::new(T::one(), T::zero()) } else { x[(i, j)] * (s(i) * s(j)) })
            }
            _ => self.fit.misfit(x),
        }
    }

    fn run(&self, mut z: CMatrix<T>, mut u: CMatrix<T>, mut rho: T, barrier: Option<T>, budget: usize, offset: usize) -> Stage<T> {
        let p = self.params;
        let one = T::one();
        let ten = T::lit(10.0);
        let two = T::lit(2.0);
        let mut x = CMatrix::zeros(self.dim, self.dim);
        let mut trace = Vec::new();
        let (mut r, mut s) = (T::infinity(), T::infinity());
        let mut converged = false;
        let mut iterations = 0;
        let rho_max = p.rho * T::lit(RHO_RANGE);
        let rho_min = p.rho / T::lit(RHO_RANGE);
        for it in 1..=budget {
            iterations = it;
            x = self.cone_step(&(&z - &u), rho, barrier);
            let w = &x + &u;
            let z_next = self.data_step(&w, rho);
            u += &x;
            u -= &z_next;
            let scale = z_next.frobenius_norm().max(one);
            r = (&x - &z_next).frobenius_norm() / scale;
            s = rho * (&z_next - &z).frobenius_norm() / scale;
            z = z_next;
            if p.trace {
                trace.push(TraceRow {
                    iter: offset + it,
                    misfit: self.output_misfit(&x),
                    primal_res: r,
                    dual_res: s,
                });
            }
            if r <= p.tol_primal && s <= p.tol_dual {
                converged = true;
                break;
            }
            // The barrier stage keeps rho fixed: rescaling it shifts the
            // effective barrier weight mu/rho and the iterates oscillate.
            if barrier.is_none() && p.balance_every > 0 && it % p.balance_every == 0 {
                if r > ten * s && rho < rho_max {
                    rho *= two;
                    u = u.scale(two.recip());
                } else if s > ten * r && rho > rho_min {
                    rho /= two;
                    u = u.scale(two);
                }
            }
        }
        Stage {
            x,
            z,
            u,
            rho,
            iterations,
            converged,
            primal_res: r,
            dual_res: s,
            trace,
        }
    }
}

fn unit_diagonal_rescale<T: Real>(x: &CMatrix<T>) -> CMatrix<T> {
    let n = x.rows();
    let s: Vec<T> = x
        .real_diagonal()
        .into_iter()
        .map(|d| if d > T::zero() { d.sqrt().recip() } else { T::zero() })
        .collect();
    let mut out = CMatrix::from_fn(n, n, |i, j| x[(i, j)] * (s[i] * s[j]));
    for k in 0..n {
        out[(k, k)] = Complex::new(T::one(), T::zero());
    }
    out
}

/// Solves `min sum |X_ij - B_ij|` over the data-fit set subject to
/// `X >= 0` and `structure`, starting from `Z = I`, `U = 0`.
pub fn admm_l1_psd<T: Real>(
    dim: usize,
    fit: &DataFit<T>,
    structure: &Structure<T>,
    params: &SolverParams<T>,
) -> Result<LiftedEstimate<T>> {
    let start = AdmmStart {
        z: CMatrix::identity(dim),
        u: CMatrix::zeros(dim, dim),
    };
    admm_l1_psd_from(dim, fit, structure, params, start)
}

/// [`admm_l1_psd`] from a given `(Z, U)`.
///
/// With a positive target misfit the solve runs in two stages: the misfit
/// is first minimized, and if the minimum `f*` is below the target the
/// cone projection is replaced by the prox of `-mu log det X` with
/// `mu = (sigma - f*) / dim`, which moves the iterate onto the central path
/// where the misfit is at most `f* + mu dim = sigma`.
pub fn admm_l1_psd_from<T: Real>(
    dim: usize,
    fit: &DataFit<T>,
    structure: &Structure<T>,
    params: &SolverParams<T>,
    start: AdmmStart<T>,
) -> Result<LiftedEstimate<T>> {
    params.validate()?;
    if dim == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    fit.validate(dim)?;
    for m in [&start.z, &start.u] {
        if m.rows() != dim || m.cols() != dim {
            return Err(Error::invalid("warm start has the wrong shape"));
        }
    }
    if let Structure::Range(q) = structure {
        if q.rows() != dim || q.cols() == 0 || q.cols() > dim {
            return Err(Error::invalid("range basis has the wrong shape"));
        }
        let gram = q.adjoint().matmul(q);
        if (&gram - &CMatrix::identity(q.cols())).max_abs() > T::lit(1e-10).max(T::epsilon() * T::lit(100.0)) {
            return Err(Error::invalid("range basis is not orthonormal"));
        }
    }
    let admm = Admm {
        dim,
        fit,
        structure,
        params,
    };
    let first = admm.run(start.z, start.u, params.rho, None, params.max_iter, 0);
    let f_star = admm.output_misfit(&first.x);
    let mut stage = first;
    let mut feasible = None;
    if let Some(sigma) = params.target() {
        let remaining = params.max_iter.saturating_sub(stage.iterations);
        if f_star < sigma && remaining > 0 {
            let mu = (sigma - f_star) / T::lit(admm.cone_dim() as f64);
            let mut second = admm.run(stage.z, stage.u, stage.rho, Some(mu), remaining, stage.iterations);
            second.iterations += stage.iterations;
            second.converged &= stage.converged;
            let mut trace = stage.trace;
            trace.append(&mut second.trace);
            second.trace = trace;
            stage = second;
        }
        feasible = Some(admm.output_misfit(&stage.x) <= sigma);
    }
    let matrix = admm.output(&stage.x);
    let achieved_misfit = fit.misfit(&matrix);
    let top = top_of(&eigh_unchecked(&matrix));
    Ok(LiftedEstimate {
        matrix,
        top,
        achieved_misfit,
        iterations: stage.iterations,
        converged: stage.converged,
        primal_res: stage.primal_res,
        dual_res: stage.dual_res,
        feasible,
        trace: stage.trace,
    })
}

/// Result of a recovery method.
#[derive(Clone, Debug)]
pub struct RecoveryOutcome<T> {
    pub method: Method,
    pub x_hat: Vec<Complex<T>>,
    /// Absent for the eigenvector method.
    pub estimate: Option<LiftedEstimate<T>>,
    /// Smallest eigenvalue of the noisy Laplacian built from the data.
    pub lambda1_tilde: T,
    /// Second-smallest eigenvalue of the noisy Laplacian.
    pub lambda2_tilde: T,
    /// The extracted eigenvector is not well separated.
    pub degenerate: bool,
    pub aligned_error: Option<T>,
    pub relative_error: Option<T>,
    pub alpha: Option<T>,
}

impl<T: Real> RecoveryOutcome<T> {
    /// Fills in the phase-aligned error against the ground truth.
    pub fn align_to(&mut self, x0: &[Complex<T>]) -> Result<()> {
        let d = phase_aligned_distance(&self.x_hat, x0)?;
        let norm = vec_norm(x0);
        self.aligned_error = Some(d.distance);
        self.relative_error = Some(if norm > T::zero() { d.distance / norm } else { d.distance });
        self.alpha = Some(d.alpha);
        Ok(())
    }
}

fn smallest_pair<T: Real>(h: &CMatrix<T>) -> (HermitianEigen<T>, bool) {
    let eig = eigh_unchecked(h);
    let degenerate = eig.dim() < 2 || {
        let scale = eig.values[0].abs().max(eig.values[eig.dim() - 1].abs()).max(T::one());
        (eig.values[1] - eig.values[0]).abs() <= T::lit(DEGENERATE_GAP_REL) * scale
    };
    (eig, degenerate)
}

/// Smallest eigenvector of the noisy phase Laplacian, scaled to norm
/// `sqrt(n)`.
pub fn eigenvector_method<T: Real>(g: &MeasurementGraph, data: &EdgeData<T>) -> Result<RecoveryOutcome<T>> {
    let h = noisy_phase_laplacian(g, data)?;
    let (eig, degenerate) = smallest_pair(&h);
    let scale = T::lit(g.n() as f64).sqrt();
    let x_hat = eig.vector(0).into_iter().map(|v| v * scale).collect();
    Ok(RecoveryOutcome {
        method: Method::Eigenvector,
        x_hat,
        estimate: None,
        lambda1_tilde: eig.values[0],
        lambda2_tilde: eig.values.get(1).copied().unwrap_or_else(T::zero),
        degenerate,
        aligned_error: None,
        relative_error: None,
        alpha: None,
    })
}

/// Lifted phase recovery: unit diagonal, l1 fit on the edges, `X >= 0`.
/// The estimate is the top eigenvector scaled to norm `sqrt(n)`.
pub fn solve_lifted_phase<T: Real>(
    g: &MeasurementGraph,
    data: &EdgeData<T>,
    params: &SolverParams<T>,
) -> Result<RecoveryOutcome<T>> {
    params.validate()?;
    let n = g.n();
    let fit = DataFit::from_edge_data(g, data, false)?;
    let h = noisy_phase_laplacian(g, data)?;
    let (eig, _) = smallest_pair(&h);
    let start = match params.warm_start {
        WarmStart::Identity => AdmmStart {
            z: CMatrix::identity(n),
            u: CMatrix::zeros(n, n),
        },
        WarmStart::Spectral => {
            let scale = T::lit(n as f64).sqrt();
            let v: Vec<Complex<T>> = eig.vector(0).into_iter().map(|c| c * scale).collect();
            AdmmStart {
                z: CMatrix::outer(&v, &v),
                u: h.scale(params.rho.recip()),
            }
        }
    };
    let est = admm_l1_psd_from(n, &fit, &Structure::UnitDiagonal, params, start)?;
    let scale = T::lit(n as f64).sqrt();
    let x_hat = est.top.vector.iter().map(|&v| v * scale).collect();
    Ok(RecoveryOutcome {
        method: Method::LiftedPhase,
        x_hat,
        degenerate: est.top.degenerate,
        estimate: Some(est),
        lambda1_tilde: eig.values[0],
        lambda2_tilde: eig.values.get(1).copied().unwrap_or_else(T::zero),
        aligned_error: None,
        relative_error: None,
        alpha: None,
    })
}

struct GeneralSetup<T> {
    fit: DataFit<T>,
    eig: HermitianEigen<T>,
    start: AdmmStart<T>,
}

fn general_setup<T: Real>(
    g: &MeasurementGraph,
    data: &EdgeData<T>,
    op: &ForwardOperator<T>,
    params: &SolverParams<T>,
    range: Option<&CMatrix<T>>,
) -> Result<GeneralSetup<T>> {
    params.validate()?;
    let m = g.n();
    if op.m() != data.n() || op.m() != m {
        return Err(Error::invalid(format!(
            "operator has {} rows, data dimension {}, graph size {}",
            op.m(),
            data.n(),
            m
        )));
    }
    let fit = DataFit::from_edge_data(g, data, true)?;
    let h = noisy_data_laplacian(g, data)?;
    let eig = eigh_unchecked(&h);
    let start = match params.warm_start {
        WarmStart::Identity => AdmmStart {
            z: CMatrix::identity(m),
            u: CMatrix::zeros(m, m),
        },
        WarmStart::Spectral => {
            let energy: T = fit.diagonal.iter().map(|&(_, b)| b.max(T::zero())).sum();
            let mut b: Vec<Complex<T>> = eig.vector(0).into_iter().map(|c| c * energy.sqrt()).collect();
            if let Some(q) = range {
                b = q.mul_vec(&q.adjoint().mul_vec(&b));
            }
            let c = h.max_abs();
            let u = if c > T::zero() {
                h.scale((c * params.rho).recip())
            } else {
                CMatrix::zeros(m, m)
            };
            AdmmStart {
                z: CMatrix::outer(&b, &b),
                u,
            }
        }
    };
    Ok(GeneralSetup { fit, eig, start })
}

fn general_outcome<T: Real>(
    method: Method,
    x_hat: Vec<Complex<T>>,
    est: LiftedEstimate<T>,
    eig: &HermitianEigen<T>,
) -> RecoveryOutcome<T> {
    RecoveryOutcome {
        method,
        x_hat,
        degenerate: est.top.degenerate,
        estimate: Some(est),
        lambda1_tilde: eig.values[0],
        lambda2_tilde: eig.values.get(1).copied().unwrap_or_else(T::zero),
        aligned_error: None,
        relative_error: None,
        alpha: None,
    }
}

/// Basic lifting: `min sum |(A X A*)_ij - B_ij|` over edges and diagonal,
/// `X >= 0`. Solved in `Y = A X A*` restricted to the range of `A`; the
/// estimate is `x1 sqrt(eta1)` from the top eigenpair of `X`.
pub fn solve_lifted_basic<T: Real>(
    g: &MeasurementGraph,
    data: &EdgeData<T>,
    op: &ForwardOperator<T>,
    params: &SolverParams<T>,
) -> Result<RecoveryOutcome<T>> {
    let q = op.range_basis().clone();
    let setup = general_setup(g, data, op, params, Some(&q))?;
    let mut est = admm_l1_psd_from(g.n(), &setup.fit, &Structure::Range(q), params, setup.start)?;
    let pinv = op.pinv();
    let mut x = pinv.matmul(&est.matrix).matmul(&pinv.adjoint());
    x.make_hermitian_from_lower();
    est.top = top_of(&eigh_unchecked(&x));
    est.matrix = x;
    let root = est.top.value.max(T::zero()).sqrt();
    let x_hat = est.top.vector.iter().map(|&v| v * root).collect();
    Ok(general_outcome(Method::LiftedBasic, x_hat, est, &setup.eig))
}

/// Two-step lifting: `min sum |Y_ij - B_ij|` over edges and diagonal with a
/// free `Y >= 0`; the estimate is `A^+ y1 sqrt(eta1)`.
pub fn solve_lifted_twostep<T: Real>(
    g: &MeasurementGraph,
    data: &EdgeData<T>,
    op: &ForwardOperator<T>,
    params: &SolverParams<T>,
) -> Result<RecoveryOutcome<T>> {
    let setup = general_setup(g, data, op, params, None)?;
    let est = admm_l1_psd_from(g.n(), &setup.fit, &Structure::FreeDiagonal, params, setup.start)?;
    let root = est.top.value.max(T::zero()).sqrt();
    let y: Vec<Complex<T>> = est.top.vector.iter().map(|&v| v * root).collect();
    let x_hat = op.pinv_apply(&y);
    Ok(general_outcome(Method::LiftedTwostep, x_hat, est, &setup.eig))
}

/// Dispatches to the method's solver. `op` is required for the general
/// methods and ignored by the phase ones.
pub fn recover<T: Real>(
    method: Method,
    g: &MeasurementGraph,
    data: &EdgeData<T>,
    op: Option<&ForwardOperator<T>>,
    params: &SolverParams<T>,
) -> Result<RecoveryOutcome<T>> {
    let need_op = || op.ok_or_else(|| Error::invalid(format!("{method} needs a forward operator")));
    match method {
        Method::Eigenvector => eigenvector_method(g, data),
        Method::LiftedPhase => solve_lifted_phase(g, data, params),
        Method::LiftedBasic => solve_lifted_basic(g, data, need_op()?, params),
        Method::LiftedTwostep => solve_lifted_twostep(g, data, need_op()?, params),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{path_graph, path_plus_random_edges};
    use crate::model::{hermitian_gaussian_noise, make_operator, synthesize_clean, unit_modulus_signal};
    use crate::numerics::hermitian_eigenvalues;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn min_eig(m: &CMatrix<f64>) -> f64 {
        hermitian_eigenvalues(m).unwrap()[0]
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("phase".parse::<Method>().is_err());
    }

    #[test]
    fn params_validation() {
        let mut p = SolverParams::<f64>::default();
        assert!(p.validate().is_ok());
        p.rho = 0.0;
        assert!(p.validate().is_err());
        let p = SolverParams::<f64> { tol_dual: 0.0, ..Default::default() };
        assert!(p.validate().is_err());
        let p = SolverParams::<f64> { sigma: Some(-1.0), ..Default::default() };
        assert!(p.validate().is_err());
    }

    #[test]
    fn exact_targets_are_a_fixed_point() {
        let v = vec![c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0)];
        let x0 = CMatrix::outer(&v, &v);
        let fit = DataFit {
            pairs: vec![(0, 1, x0[(0, 1)]), (1, 2, x0[(1, 2)]), (0, 2, x0[(0, 2)])],
            diagonal: vec![],
        };
        let est = admm_l1_psd(3, &fit, &Structure::UnitDiagonal, &SolverParams::default()).unwrap();
        assert!(est.converged);
        assert!(est.achieved_misfit <= 1e-6, "misfit {}", est.achieved_misfit);
        assert!((&est.matrix - &x0).frobenius_norm() < 1e-5);
    }

    #[test]
    fn empty_fit_returns_zero_misfit() {
        let fit = DataFit::<f64>::empty();
        let est = admm_l1_psd(4, &fit, &Structure::UnitDiagonal, &SolverParams::default()).unwrap();
        assert_eq!(est.achieved_misfit, 0.0);
        assert!(min_eig(&est.matrix) >= -1e-8);
        assert!(est.matrix.real_diagonal().iter().all(|&d| (d - 1.0).abs() < 1e-12));
    }

    /// Frustrated triangle: the targets ask for a real correlation pattern
    /// no unit-diagonal PSD matrix can meet. Checked against a brute-force
    /// scan of the real symmetric family `[[1,t,s],[t,1,t],[s,t,1]]`, which
    /// contains an optimum by symmetry and convexity.
    #[test]
    fn frustrated_triangle_matches_grid_search() {
        let fit = DataFit {
            pairs: vec![(0, 1, c(2.0, 0.0)), (1, 2, c(2.0, 0.0)), (0, 2, c(-2.0, 0.0))],
            diagonal: vec![],
        };
        let mut best = f64::INFINITY;
        let steps = 2000;
        for a in 0..=steps {
            let t = -1.0 + 2.0 * a as f64 / steps as f64;
            for b in 0..=steps {
                let s = -1.0 + 2.0 * b as f64 / steps as f64;
                let det = 1.0 + 2.0 * t * t * s - 2.0 * t * t - s * s;
                if det < -1e-12 {
                    continue;
                }
                let f = 2.0 * (2.0 * (t - 2.0).abs() + (s + 2.0).abs());
                best = best.min(f);
            }
        }
        assert!((best - 9.0).abs() < 1e-2, "grid optimum {best}");
        let params = SolverParams { tol_primal: 1e-9, tol_dual: 1e-9, ..Default::default() };
        let est = admm_l1_psd(3, &fit, &Structure::UnitDiagonal, &params).unwrap();
        assert!((est.achieved_misfit - best).abs() < 1e-3, "admm {} vs grid {best}", est.achieved_misfit);
        assert!(min_eig(&est.matrix) >= -1e-8);
    }

    #[test]
    fn eigenvector_method_noiseless_is_exact() {
        let g = path_plus_random_edges(40, 8, 1).unwrap();
        let x0 = unit_modulus_signal::<f64>(40, 2);
        let b = synthesize_clean(None, &x0, &g, false).unwrap();
        let mut out = eigenvector_method(&g, &b).unwrap();
        out.align_to(&x0).unwrap();
        assert!(out.aligned_error.unwrap() <= 1e-9);
        assert!(!out.degenerate);
        assert!(out.lambda1_tilde.abs() < 1e-10);
    }

    #[test]
    fn eigenvector_method_flags_disconnected() {
        let g = MeasurementGraph::new(4, [(0, 1), (2, 3)]).unwrap();
        let x0 = unit_modulus_signal::<f64>(4, 2);
        let b = synthesize_clean(None, &x0, &g, false).unwrap();
        let out = eigenvector_method(&g, &b).unwrap();
        assert!(out.lambda2_tilde.abs() < 1e-12);
        assert!(out.degenerate);
    }

    #[test]
    fn lifted_phase_noiseless_cold_start() {
        let g = path_plus_random_edges(24, 6, 3).unwrap();
        let x0 = unit_modulus_signal::<f64>(24, 4);
        let b = synthesize_clean(None, &x0, &g, false).unwrap();
        let params = SolverParams { warm_start: WarmStart::Identity, ..Default::default() };
        let mut out = solve_lifted_phase(&g, &b, &params).unwrap();
        out.align_to(&x0).unwrap();
        let est = out.estimate.as_ref().unwrap();
        assert!(est.converged, "iterations {}", est.iterations);
        assert!(out.aligned_error.unwrap() <= 1e-5, "error {:e}", out.aligned_error.unwrap());
        assert!((&est.matrix - &CMatrix::outer(&x0, &x0)).frobenius_norm() <= 1e-4);
    }

    #[test]
    fn feasibility_mode_lands_near_target() {
        let g = path_plus_random_edges(20, 5, 3).unwrap();
        let x0 = unit_modulus_signal::<f64>(20, 4);
        let b = synthesize_clean(None, &x0, &g, false).unwrap();
        let sigma = 1e-3;
        let params = SolverParams { sigma: Some(sigma), tol_primal: 1e-9, tol_dual: 1e-9, ..Default::default() };
        let mut out = solve_lifted_phase(&g, &b, &params).unwrap();
        out.align_to(&x0).unwrap();
        let est = out.estimate.as_ref().unwrap();
        assert_eq!(est.feasible, Some(true));
        assert!(est.achieved_misfit <= sigma);
        assert!(est.achieved_misfit >= 0.5 * sigma, "misfit {:e}", est.achieved_misfit);
        assert!(out.aligned_error.unwrap() > 0.0);
    }

    #[test]
    fn general_methods_noiseless() {
        let n = 8;
        let m = 16;
        let (g, _) = crate::graphs::erdos_renyi_connected(m, 0.3, 5, 100).unwrap();
        let op = make_operator::<f64>(m, n, 3.0, 6).unwrap();
        let x0 = unit_modulus_signal::<f64>(n, 7);
        let b = synthesize_clean(Some(&op), &x0, &g, true).unwrap();
        for (method, warm) in [
            (Method::LiftedBasic, WarmStart::Spectral),
            (Method::LiftedTwostep, WarmStart::Spectral),
            (Method::LiftedBasic, WarmStart::Identity),
            (Method::LiftedTwostep, WarmStart::Identity),
        ] {
            let params = SolverParams { warm_start: warm, max_iter: 20000, ..Default::default() };
            let mut out = recover(method, &g, &b, Some(&op), &params).unwrap();
            out.align_to(&x0).unwrap();
            assert!(
                out.relative_error.unwrap() <= 1e-4,
                "{method} {warm:?}: {:e}",
                out.relative_error.unwrap()
            );
            assert!(min_eig(&out.estimate.unwrap().matrix) >= -1e-8);
        }
        assert!(recover(Method::LiftedBasic, &g, &b, None, &SolverParams::default()).is_err());
    }

    #[test]
    fn noisy_truth_is_feasible() {
        let g = path_plus_random_edges(16, 6, 2).unwrap();
        let x0 = unit_modulus_signal::<f64>(16, 1);
        let clean = synthesize_clean(None, &x0, &g, false).unwrap();
        let noise = hermitian_gaussian_noise::<f64>(&g, 0.05, 3, false).unwrap();
        let b = clean.try_add(&noise.data).unwrap();
        let fit = DataFit::from_edge_data(&g, &b, false).unwrap();
        let eps1 = noise.norms.l1_symmetric;
        assert!((fit.misfit_rank_one(&x0) - eps1).abs() < 1e-12);
        let params = SolverParams { sigma: Some(eps1), tol_primal: 1e-9, tol_dual: 1e-9, ..Default::default() };
        let out = solve_lifted_phase(&g, &b, &params).unwrap();
        let est = out.estimate.unwrap();
        assert!(est.achieved_misfit <= eps1 + 1e-7);
    }

    #[test]
    fn trace_rows_are_recorded() {
        let g = path_graph(6).unwrap();
        let x0 = unit_modulus_signal::<f64>(6, 1);
        let b = synthesize_clean(None, &x0, &g, false).unwrap();
        let params = SolverParams { warm_start: WarmStart::Identity, trace: true, max_iter: 40, ..Default::default() };
        let out = solve_lifted_phase(&g, &b, &params).unwrap();
        let est = out.estimate.unwrap();
        assert_eq!(est.trace.len(), est.iterations);
        assert!(est.trace.iter().enumerate().all(|(k, r)| r.iter == k + 1));
    }

    #[test]
    fn rejects_bad_range_basis() {
        let fit = DataFit::<f64>::empty();
        let q = CMatrix::from_real_diagonal(&[2.0, 1.0]);
        let err = admm_l1_psd(2, &fit, &Structure::Range(q), &SolverParams::default());
        assert!(err.is_err());
    }
}
