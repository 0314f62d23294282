//! Stability bounds for the recovery methods, their hypotheses, and the two
//! lemmas they rest on as checkable oracles.
//!
//! The l1 inputs are sums over ordered index pairs (see
//! [`EdgeNorms::l1_symmetric`](crate::numerics::EdgeNorms)); each formula is
//! evaluated exactly as stated.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::numerics::{hermitian_spectral_norm, phase_aligned_distance, top_eigenpair, vec_norm, CMatrix};
use crate::scalar::Real;

/// Quantities a bound was evaluated from.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BoundInputs<T> {
    pub eps_l1: Option<T>,
    pub eps_spectral: Option<T>,
    pub sigma: Option<T>,
    pub e_norm: Option<T>,
    /// λ2 or λ̃2, whichever the bound is stated in.
    pub gap: T,
    pub kappa: Option<T>,
    pub n: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundReport<T> {
    /// Bound on the aligned error (relative error for the general problem).
    pub value: T,
    pub hypothesis_met: bool,
    /// `rhs - lhs` of the hypothesis inequality; non-negative exactly when
    /// it holds.
    pub hypothesis_margin: T,
    /// Zero gap: `value` is `+inf`.
    pub infinite: bool,
    pub inputs: BoundInputs<T>,
}

impl<T: Real> BoundReport<T> {
    /// `error <= value + slack`, counting only rows whose hypothesis holds.
    pub fn contains(&self, error: T, slack: T) -> bool {
        !self.hypothesis_met || error <= self.value + slack
    }
}

fn check_nonneg<T: Real>(name: &str, v: T) -> Result<()> {
    if v >= T::zero() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be >= 0, got {v}")))
    }
}

/// `coef * sqrt(load / gap)` under the hypothesis `load <= limit`.
fn sqrt_bound<T: Real>(coef: T, load: T, gap: T, limit: T, inputs: BoundInputs<T>) -> BoundReport<T> {
    let infinite = gap <= T::zero();
    let value = if infinite {
        T::infinity()
    } else {
        coef * (load / gap).sqrt()
    };
    let margin = limit - load;
    BoundReport {
        value,
        hypothesis_met: margin >= T::zero(),
        hypothesis_margin: margin,
        infinite,
        inputs,
    }
}

/// Lifted phase recovery: `4 sqrt((eps1 + sigma) / lambda2)` when
/// `eps1 + sigma <= n lambda2`.
pub fn bound_thm1<T: Real>(eps_l1: T, sigma: T, lambda2: T, n: usize) -> Result<BoundReport<T>> {
    check_nonneg("eps_l1", eps_l1)?;
    check_nonneg("sigma", sigma)?;
    check_nonneg("lambda2", lambda2)?;
    let load = eps_l1 + sigma;
    Ok(sqrt_bound(
        T::lit(4.0),
        load,
        lambda2,
        T::lit(n as f64) * lambda2,
        BoundInputs {
            eps_l1: Some(eps_l1),
            sigma: Some(sigma),
            gap: lambda2,
            n: Some(n),
            ..Default::default()
        },
    ))
}

/// Noise at the signal level: `4 sqrt(sigma / lambda2) + ||e||` when
/// `sigma <= n lambda2`.
pub fn bound_cor1<T: Real>(sigma: T, lambda2: T, e_norm: T, n: usize) -> Result<BoundReport<T>> {
    check_nonneg("sigma", sigma)?;
    check_nonneg("lambda2", lambda2)?;
    check_nonneg("e_norm", e_norm)?;
    let mut r = sqrt_bound(
        T::lit(4.0),
        sigma,
        lambda2,
        T::lit(n as f64) * lambda2,
        BoundInputs {
            sigma: Some(sigma),
            e_norm: Some(e_norm),
            gap: lambda2,
            n: Some(n),
            ..Default::default()
        },
    );
    r.value += e_norm;
    Ok(r)
}

/// Eigenvector method: `sqrt(2n) ||eps|| / lambda2_tilde` when
/// `||eps|| <= lambda2_tilde / 2`.
pub fn bound_thm2<T: Real>(eps_spectral: T, lambda2_tilde: T, n: usize) -> Result<BoundReport<T>> {
    check_nonneg("eps_spectral", eps_spectral)?;
    check_nonneg("lambda2_tilde", lambda2_tilde)?;
    let infinite = lambda2_tilde <= T::zero();
    let value = if infinite {
        T::infinity()
    } else {
        T::lit(2.0 * n as f64).sqrt() * eps_spectral / lambda2_tilde
    };
    let margin = lambda2_tilde / T::lit(2.0) - eps_spectral;
    Ok(BoundReport {
        value,
        hypothesis_met: margin >= T::zero(),
        hypothesis_margin: margin,
        infinite,
        inputs: BoundInputs {
            eps_spectral: Some(eps_spectral),
            gap: lambda2_tilde,
            n: Some(n),
            ..Default::default()
        },
    })
}

fn general_bound<T: Real>(eps_l1: T, sigma: T, lambda2: T, kappa: T, power: i32) -> Result<BoundReport<T>> {
    check_nonneg("eps_l1", eps_l1)?;
    check_nonneg("sigma", sigma)?;
    check_nonneg("lambda2", lambda2)?;
    if !(kappa >= T::one()) {
        return Err(Error::invalid(format!("kappa must be >= 1, got {kappa}")));
    }
    let load = eps_l1 + sigma;
    Ok(sqrt_bound(
        T::lit(15.0) * kappa.powi(power),
        load,
        lambda2,
        lambda2 / T::lit(2.0),
        BoundInputs {
            eps_l1: Some(eps_l1),
            sigma: Some(sigma),
            gap: lambda2,
            kappa: Some(kappa),
            ..Default::default()
        },
    ))
}

/// Basic lifting, relative error: `15 kappa^2 sqrt((eps1 + sigma) / lambda2)`
/// when `eps1 + sigma <= lambda2 / 2`, with λ2 the gap of the data-weighted
/// Laplacian.
pub fn bound_thm3<T: Real>(eps_l1: T, sigma: T, lambda2_weighted: T, kappa: T) -> Result<BoundReport<T>> {
    general_bound(eps_l1, sigma, lambda2_weighted, kappa, 2)
}

/// Two-step lifting, relative error: as [`bound_thm3`] with `kappa^1`.
pub fn bound_thm4<T: Real>(eps_l1: T, sigma: T, lambda2_weighted: T, kappa: T) -> Result<BoundReport<T>> {
    general_bound(eps_l1, sigma, lambda2_weighted, kappa, 1)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GapLowerBound<T> {
    pub value: T,
    /// The raw expression was negative and has been clamped to zero.
    pub clamped: bool,
}

/// `lambda2 >= lambda2_tilde - ((d + 1) ||eps||_inf + ||eps||)`, clamped at
/// zero.
pub fn lambda2_lower_bound_from_noisy<T: Real>(
    lambda2_tilde: T,
    eps_inf: T,
    eps_spectral: T,
    max_degree: usize,
) -> GapLowerBound<T> {
    let raw = lambda2_tilde - (T::lit(max_degree as f64 + 1.0) * eps_inf + eps_spectral);
    if raw < T::zero() {
        GapLowerBound {
            value: T::zero(),
            clamped: true,
        }
    } else {
        GapLowerBound {
            value: raw,
            clamped: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LemmaOneReport<T> {
    pub mu: T,
    pub c1_lower_bound: T,
    /// `mu <= lambda2`.
    pub applicable: bool,
    pub holds: bool,
}

/// Convex-combination bound: with `c` on the simplex and `lambda`
/// ascending from zero, `mu = sum c_j lambda_j <= lambda_2` forces
/// `c_1 >= 1 - mu / lambda_2`.
pub fn lemma_one_oracle<T: Real>(c: &[T], lambdas: &[T]) -> Result<LemmaOneReport<T>> {
    if c.len() != lambdas.len() || c.len() < 2 {
        return Err(Error::invalid("weights and spectrum must have equal length >= 2"));
    }
    if c.iter().any(|&w| !(w >= T::zero())) {
        return Err(Error::invalid("weights must be non-negative"));
    }
    let total: T = c.iter().copied().sum();
    if (total - T::one()).abs() > T::lit(1e-12).max(T::epsilon() * T::lit(c.len() as f64 * 4.0)) {
        return Err(Error::invalid(format!("weights sum to {total}, not 1")));
    }
    if lambdas[0].abs() > T::lit(1e-12).max(T::epsilon()) {
        return Err(Error::invalid("the smallest eigenvalue must be 0"));
    }
    if lambdas.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("eigenvalues must be ascending"));
    }
    let mu: T = c.iter().zip(lambdas).map(|(&w, &l)| w * l).sum();
    let l2 = lambdas[1];
    let c1_lower_bound = if l2 > T::zero() {
        T::one() - mu / l2
    } else {
        T::neg_infinity()
    };
    let slack = T::lit(1e-12).max(T::epsilon() * T::lit(16.0));
    Ok(LemmaOneReport {
        mu,
        c1_lower_bound,
        applicable: mu <= l2,
        holds: c[0] >= c1_lower_bound - slack,
    })
}

/// How the top eigenvector of `X` is scaled in [`lemma_two_oracle`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LemmaTwoMode {
    /// `x = x1 ||v||`.
    ScaleByNormV,
    /// `x = x1 sqrt(eta1)`.
    ScaleBySqrtEta1,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LemmaTwoReport<T> {
    /// `min_a || x||x|| - e^{ia} v||v|| ||`.
    pub lhs: T,
    /// `2 sqrt(2) ||X - v v*||`.
    pub rhs: T,
    /// `||X - v v*|| < ||v||^2 / 2`.
    pub hypothesis_met: bool,
    pub holds: bool,
    pub x: Vec<Complex<T>>,
}

/// Eigenvector perturbation bound for a Hermitian `X` near `v v*`. Both
/// sides are evaluated whether or not the hypothesis holds.
pub fn lemma_two_oracle<T: Real>(x_mat: &CMatrix<T>, v: &[Complex<T>], mode: LemmaTwoMode) -> Result<LemmaTwoReport<T>> {
    if !x_mat.is_square() || x_mat.rows() != v.len() {
        return Err(Error::invalid("matrix and vector dimensions disagree"));
    }
    let vn = vec_norm(v);
    if !(vn > T::zero()) {
        return Err(Error::invalid("v must be nonzero"));
    }
    let scale = x_mat.max_abs().max(T::one());
    if x_mat.hermitian_defect() > T::lit(T::HERMITIAN_TOL) * scale {
        return Err(Error::invalid("matrix is not Hermitian"));
    }
    let top = top_eigenpair(x_mat);
    let s = match mode {
        LemmaTwoMode::ScaleByNormV => vn,
        LemmaTwoMode::ScaleBySqrtEta1 => top.value.max(T::zero()).sqrt(),
    };
    let x: Vec<Complex<T>> = top.vector.iter().map(|&c| c * s).collect();
    let xn = vec_norm(&x);
    let xx: Vec<Complex<T>> = x.iter().map(|&c| c * xn).collect();
    let vv: Vec<Complex<T>> = v.iter().map(|&c| c * vn).collect();
    let lhs = phase_aligned_distance(&xx, &vv)?.distance;
    let delta = hermitian_spectral_norm(&(x_mat - &CMatrix::outer(v, v)));
    let rhs = T::lit(2.0 * std::f64::consts::SQRT_2) * delta;
    let slack = T::lit(1e-10).max(T::epsilon() * T::lit(1e3)) * (vn * vn).max(T::one());
    Ok(LemmaTwoReport {
        lhs,
        rhs,
        hypothesis_met: delta < vn * vn / T::lit(2.0),
        holds: lhs <= rhs + slack,
        x,
    })
}
