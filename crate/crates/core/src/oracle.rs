//! Independent reference values for cross-validation.
//!
//! Nothing here reuses the numeric kernels it is meant to check: the Poisson
//! moment sums in the opposite direction with its own truncation bound, the
//! Hilbert norm uses incomplete gamma functions instead of quadrature, and
//! the small-count moments enumerate atom configurations exactly.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, gamma_lr};

use crate::error::{invalid, Error, Result};
use crate::mark_space::{IntensityMeasure, Mark, MarkSpace};
use crate::semigroup::{lr_norm, DiagonalGenerator, ModelVector};
use crate::stochastic_integral::StepIntegrand;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleMethod {
    PmfSum,
    GammaClosedForm,
    Antiderivative,
    Exhaustive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub value: f64,
    pub method: OracleMethod,
    /// Bound on `|value − exact|`.
    pub error_bound: f64,
}

/// `ln k!` for `k = 0..=n` by cumulative sums.
fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

/// Exact `E|N − λ|^p`, `N ~ Poisson(λ)`, `p ∈ [1, 2]`.
///
/// Terms `t_k = P(N=k)|k−λ|^p` are summed from a cutoff `K` down to 0. For
/// `k > λ` the ratio `t_{k+1}/t_k <= λ/(k+1) · (1 + 1/(k−λ))^p =: ρ_k` is
/// decreasing, so the tail past `K` is at most `t_K ρ_K / (1 − ρ_K)`.
pub fn oracle_poisson_moment(lambda: f64, p: f64) -> Result<OracleResult> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!("rate must be positive, got {lambda}")));
    }
    if !(1.0..=2.0).contains(&p) {
        return Err(invalid("p", "p in [1, 2]", p));
    }
    let ratio = |k: f64| lambda / (k + 1.0) * (1.0 + 1.0 / (k - lambda)).powf(p);
    let mut cutoff = (2.0 * lambda + 2.0 * p + 2.0).ceil() as usize;
    let mut ln_fact = ln_factorials(cutoff);
    let term = |k: usize, lf: &[f64]| {
        ((k as f64) * lambda.ln() - lambda - lf[k]).exp() * (k as f64 - lambda).abs().powf(p)
    };
    let tail = loop {
        let rho = ratio(cutoff as f64);
        let bound = if rho < 1.0 {
            term(cutoff, &ln_fact) * rho / (1.0 - rho)
        } else {
            f64::INFINITY
        };
        if bound < 1e-18 {
            break bound;
        }
        cutoff += 8;
        ln_fact = ln_factorials(cutoff);
    };
    let mut sum = 0.0;
    for k in (0..=cutoff).rev() {
        sum += term(k, &ln_fact);
    }
    Ok(OracleResult {
        value: sum,
        method: OracleMethod::PmfSum,
        error_bound: tail + 4.0 * f64::EPSILON * (cutoff as f64 + 1.0) * sum,
    })
}

/// `|x|_{D_{A^m}(θ,2);δ}` on `(R^n, |·|_2)` via
/// `Σ_k x_k² λ_k^{2m} γ(2m(1−θ), 2λ_kδ) / (2λ_k)^{2m(1−θ)}`, `δ = ∞` allowed.
pub fn oracle_interp_norm_hilbert(
    gen: &DiagonalGenerator,
    x: &ModelVector,
    theta: f64,
    m: u32,
    delta: f64,
) -> Result<OracleResult> {
    if x.norm_exponent != 2.0 {
        return Err(Error::Unsupported(format!(
            "closed form needs the Hilbert norm r = 2, got r = {}",
            x.norm_exponent
        )));
    }
    if x.dim() != gen.dim() {
        return Err(invalid(
            "vector",
            "dimension matching the generator",
            format!("{} vs {}", x.dim(), gen.dim()),
        ));
    }
    if !(theta > 0.0 && theta < 1.0) || m == 0 || !(delta > 0.0) {
        return Err(invalid(
            "norm parameters",
            "0 < theta < 1, m >= 1, delta > 0",
            format!("theta={theta}, m={m}, delta={delta}"),
        ));
    }
    let a = 2.0 * m as f64 * (1.0 - theta);
    let complete = gamma(a);
    let mut sq = 0.0;
    for (xk, &l) in x.coeffs.iter().zip(gen.eigenvalues()) {
        if *xk == 0.0 {
            continue;
        }
        let lower = if delta.is_finite() {
            gamma_lr(a, 2.0 * l * delta) * complete
        } else {
            complete
        };
        sq += xk * xk * l.powi(2 * m as i32) * lower / (2.0 * l).powf(a);
    }
    let value = sq.sqrt();
    Ok(OracleResult {
        value,
        method: OracleMethod::GammaClosedForm,
        error_bound: 1e-12 * value,
    })
}

/// `∫_0^t (t − r + s)^{−α} dr = (s^{1−α} − (t+s)^{1−α}) / (α − 1)`, `α > 1`.
pub fn kernel_antiderivative(t: f64, s: f64, alpha: f64) -> Result<OracleResult> {
    if !(alpha > 1.0) || !(t >= 0.0) || !(s > 0.0) {
        return Err(invalid(
            "kernel arguments",
            "alpha > 1, t >= 0, s > 0",
            format!("alpha={alpha}, t={t}, s={s}"),
        ));
    }
    let e = 1.0 - alpha;
    // s^e − (t+s)^e = s^e (1 − (1 + t/s)^e), with the bracket by expm1.
    let value = -s.powf(e) * (e * (t / s).ln_1p()).exp_m1() / (alpha - 1.0);
    Ok(OracleResult {
        value,
        method: OracleMethod::Antiderivative,
        error_bound: 8.0 * f64::EPSILON * value.abs(),
    })
}

/// Largest atom count enumerated by [`oracle_tiny_paths`].
pub const MAX_TINY_ATOMS: usize = 3;

/// `E|I(ξ)(T)|^q` by conditioning on `N <= max_atoms` atoms.
///
/// Given `N`, atom times are i.i.d. uniform on `(0, T]` and marks i.i.d.
/// `ν/ν(S)`; a jump depends only on the step containing the time and the
/// label, so each conditional expectation is a finite sum over
/// `(step, label)^N`. The neglected part is bounded using
/// `|I(T)| <= N·J + D` with `J` the largest jump norm and `D` the compensator
/// norm.
pub fn oracle_tiny_paths(
    xi: &StepIntegrand,
    nu: &IntensityMeasure,
    q: f64,
    max_atoms: usize,
    tolerance: f64,
) -> Result<OracleResult> {
    if max_atoms > MAX_TINY_ATOMS {
        return Err(invalid("max_atoms", "at most 3", max_atoms));
    }
    if !(q >= 1.0 && q.is_finite()) {
        return Err(invalid("q", "finite q >= 1", q));
    }
    match nu.space() {
        MarkSpace::Finite { .. } => {}
        MarkSpace::Interval { .. } => {
            return Err(Error::Unsupported(
                "exhaustive enumeration needs a finite mark space".into(),
            ))
        }
    };
    let weights = nu.weights().expect("finite intensity has weights");
    let mass = nu.total_mass();
    let horizon = xi.horizon();
    let r = xi.norm_exponent();
    let dim = xi.dim();
    let lambda = mass * horizon;
    if mass == 0.0 {
        return Ok(OracleResult {
            value: 0.0,
            method: OracleMethod::Exhaustive,
            error_bound: 0.0,
        });
    }

    // Outcomes of one atom: (probability, jump vector).
    let mut outcomes: Vec<(f64, Vec<f64>)> = Vec::new();
    let part = xi.partition();
    let covered = *part.last().unwrap();
    for (j, piece) in xi.pieces().iter().enumerate() {
        let time_prob = (part[j + 1] - part[j]) / horizon;
        for (l, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                outcomes.push((time_prob * w / mass, piece.eval(Mark::Label(l))?));
            }
        }
    }
    if covered < horizon {
        outcomes.push(((horizon - covered) / horizon, vec![0.0; dim]));
    }
    let mut drift = vec![0.0; dim];
    for (j, piece) in xi.pieces().iter().enumerate() {
        let len = part[j + 1] - part[j];
        for (l, &w) in weights.iter().enumerate() {
            for (d, v) in drift.iter_mut().zip(piece.eval(Mark::Label(l))?) {
                *d -= len * w * v;
            }
        }
    }

    let pmf = |n: usize| {
        let ln: f64 = (1..=n).map(|k| (k as f64).ln()).sum();
        (n as f64 * lambda.ln() - lambda - ln).exp()
    };

    let mut value = 0.0;
    let mut stack: Vec<(usize, f64, Vec<f64>)> = vec![(0, 1.0, drift.clone())];
    let mut conditional = vec![0.0; max_atoms + 1];
    while let Some((n, prob, v)) = stack.pop() {
        conditional[n] += prob * lr_norm(&v, r).powf(q);
        if n < max_atoms {
            for (pr, jump) in &outcomes {
                let next: Vec<f64> = v.iter().zip(jump).map(|(a, b)| a + b).collect();
                stack.push((n + 1, prob * pr, next));
            }
        }
    }
    for (n, c) in conditional.iter().enumerate() {
        value += pmf(n) * c;
    }

    let big_jump = outcomes
        .iter()
        .map(|(_, j)| lr_norm(j, r))
        .fold(0.0, f64::max);
    let d = lr_norm(&drift, r);
    let mut bound = 0.0;
    let mut n = max_atoms + 1;
    loop {
        let term = pmf(n) * (n as f64 * big_jump + d).powf(q);
        bound += term;
        // Terms eventually decrease geometrically with ratio below 1/2.
        if n as f64 > 2.0 * lambda + 2.0 * q + 2.0 && term <= 1e-20 * bound.max(1e-300) {
            break;
        }
        if n > 10_000 {
            return Err(Error::Numerical("tail bound did not converge".into()));
        }
        n += 1;
    }
    if bound > tolerance {
        return Err(Error::Numerical(format!(
            "truncation at {max_atoms} atoms leaves error bound {bound:.3e} above tolerance {tolerance:.3e}"
        )));
    }
    Ok(OracleResult {
        value,
        method: OracleMethod::Exhaustive,
        error_bound: bound + 1e-14 * value,
    })
}
