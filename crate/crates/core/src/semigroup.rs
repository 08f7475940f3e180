//! Diagonal analytic semigroups and real-interpolation norms.
//!
//! The generator acts diagonally on a finite spectral basis with strictly
//! positive eigenvalues, so `e^{-tA}` and `A^m e^{-tA}` are coefficientwise
//! multipliers. Interpolation norms
//!
//! ```text
//! |x|^q_{D_{A^m}(θ,q);δ} = ∫_0^δ |t^{m(1-θ)} A^m e^{-tA} x|^q dt/t   (+ |x|^q)
//! ```
//!
//! are computed with the substitution `t = e^u`, which turns `dt/t` into a
//! flat measure and the integrand into a smooth function of `u`, integrated
//! by composite Gauss–Legendre. The small-`t` tail is cut where the
//! envelope `t^{m(1-θ)q} |A^m x|^q` drops below `1e-16` of the running total.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quadrature::gl16;

/// Relative disagreement between two panel widths that flags non-convergence.
pub const REFINEMENT_TOLERANCE: f64 = 1e-8;
const TAIL_FRACTION: f64 = 1e-16;
const BASE_PANEL: f64 = 0.5;
const MAX_PANELS: usize = 20_000;

/// The generator `A`, diagonal with positive eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalGenerator {
    eigenvalues: Vec<f64>,
}

impl DiagonalGenerator {
    pub fn new(eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(invalid("eigenvalues", "at least one eigenvalue", "none"));
        }
        if let Some(l) = eigenvalues.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(invalid("eigenvalues", "finite and strictly positive", l));
        }
        Ok(Self { eigenvalues })
    }

    /// Dirichlet Laplacian on (0, π): `λ_k = k²`, `k = 1..=n`.
    pub fn laplacian_1d(n: usize) -> Result<Self> {
        Self::new((1..=n).map(|k| (k * k) as f64).collect())
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(0.0, f64::max)
    }

    fn check_dim(&self, x: &ModelVector) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(invalid(
                "vector",
                "dimension matching the generator",
                format!("{} vs {}", x.dim(), self.dim()),
            ));
        }
        Ok(())
    }
}

/// A vector of `E = (R^n, |·|_r)` in the spectral basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelVector {
    pub coeffs: Vec<f64>,
    pub norm_exponent: f64,
}

impl ModelVector {
    pub fn new(coeffs: Vec<f64>, norm_exponent: f64) -> Result<Self> {
        if !(norm_exponent >= 1.0 && norm_exponent.is_finite()) {
            return Err(invalid("norm_exponent", "finite r >= 1", norm_exponent));
        }
        if let Some(c) = coeffs.iter().find(|c| !c.is_finite()) {
            return Err(invalid("coefficients", "finite reals", c));
        }
        Ok(Self {
            coeffs,
            norm_exponent,
        })
    }

    pub fn zeros(n: usize, norm_exponent: f64) -> Self {
        Self {
            coeffs: vec![0.0; n],
            norm_exponent,
        }
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn norm(&self) -> f64 {
        lr_norm(&self.coeffs, self.norm_exponent)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|v| c * v).collect(),
            norm_exponent: self.norm_exponent,
        }
    }
}

/// `|v|_r`.
pub fn lr_norm(v: &[f64], r: f64) -> f64 {
    if r == 2.0 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    } else if r == 1.0 {
        v.iter().map(|x| x.abs()).sum()
    } else {
        let big = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if big == 0.0 {
            return 0.0;
        }
        big * v.iter().map(|x| (x.abs() / big).powf(r)).sum::<f64>().powf(1.0 / r)
    }
}

/// `e^{-tA} x`.
pub fn apply_semigroup(gen: &DiagonalGenerator, t: f64, x: &ModelVector) -> Result<ModelVector> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("semigroup time must be >= 0, got {t}")));
    }
    gen.check_dim(x)?;
    Ok(ModelVector {
        coeffs: x
            .coeffs
            .iter()
            .zip(&gen.eigenvalues)
            .map(|(v, l)| v * (-t * l).exp())
            .collect(),
        norm_exponent: x.norm_exponent,
    })
}

/// `A^m e^{-tA} x` for `t > 0`.
pub fn apply_am_semigroup(
    gen: &DiagonalGenerator,
    m: u32,
    t: f64,
    x: &ModelVector,
) -> Result<ModelVector> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!(
            "A^m e^(-tA) requires t > 0, got {t}"
        )));
    }
    if m == 0 {
        return Err(invalid("m", "m >= 1", m));
    }
    gen.check_dim(x)?;
    Ok(ModelVector {
        coeffs: x
            .coeffs
            .iter()
            .zip(&gen.eigenvalues)
            .map(|(v, l)| v * l.powi(m as i32) * (-t * l).exp())
            .collect(),
        norm_exponent: x.norm_exponent,
    })
}

/// Parameters of `|·|_{D_{A^m}(θ,q);δ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    pub theta: f64,
    pub q: f64,
    /// Upper integration limit; `f64::INFINITY` allowed.
    pub delta: f64,
    pub m: u32,
    /// Adds `|x|^q` (the inhomogeneous form).
    pub include_base: bool,
}

impl NormParams {
    /// Homogeneous norm with `m = 1`, `δ = 1`.
    pub fn new(theta: f64, q: f64) -> Self {
        Self {
            theta,
            q,
            delta: 1.0,
            m: 1,
            include_base: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(invalid("theta", "0 < theta < 1", self.theta));
        }
        if !(self.q >= 1.0 && self.q.is_finite()) {
            return Err(invalid("q", "finite q >= 1", self.q));
        }
        if !(self.delta > 0.0) {
            return Err(invalid("delta", "delta > 0 (infinity allowed)", self.delta));
        }
        if self.m == 0 {
            return Err(invalid("m", "m >= 1", self.m));
        }
        Ok(())
    }

    /// `m(1-θ)q`, the small-`t` power of the integrand.
    fn small_t_power(&self) -> f64 {
        self.m as f64 * (1.0 - self.theta) * self.q
    }
}

/// Integrates `f(u)` over `(-inf, top]` (or the whole line when `top` is
/// `None`), where `f(u) <= env * e^{a u}` and `f` is decreasing beyond
/// `decay_from`. `pivot` marks where the integrand stops looking like a pure
/// power of `t`.
struct LogScale {
    a: f64,
    env: f64,
    top: Option<f64>,
    pivot: f64,
    decay_from: f64,
}

impl LogScale {
    fn integrate<F: Fn(f64) -> f64>(&self, f: &F) -> Result<f64> {
        let coarse = self.integrate_with(f, BASE_PANEL)?;
        let fine = self.integrate_with(f, 0.5 * BASE_PANEL)?;
        let scale = fine.abs().max(coarse.abs());
        if (coarse - fine).abs() > REFINEMENT_TOLERANCE * scale {
            return Err(Error::Numerical(format!(
                "interpolation-norm quadrature did not converge: {coarse} vs {fine}"
            )));
        }
        Ok(fine)
    }

    fn integrate_with<F: Fn(f64) -> f64>(&self, f: &F, h: f64) -> Result<f64> {
        if self.env == 0.0 {
            return Ok(0.0);
        }
        let rule = gl16();
        let mut total = 0.0;
        let start = match self.top {
            Some(top) => top,
            None => {
                let mut u = self.pivot;
                let mut panels = 0;
                loop {
                    let v = rule.integrate(u, u + h, f);
                    total += v;
                    u += h;
                    panels += 1;
                    if u > self.decay_from && v <= 1e-17 * total {
                        break;
                    }
                    if panels > MAX_PANELS {
                        return Err(Error::Numerical(
                            "upper tail of interpolation integral does not decay".into(),
                        ));
                    }
                }
                self.pivot
            }
        };
        let max_width = (8.0 / self.a).max(h);
        let mut hi = start;
        let mut width = h;
        let mut panels = 0;
        loop {
            let lo = hi - width;
            total += rule.integrate(lo, hi, f);
            hi = lo;
            let tail = self.env * (self.a * hi).exp() / self.a;
            if tail <= TAIL_FRACTION * total || tail == 0.0 {
                break;
            }
            if hi < self.pivot - 3.0 {
                width = (width * 1.5).min(max_width);
            }
            panels += 1;
            if panels > MAX_PANELS {
                return Err(Error::Numerical(
                    "lower tail of interpolation integral does not decay".into(),
                ));
            }
        }
        Ok(total)
    }
}

/// Precomputed evaluator of `|·|_{D_{A^m}(θ,q);δ}` on `(R^n, |·|_r)`.
///
/// When `q == r` the integrand separates over modes, so the norm reduces to
/// `Σ_k |x_k|^q W_k` with per-mode weights computed once by the same
/// quadrature.
#[derive(Debug, Clone)]
pub struct InterpolationNorm {
    eigenvalues: Vec<f64>,
    params: NormParams,
    norm_exponent: f64,
    mode_weights: Option<Vec<f64>>,
}

impl InterpolationNorm {
    pub fn new(gen: &DiagonalGenerator, params: NormParams, norm_exponent: f64) -> Result<Self> {
        params.validate()?;
        if !(norm_exponent >= 1.0 && norm_exponent.is_finite()) {
            return Err(invalid("norm_exponent", "finite r >= 1", norm_exponent));
        }
        let mode_weights = if params.q == norm_exponent {
            Some(
                gen.eigenvalues
                    .iter()
                    .map(|&l| mode_weight(l, &params))
                    .collect::<Result<Vec<_>>>()?,
            )
        } else {
            None
        };
        Ok(Self {
            eigenvalues: gen.eigenvalues.clone(),
            params,
            norm_exponent,
            mode_weights,
        })
    }

    pub fn params(&self) -> &NormParams {
        &self.params
    }

    /// Per-mode weights `W_k = ∫_0^δ (t^{m(1-θ)} λ_k^m e^{-tλ_k})^q dt/t`,
    /// present when `q == r`.
    pub fn mode_weights(&self) -> Option<&[f64]> {
        self.mode_weights.as_deref()
    }

    /// `|x|^q_{D}` (the integral, plus `|x|^q` in the inhomogeneous form).
    pub fn norm_pow(&self, coeffs: &[f64]) -> Result<f64> {
        if coeffs.len() != self.eigenvalues.len() {
            return Err(invalid(
                "vector",
                "dimension matching the generator",
                format!("{} vs {}", coeffs.len(), self.eigenvalues.len()),
            ));
        }
        let q = self.params.q;
        let integral = match &self.mode_weights {
            Some(w) => coeffs
                .iter()
                .zip(w)
                .map(|(x, w)| if *x == 0.0 { 0.0 } else { w * pow_abs(*x, q) })
                .sum(),
            None => self.integral_general(coeffs)?,
        };
        let base = if self.params.include_base {
            pow_abs(lr_norm(coeffs, self.norm_exponent), q)
        } else {
            0.0
        };
        Ok(integral + base)
    }

    pub fn norm(&self, coeffs: &[f64]) -> Result<f64> {
        Ok(self.norm_pow(coeffs)?.powf(1.0 / self.params.q))
    }

    fn integral_general(&self, coeffs: &[f64]) -> Result<f64> {
        let NormParams { theta, q, delta, m, .. } = self.params;
        let mi = m as i32;
        let r = self.norm_exponent;
        let lmin = self.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        let lmax = self.eigenvalues.iter().copied().fold(0.0, f64::max);
        let am_x: Vec<f64> = coeffs
            .iter()
            .zip(&self.eigenvalues)
            .map(|(x, l)| x * l.powi(mi))
            .collect();
        let env = pow_abs(lr_norm(&am_x, r), q);
        let power = m as f64 * (1.0 - theta);
        let scratch = std::cell::RefCell::new(vec![0.0; coeffs.len()]);
        let f = |u: f64| {
            let t = u.exp();
            let mut buf = scratch.borrow_mut();
            for ((b, ax), l) in buf.iter_mut().zip(&am_x).zip(&self.eigenvalues) {
                *b = ax * (-t * l).exp();
            }
            pow_abs(t.powf(power) * lr_norm(&buf, r), q)
        };
        LogScale {
            a: self.params.small_t_power(),
            env,
            top: delta.is_finite().then(|| delta.ln()),
            pivot: -lmax.ln(),
            decay_from: (power / lmin).ln() + 1.0,
        }
        .integrate(&f)
    }
}

/// `∫_0^δ (t^{m(1-θ)} λ^m e^{-tλ})^q dt/t = λ^{mq-a} ∫_0^{λδ} s^a e^{-qs} ds/s`
/// with `a = m(1-θ)q`.
fn mode_weight(lambda: f64, params: &NormParams) -> Result<f64> {
    let a = params.small_t_power();
    let q = params.q;
    let f = |u: f64| (a * u - q * u.exp()).exp();
    let top = params
        .delta
        .is_finite()
        .then(|| (lambda * params.delta).ln());
    let integral = LogScale {
        a,
        env: 1.0,
        top,
        pivot: (a / q).ln(),
        decay_from: (a / q).ln() + 1.0,
    }
    .integrate(&f)?;
    Ok(lambda.powf(params.m as f64 * q - a) * integral)
}

fn pow_abs(x: f64, q: f64) -> f64 {
    if q == 2.0 {
        x * x
    } else {
        x.abs().powf(q)
    }
}

/// `|x|_{D}` for a single vector.
pub fn interpolation_norm(
    gen: &DiagonalGenerator,
    x: &ModelVector,
    params: NormParams,
) -> Result<f64> {
    gen.check_dim(x)?;
    InterpolationNorm::new(gen, params, x.norm_exponent)?.norm(&x.coeffs)
}

/// Evaluators for both sides of `D_A(θ+1/p, q) = D_{A²}(θ/2 + 1/(2p), q)`,
/// homogeneous norms with `δ = 1`.
#[derive(Debug, Clone)]
pub struct Reiteration {
    first_power: InterpolationNorm,
    second_power: InterpolationNorm,
}

impl Reiteration {
    pub fn new(gen: &DiagonalGenerator, theta: f64, p: f64, q: f64, r: f64) -> Result<Self> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(invalid("p", "finite p >= 1", p));
        }
        if !(theta > 0.0 && theta < 1.0 - 1.0 / p) {
            return Err(invalid("theta", "0 < theta < 1 - 1/p", theta));
        }
        let first = NormParams {
            theta: theta + 1.0 / p,
            q,
            delta: 1.0,
            m: 1,
            include_base: false,
        };
        let second = NormParams {
            theta: 0.5 * theta + 0.5 / p,
            m: 2,
            ..first
        };
        Ok(Self {
            first_power: InterpolationNorm::new(gen, first, r)?,
            second_power: InterpolationNorm::new(gen, second, r)?,
        })
    }

    pub fn ratio(&self, coeffs: &[f64]) -> Result<f64> {
        let den = self.second_power.norm(coeffs)?;
        if den == 0.0 {
            return Err(Error::UndefinedRatio(
                "reiteration ratio of the zero vector".into(),
            ));
        }
        Ok(self.first_power.norm(coeffs)? / den)
    }
}

/// `|x|_{D_A(θ+1/p,q);1} / |x|_{D_{A²}(θ/2+1/(2p),q);1}`.
pub fn reiteration_check(
    gen: &DiagonalGenerator,
    x: &ModelVector,
    theta: f64,
    p: f64,
    q: f64,
) -> Result<f64> {
    gen.check_dim(x)?;
    Reiteration::new(gen, theta, p, q, x.norm_exponent)?.ratio(&x.coeffs)
}
