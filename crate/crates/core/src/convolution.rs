//! Stochastic convolution `SC(ξ)(t) = ∫_0^t ∫_S e^{-(t-r)A} ξ(r,x) η̃(dx,dr)`
//! for a diagonal generator, exact per realization.
//!
//! Between consecutive breakpoints (atom times and partition points) the
//! path solves `u' = -Au - m_j` with constant drift `m_j = ∫_S ξ_j dν`, so per
//! mode `u_k(t) = e^{-(t-s)λ_k} u_k(s) - (1 - e^{-(t-s)λ_k})/λ_k · m_{j,k}`.

use std::io::Write;

use crate::error::{invalid, Error, Result};
use crate::mark_space::IntensityMeasure;
use crate::prm::AtomList;
use crate::quadrature::gl16;
use crate::semigroup::{DiagonalGenerator, InterpolationNorm, ModelVector, NormParams};
use crate::stochastic_integral::{CompensatedIntegrand, StepIntegrand};

/// Relative disagreement above which the time quadrature is reported as
/// unresolved.
pub const REFINEMENT_LIMIT: f64 = 0.01;

/// First panel of each segment spans `GRADING_START / λ_max`; later panels
/// double in width.
const GRADING_START: f64 = 0.25;

/// `(1 - e^{-hλ}) / λ`, accurate for small `hλ`.
fn decay_integral(h: f64, lambda: f64) -> f64 {
    -(-h * lambda).exp_m1() / lambda
}

fn check_dims(xi: &StepIntegrand, gen: &DiagonalGenerator) -> Result<()> {
    if xi.dim() != gen.dim() {
        return Err(invalid(
            "integrand",
            "dimension matching the generator",
            format!("{} vs {}", xi.dim(), gen.dim()),
        ));
    }
    Ok(())
}

/// `SC(ξ)(t)` by the direct formula: damped atom contributions minus the
/// damped compensator, each step integrated in closed form.
pub fn convolve(
    xi: &StepIntegrand,
    atoms: &AtomList,
    nu: &IntensityMeasure,
    gen: &DiagonalGenerator,
    t: f64,
) -> Result<ModelVector> {
    check_dims(xi, gen)?;
    let horizon = xi.horizon().min(atoms.horizon());
    if !(0.0..=horizon).contains(&t) {
        return Err(Error::Domain(format!("time {t} outside [0, {horizon}]")));
    }
    let bound = CompensatedIntegrand::new(xi, nu)?;
    let lambdas = gen.eigenvalues();
    let mut out = vec![0.0; xi.dim()];
    let mut jump = vec![0.0; xi.dim()];
    for a in atoms.atoms().iter().take_while(|a| a.time <= t) {
        jump.iter_mut().for_each(|v| *v = 0.0);
        bound.add_jump(a, &mut jump)?;
        for ((o, j), l) in out.iter_mut().zip(&jump).zip(lambdas) {
            *o += (-(t - a.time) * l).exp() * j;
        }
    }
    for (w, m) in xi.partition().windows(2).zip(bound.drift()) {
        let (a, b) = (w[0].min(t), w[1].min(t));
        if b > a {
            for ((o, mk), l) in out.iter_mut().zip(m).zip(lambdas) {
                *o -= (-(t - b) * l).exp() * decay_integral(b - a, *l) * mk;
            }
        }
    }
    Ok(ModelVector {
        coeffs: out,
        norm_exponent: xi.norm_exponent(),
    })
}

/// Piece of the path on `[start, end]` with no atoms or drift changes inside.
#[derive(Debug, Clone, PartialEq)]
struct Segment {
    start: f64,
    end: f64,
    /// Value at `start`, after any jump there.
    value: Vec<f64>,
    drift: Vec<f64>,
}

/// Exact path of `SC(ξ)` on `[0, T]`, stored segment by segment, with values
/// at a requested grid (atom times added).
#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionPath {
    eigenvalues: Vec<f64>,
    norm_exponent: f64,
    horizon: f64,
    segments: Vec<Segment>,
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl ConvolutionPath {
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn norm_exponent(&self) -> f64 {
        self.norm_exponent
    }

    /// Grid times, including atom times.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Right-continuous values at [`times`](Self::times).
    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    fn segment_at(&self, t: f64) -> usize {
        let i = self.segments.partition_point(|s| s.start <= t);
        i.saturating_sub(1)
    }

    fn eval_segment(&self, seg: &Segment, t: f64, out: &mut [f64]) {
        let h = t - seg.start;
        for (((o, v), m), l) in out
            .iter_mut()
            .zip(&seg.value)
            .zip(&seg.drift)
            .zip(&self.eigenvalues)
        {
            *o = (-h * l).exp() * v - decay_integral(h, *l) * m;
        }
    }

    /// Right-continuous value `SC(t)`.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::Domain(format!(
                "time {t} outside [0, {}]",
                self.horizon
            )));
        }
        let mut out = vec![0.0; self.dim()];
        self.eval_segment(&self.segments[self.segment_at(t)], t, &mut out);
        Ok(out)
    }

    /// The path multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let s = |v: &Vec<f64>| v.iter().map(|x| c * x).collect::<Vec<_>>();
        Self {
            segments: self
                .segments
                .iter()
                .map(|seg| Segment {
                    value: s(&seg.value),
                    drift: s(&seg.drift),
                    ..*seg
                })
                .collect(),
            values: self.values.iter().map(s).collect(),
            ..self.clone()
        }
    }

    /// CSV with header `t,c1,...,cn`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let header: Vec<String> = (1..=self.dim()).map(|k| format!("c{k}")).collect();
        writeln!(out, "t,{}", header.join(","))?;
        for (t, v) in self.times.iter().zip(&self.values) {
            let cols: Vec<String> = v.iter().map(f64::to_string).collect();
            writeln!(out, "{t},{}", cols.join(","))?;
        }
        Ok(())
    }
}

/// Path of `SC(ξ)` by the segment recursion, reported at `grid` plus atom
/// times.
pub fn convolution_path(
    xi: &StepIntegrand,
    atoms: &AtomList,
    nu: &IntensityMeasure,
    gen: &DiagonalGenerator,
    grid: &[f64],
) -> Result<ConvolutionPath> {
    check_dims(xi, gen)?;
    let horizon = xi.horizon().min(atoms.horizon());
    if grid.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(invalid("grid", "sorted", format!("{grid:?}")));
    }
    if let Some(t) = grid.iter().find(|t| !(0.0..=horizon).contains(*t)) {
        return Err(Error::Domain(format!("grid time {t} outside [0, {horizon}]")));
    }
    let bound = CompensatedIntegrand::new(xi, nu)?;
    let lambdas = gen.eigenvalues();
    let dim = xi.dim();
    let in_range: Vec<_> = atoms.atoms().iter().filter(|a| a.time <= horizon).collect();

    let mut breaks = vec![0.0, horizon];
    breaks.extend(in_range.iter().map(|a| a.time));
    breaks.extend(xi.partition().iter().copied().filter(|&t| t <= horizon));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let zero = vec![0.0; dim];
    let mut segments = Vec::with_capacity(breaks.len());
    let mut value = zero.clone();
    let mut next_atom = 0;
    for w in breaks.windows(2) {
        let (start, end) = (w[0], w[1]);
        while next_atom < in_range.len() && in_range[next_atom].time <= start {
            bound.add_jump(in_range[next_atom], &mut value)?;
            next_atom += 1;
        }
        let drift = match xi.piece_index(end) {
            Some(j) => bound.drift()[j].clone(),
            None => zero.clone(),
        };
        let h = end - start;
        let next: Vec<f64> = value
            .iter()
            .zip(&drift)
            .zip(lambdas)
            .map(|((v, m), l)| (-h * l).exp() * v - decay_integral(h, *l) * m)
            .collect();
        segments.push(Segment {
            start,
            end,
            value: std::mem::replace(&mut value, next),
            drift,
        });
    }
    // Atoms at the horizon jump into a degenerate last segment.
    let mut tail = false;
    while next_atom < in_range.len() {
        bound.add_jump(in_range[next_atom], &mut value)?;
        next_atom += 1;
        tail = true;
    }
    if tail || segments.is_empty() {
        segments.push(Segment {
            start: horizon,
            end: horizon,
            value,
            drift: zero,
        });
    }

    let mut times: Vec<f64> = grid.to_vec();
    times.extend(in_range.iter().map(|a| a.time));
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut path = ConvolutionPath {
        eigenvalues: lambdas.to_vec(),
        norm_exponent: xi.norm_exponent(),
        horizon,
        segments,
        times,
        values: Vec::new(),
    };
    path.values = path
        .times
        .iter()
        .map(|&t| path.eval(t))
        .collect::<Result<_>>()?;
    Ok(path)
}

/// `∫_0^T |u(t)|^p_{D_A(s,q);1} dt` along convolution paths.
#[derive(Debug, Clone)]
pub struct RegularityFunctional {
    norm: InterpolationNorm,
    p: f64,
    horizon: f64,
    lambda_max: f64,
    dim: usize,
}

impl RegularityFunctional {
    /// Functional with the smoothed norm parameter `θ + 1/p`.
    pub fn new(
        gen: &DiagonalGenerator,
        theta: f64,
        p: f64,
        q: f64,
        horizon: f64,
        norm_exponent: f64,
    ) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(invalid("p", "finite p > 1", p));
        }
        if !(theta > 0.0 && theta < 1.0 - 1.0 / p) {
            return Err(invalid("theta", "0 < theta < 1 - 1/p", theta));
        }
        Self::at_parameter(gen, theta + 1.0 / p, p, q, horizon, norm_exponent)
    }

    /// Functional with norm parameter `s` used as given.
    pub fn at_parameter(
        gen: &DiagonalGenerator,
        s: f64,
        p: f64,
        q: f64,
        horizon: f64,
        norm_exponent: f64,
    ) -> Result<Self> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(invalid("p", "finite p >= 1", p));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(invalid("horizon", "finite T > 0", horizon));
        }
        Ok(Self {
            norm: InterpolationNorm::new(gen, NormParams::new(s, q), norm_exponent)?,
            p,
            horizon,
            lambda_max: gen.max_eigenvalue(),
            dim: gen.dim(),
        })
    }

    fn integrand(&self, coeffs: &[f64]) -> Result<f64> {
        let q = self.norm.params().q;
        let pow = self.norm.norm_pow(coeffs)?;
        Ok(if self.p == q { pow } else { pow.powf(self.p / q) })
    }

    /// Panel breaks on `[a, b]` graded geometrically away from `a`, where
    /// the transients `e^{-(t-a)λ_k}` start.
    fn panels(&self, a: f64, b: f64) -> Vec<f64> {
        let mut h = GRADING_START / self.lambda_max;
        let mut out = vec![a];
        let mut x = a;
        while x + h < b {
            x += h;
            out.push(x);
            h = 2.0 * (x - a);
        }
        out.push(b);
        out
    }

    fn integrate(&self, path: &ConvolutionPath, split: usize) -> Result<f64> {
        if path.dim() != self.dim {
            return Err(invalid(
                "path",
                "dimension matching the generator",
                format!("{} vs {}", path.dim(), self.dim),
            ));
        }
        if self.horizon > path.horizon {
            return Err(Error::Domain(format!(
                "functional horizon {} beyond path horizon {}",
                self.horizon, path.horizon
            )));
        }
        let rule = gl16();
        let mut buf = vec![0.0; path.dim()];
        let mut total = 0.0;
        for seg in &path.segments {
            let end = seg.end.min(self.horizon);
            if end <= seg.start {
                continue;
            }
            let breaks = self.panels(seg.start, end);
            for w in breaks.windows(2) {
                let step = (w[1] - w[0]) / split as f64;
                for i in 0..split {
                    let lo = w[0] + i as f64 * step;
                    let hi = if i + 1 == split { w[1] } else { lo + step };
                    for (t, wt) in rule.mapped(lo, hi) {
                        path.eval_segment(seg, t, &mut buf);
                        total += wt * self.integrand(&buf)?;
                    }
                }
            }
        }
        Ok(total)
    }

    /// Value of the functional on one path.
    pub fn eval(&self, path: &ConvolutionPath) -> Result<f64> {
        self.integrate(path, 1)
    }

    /// Relative gap between the standard panels and panels halved.
    pub fn refinement_gap(&self, path: &ConvolutionPath) -> Result<f64> {
        let coarse = self.integrate(path, 1)?;
        let fine = self.integrate(path, 2)?;
        let scale = coarse.abs().max(fine.abs());
        Ok(if scale == 0.0 {
            0.0
        } else {
            (coarse - fine).abs() / scale
        })
    }

    /// `Error::Numerical` if halving the panels moves the value by more than
    /// [`REFINEMENT_LIMIT`].
    pub fn check_refinement(&self, path: &ConvolutionPath) -> Result<f64> {
        let gap = self.refinement_gap(path)?;
        if gap > REFINEMENT_LIMIT {
            return Err(Error::Numerical(format!(
                "time quadrature unresolved: halving panels changes the functional by {:.3}%",
                100.0 * gap
            )));
        }
        Ok(gap)
    }
}

/// `∫_0^T |SC(t)|^p_{D_A(θ+1/p,q);1} dt` for one path.
pub fn regularity_functional(
    path: &ConvolutionPath,
    gen: &DiagonalGenerator,
    theta: f64,
    p: f64,
    q: f64,
    horizon: f64,
) -> Result<f64> {
    RegularityFunctional::new(gen, theta, p, q, horizon, path.norm_exponent())?.eval(path)
}
