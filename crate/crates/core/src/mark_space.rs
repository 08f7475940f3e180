//! Mark spaces and finite-activity intensity measures.
//!
//! Two kinds of mark space are supported: a finite set of labeled points
//! carrying nonnegative weights, and an interval `(eps, 1]` carrying a
//! density. Integration against the intensity is an exact sum for the
//! finite kind and a fixed composite Gauss–Legendre rule (64 log-spaced
//! panels) for the interval kind, so every integral is a finite weighted
//! sum over [`IntensityMeasure::nodes`].

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quadrature::{gl16, gl8, log_spaced};

/// Number of log-spaced panels used for density quadrature.
pub const DENSITY_PANELS: usize = 64;
/// Number of grid points of the inverse-CDF sampling table.
pub const SAMPLING_GRID: usize = 4096;

/// A point of the mark space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mark {
    /// Index into the labels of a finite mark space.
    Label(usize),
    /// A point of an interval mark space.
    Point(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum MarkSpace {
    Finite { labels: Vec<String> },
    Interval { eps: f64 },
}

impl MarkSpace {
    pub fn finite<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(invalid("marks", "at least one point", "0 points"));
        }
        Ok(MarkSpace::Finite { labels })
    }

    pub fn interval(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(invalid("eps", "0 < eps < 1", eps));
        }
        Ok(MarkSpace::Interval { eps })
    }

    /// Human-readable name of a mark.
    pub fn describe(&self, mark: Mark) -> String {
        match (self, mark) {
            (MarkSpace::Finite { labels }, Mark::Label(i)) => labels
                .get(i)
                .cloned()
                .unwrap_or_else(|| format!("label#{i}")),
            (_, Mark::Label(i)) => format!("label#{i}"),
            (_, Mark::Point(x)) => format!("{x}"),
        }
    }

    pub fn label_index(&self, name: &str) -> Option<usize> {
        match self {
            MarkSpace::Finite { labels } => labels.iter().position(|l| l == name),
            MarkSpace::Interval { .. } => None,
        }
    }
}

/// Named density forms for interval mark spaces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum Density {
    /// `value` on the whole interval.
    Constant { value: f64 },
    /// `scale * x^exponent`.
    Power { scale: f64, exponent: f64 },
    /// `scale * exp(-rate * x)`.
    Exponential { scale: f64, rate: f64 },
}

impl Density {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Density::Constant { value } => value,
            Density::Power { scale, exponent } => scale * x.powf(exponent),
            Density::Exponential { scale, rate } => scale * (-rate * x).exp(),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Density::Constant { value } => value.is_finite() && value >= 0.0,
            Density::Power { scale, exponent } => {
                scale.is_finite() && scale >= 0.0 && exponent.is_finite()
            }
            Density::Exponential { scale, rate } => {
                scale.is_finite() && scale >= 0.0 && rate.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(
                "density",
                "finite nonnegative scale and finite parameters",
                format!("{self:?}"),
            ))
        }
    }
}

#[derive(Debug, Clone)]
enum Law {
    Finite {
        weights: Vec<f64>,
        cumulative: Vec<f64>,
    },
    Interval {
        eps: f64,
        density: Density,
        grid: Vec<f64>,
        cdf: Vec<f64>,
    },
}

/// Finite intensity measure ν on a mark space.
#[derive(Debug, Clone)]
pub struct IntensityMeasure {
    space: MarkSpace,
    law: Law,
    nodes: Vec<(Mark, f64)>,
    total_mass: f64,
}

impl IntensityMeasure {
    /// Weighted finite set of labeled points.
    pub fn finite<S: Into<String>>(
        labels: impl IntoIterator<Item = S>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let space = MarkSpace::finite(labels)?;
        let n = match &space {
            MarkSpace::Finite { labels } => labels.len(),
            MarkSpace::Interval { .. } => unreachable!(),
        };
        if weights.len() != n {
            return Err(invalid(
                "weights",
                "one weight per mark",
                format!("{} weights for {n} marks", weights.len()),
            ));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(invalid("weights", "finite nonnegative reals", w));
        }
        let mut cumulative = Vec::with_capacity(n);
        let mut acc = 0.0;
        for &w in &weights {
            acc += w;
            cumulative.push(acc);
        }
        let nodes = weights
            .iter()
            .enumerate()
            .map(|(i, &w)| (Mark::Label(i), w))
            .collect();
        Ok(Self {
            space,
            law: Law::Finite {
                weights,
                cumulative,
            },
            nodes,
            total_mass: acc,
        })
    }

    /// Density on `(eps, 1]`.
    pub fn interval(eps: f64, density: Density) -> Result<Self> {
        let space = MarkSpace::interval(eps)?;
        density.validate()?;
        let breaks = log_spaced(eps, 1.0, DENSITY_PANELS + 1);
        let mut nodes = Vec::with_capacity(DENSITY_PANELS * gl16().order());
        for w in breaks.windows(2) {
            for (x, wt) in gl16().mapped(w[0], w[1]) {
                nodes.push((Mark::Point(x), wt * density.eval(x)));
            }
        }
        let total_mass: f64 = nodes.iter().map(|(_, w)| w).sum();
        if !total_mass.is_finite() {
            return Err(invalid("density", "finite total mass", total_mass));
        }
        let grid = log_spaced(eps, 1.0, SAMPLING_GRID);
        let mut cdf = Vec::with_capacity(SAMPLING_GRID);
        cdf.push(0.0);
        let mut acc = 0.0;
        for w in grid.windows(2) {
            acc += gl8().integrate(w[0], w[1], |x| density.eval(x));
            cdf.push(acc);
        }
        Ok(Self {
            space,
            law: Law::Interval {
                eps,
                density,
                grid,
                cdf,
            },
            nodes,
            total_mass,
        })
    }

    pub fn space(&self) -> &MarkSpace {
        &self.space
    }

    /// ν(S).
    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// Quadrature nodes `(mark, weight)`; for the finite kind these are the
    /// support points and their exact weights.
    pub fn nodes(&self) -> &[(Mark, f64)] {
        &self.nodes
    }

    /// Weights of a finite intensity, `None` for the interval kind.
    pub fn weights(&self) -> Option<&[f64]> {
        match &self.law {
            Law::Finite { weights, .. } => Some(weights),
            Law::Interval { .. } => None,
        }
    }

    /// ν(B) for a mark subset.
    pub fn measure_of(&self, set: &MarkSet) -> Result<f64> {
        match (&self.law, set) {
            (_, MarkSet::All) => Ok(self.total_mass),
            (Law::Finite { weights, .. }, MarkSet::Labels(ids)) => {
                let mut seen = vec![false; weights.len()];
                let mut sum = 0.0;
                for &i in ids {
                    let w = weights
                        .get(i)
                        .ok_or_else(|| invalid("window marks", "valid label index", i))?;
                    if !seen[i] {
                        seen[i] = true;
                        sum += w;
                    }
                }
                Ok(sum)
            }
            (Law::Interval { eps, density, .. }, MarkSet::Range { lo, hi }) => {
                let a = lo.max(*eps);
                let b = hi.min(1.0);
                if b <= a {
                    return Ok(0.0);
                }
                let breaks = log_spaced(a, b, DENSITY_PANELS + 1);
                Ok(crate::quadrature::composite(gl16(), &breaks, |x| {
                    density.eval(x)
                }))
            }
            _ => Err(Error::Domain(
                "mark subset kind does not match the mark space".into(),
            )),
        }
    }
}

/// A measurable subset of the mark space used by counting windows.
#[derive(Debug, Clone, PartialEq)]
pub enum MarkSet {
    All,
    Labels(Vec<usize>),
    /// Subinterval `(lo, hi]`.
    Range { lo: f64, hi: f64 },
}

impl MarkSet {
    pub fn contains(&self, mark: Mark) -> bool {
        match (self, mark) {
            (MarkSet::All, _) => true,
            (MarkSet::Labels(ids), Mark::Label(i)) => ids.contains(&i),
            (MarkSet::Range { lo, hi }, Mark::Point(x)) => x > *lo && x <= *hi,
            _ => false,
        }
    }
}

/// `∫_S |f(x)|^p ν(dx)` where `norm_at(x)` returns `|f(x)|_E`.
pub fn nu_integral<F>(norm_at: F, nu: &IntensityMeasure, p: f64) -> Result<f64>
where
    F: Fn(Mark) -> Result<f64>,
{
    if !(p >= 1.0) {
        return Err(invalid("p", "p >= 1", p));
    }
    let mut sum = 0.0;
    for &(mark, w) in nu.nodes() {
        let v = norm_at(mark)?;
        if !v.is_finite() {
            return Err(Error::Evaluation {
                mark: nu.space().describe(mark),
                value: v,
            });
        }
        if w > 0.0 && v != 0.0 {
            sum += w * v.abs().powf(p);
        }
    }
    Ok(sum)
}

/// Draws a mark from the normalized intensity ν/ν(S).
pub fn sample_mark<R: Rng + ?Sized>(nu: &IntensityMeasure, rng: &mut R) -> Result<Mark> {
    if !(nu.total_mass > 0.0) {
        return Err(Error::NullMeasure);
    }
    match &nu.law {
        Law::Finite { cumulative, .. } => {
            let u = rng.random::<f64>() * nu.total_mass;
            let idx = cumulative.partition_point(|&c| c <= u);
            // Guard against u landing on the top edge through rounding.
            let idx = idx.min(cumulative.len() - 1);
            let idx = last_positive(cumulative, idx);
            Ok(Mark::Label(idx))
        }
        Law::Interval { grid, cdf, .. } => {
            let total = *cdf.last().unwrap();
            let u = rng.random::<f64>() * total;
            let k = cdf.partition_point(|&c| c <= u).clamp(1, cdf.len() - 1);
            let (c0, c1) = (cdf[k - 1], cdf[k]);
            let (x0, x1) = (grid[k - 1], grid[k]);
            let frac = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
            let x = (x0 + frac.clamp(0.0, 1.0) * (x1 - x0)).clamp(x0, x1);
            // Marks live in (eps, 1].
            let x = if x <= grid[0] { 0.5 * (x0 + x1) } else { x };
            Ok(Mark::Point(x))
        }
    }
}

// Step back over zero-weight labels sharing the cumulative value.
fn last_positive(cumulative: &[f64], mut idx: usize) -> usize {
    while idx > 0 && cumulative[idx] == cumulative[idx - 1] {
        idx -= 1;
    }
    idx
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_point() -> IntensityMeasure {
        IntensityMeasure::finite(["a", "b"], vec![1.0, 2.0]).unwrap()
    }

    #[test]
    fn zero_integrand_integrates_to_zero() {
        let nu = two_point();
        assert_eq!(nu_integral(|_| Ok(0.0), &nu, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn finite_hand_sum() {
        let nu = two_point();
        let v = nu_integral(|_| Ok(1.0), &nu, 2.0).unwrap();
        assert!((v - 3.0).abs() < 1e-15);
    }

    #[test]
    fn interval_density_matches_antiderivative() {
        // ∫_{0.25}^{1} x · x^{-1.5} dx = 2(1 - 0.5) = 1
        let nu = IntensityMeasure::interval(
            0.25,
            Density::Power {
                scale: 1.0,
                exponent: -1.5,
            },
        )
        .unwrap();
        let v = nu_integral(
            |m| match m {
                Mark::Point(x) => Ok(x),
                _ => unreachable!(),
            },
            &nu,
            1.0,
        )
        .unwrap();
        assert!((v - 1.0).abs() < 1e-12, "{v}");
        // total mass ∫ x^{-1.5} = 2(0.25^{-0.5} - 1) = 2
        assert!((nu.total_mass() - 2.0).abs() < 1e-10);
    }

    #[test]
    fn total_mass_consistency() {
        let nu = IntensityMeasure::interval(
            0.1,
            Density::Exponential {
                scale: 3.0,
                rate: 2.0,
            },
        )
        .unwrap();
        let want = 3.0 / 2.0 * ((-0.2f64).exp() - (-2.0f64).exp());
        assert!((nu.total_mass() - want).abs() / want < 1e-10);
        let Law::Interval { cdf, .. } = &nu.law else {
            unreachable!()
        };
        assert!((cdf.last().unwrap() - want).abs() / want < 1e-10);
    }

    #[test]
    fn nonfinite_value_names_the_mark() {
        let nu = two_point();
        let err = nu_integral(
            |m| Ok(if m == Mark::Label(1) { f64::NAN } else { 1.0 }),
            &nu,
            2.0,
        )
        .unwrap_err();
        match err {
            Error::Evaluation { mark, .. } => assert_eq!(mark, "b"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn rejects_bad_construction() {
        assert!(IntensityMeasure::finite(Vec::<String>::new(), vec![]).is_err());
        assert!(IntensityMeasure::finite(["a"], vec![-1.0]).is_err());
        assert!(IntensityMeasure::finite(["a"], vec![1.0, 2.0]).is_err());
        assert!(IntensityMeasure::interval(0.0, Density::Constant { value: 1.0 }).is_err());
        assert!(IntensityMeasure::interval(1.0, Density::Constant { value: 1.0 }).is_err());
    }

    #[test]
    fn sampling_null_measure_fails() {
        let nu = IntensityMeasure::finite(["a"], vec![0.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(sample_mark(&nu, &mut rng), Err(Error::NullMeasure)));
        assert_eq!(nu_integral(|_| Ok(1.0), &nu, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn single_point_always_sampled() {
        let nu = IntensityMeasure::finite(["a"], vec![5.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            assert_eq!(sample_mark(&nu, &mut rng).unwrap(), Mark::Label(0));
        }
    }

    #[test]
    fn zero_weight_label_never_sampled() {
        let nu = IntensityMeasure::finite(["a", "b", "c"], vec![1.0, 0.0, 1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10_000 {
            assert_ne!(sample_mark(&nu, &mut rng).unwrap(), Mark::Label(1));
        }
    }

    #[test]
    fn binomial_frequency() {
        let nu = IntensityMeasure::finite(["a", "b"], vec![1.0, 3.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| sample_mark(&nu, &mut rng).unwrap() == Mark::Label(1))
            .count();
        let freq = hits as f64 / n as f64;
        let se = (0.75 * 0.25 / n as f64).sqrt();
        assert!((freq - 0.75).abs() < 3.0 * se, "freq={freq}");
    }

    #[test]
    fn uniform_density_mean() {
        let nu = IntensityMeasure::interval(1e-9, Density::Constant { value: 1.0 }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            match sample_mark(&nu, &mut rng).unwrap() {
                Mark::Point(x) => {
                    assert!(x > 1e-9 && x <= 1.0);
                    sum += x;
                }
                _ => unreachable!(),
            }
        }
        let mean = sum / n as f64;
        let se = (1.0 / 12.0 / n as f64).sqrt();
        assert!((mean - 0.5).abs() < 3.0 * se, "mean={mean}");
    }

    #[test]
    fn sampling_is_pure_in_rng_state() {
        let nu = IntensityMeasure::interval(
            0.01,
            Density::Power {
                scale: 2.0,
                exponent: -0.5,
            },
        )
        .unwrap();
        let a = sample_mark(&nu, &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
        let b = sample_mark(&nu, &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn measure_of_subsets() {
        let nu = two_point();
        assert_eq!(nu.measure_of(&MarkSet::Labels(vec![1])).unwrap(), 2.0);
        assert_eq!(nu.measure_of(&MarkSet::Labels(vec![0, 1, 1])).unwrap(), 3.0);
        let u = IntensityMeasure::interval(0.2, Density::Constant { value: 2.0 }).unwrap();
        let half = u.measure_of(&MarkSet::Range { lo: 0.5, hi: 1.0 }).unwrap();
        assert!((half - 1.0).abs() < 1e-13);
        let clipped = u.measure_of(&MarkSet::Range { lo: 0.0, hi: 0.5 }).unwrap();
        assert!((clipped - 0.6).abs() < 1e-13);
    }

    proptest! {
        #[test]
        fn homogeneous_of_degree_p(c in -5.0f64..5.0, p in 1.0f64..2.0,
                                   w0 in 0.0f64..3.0, w1 in 0.0f64..3.0,
                                   f0 in -2.0f64..2.0, f1 in -2.0f64..2.0) {
            let nu = IntensityMeasure::finite(["a", "b"], vec![w0, w1]).unwrap();
            let f = |m: Mark| Ok(match m { Mark::Label(0) => f0, _ => f1 });
            let base = nu_integral(|m| f(m).map(f64::abs), &nu, p).unwrap();
            let scaled = nu_integral(|m| f(m).map(|v| (c * v).abs()), &nu, p).unwrap();
            let want = c.abs().powf(p) * base;
            prop_assert!((scaled - want).abs() <= 1e-12 * want.max(1e-300));
        }

        #[test]
        fn monotone_in_weights(w0 in 0.0f64..3.0, w1 in 0.0f64..3.0, bump in 0.0f64..2.0,
                               f0 in -2.0f64..2.0, f1 in -2.0f64..2.0) {
            let f = |m: Mark| Ok(match m { Mark::Label(0) => f0.abs(), _ => f1.abs() });
            let lo = IntensityMeasure::finite(["a", "b"], vec![w0, w1]).unwrap();
            let hi = IntensityMeasure::finite(["a", "b"], vec![w0, w1 + bump]).unwrap();
            prop_assert!(nu_integral(f, &hi, 1.5).unwrap() >= nu_integral(f, &lo, 1.5).unwrap());
        }
    }
}
