//! Time-homogeneous Poisson random measures on `S × (0, T]`.

use std::io::{BufRead, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Error, Result};
use crate::mark_space::{sample_mark, IntensityMeasure, Mark, MarkSet, MarkSpace};

/// Tail mass below which the pmf summation stops.
pub const PMF_TAIL_MASS: f64 = 1e-14;
/// Rate above which Poisson counts are drawn by PTRS rejection.
pub const INVERSION_LIMIT: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub time: f64,
    pub mark: Mark,
}

/// One realization of the random measure: atoms sorted by strictly
/// increasing time, all in `(0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomList {
    horizon: f64,
    atoms: Vec<Atom>,
}

impl AtomList {
    /// Builds a list from explicit atoms; they are sorted and must have
    /// distinct times in `(0, horizon]`.
    pub fn new(horizon: f64, mut atoms: Vec<Atom>) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(invalid("horizon", "finite T > 0", horizon));
        }
        atoms.sort_by(|a, b| a.time.total_cmp(&b.time));
        for a in &atoms {
            if !(a.time > 0.0 && a.time <= horizon) {
                return Err(invalid("atom time", "t in (0, T]", a.time));
            }
        }
        if atoms.windows(2).any(|w| w[0].time == w[1].time) {
            return Err(Error::Domain("atom times must be distinct".into()));
        }
        Ok(Self { horizon, atoms })
    }

    pub fn empty(horizon: f64) -> Result<Self> {
        Self::new(horizon, Vec::new())
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Writes one `{"t": .., "mark": ..}` record per line. Labeled marks are
    /// written by name, interval marks as numbers.
    pub fn write_jsonl<W: Write>(&self, space: &MarkSpace, mut out: W) -> Result<()> {
        for a in &self.atoms {
            let mark = match a.mark {
                Mark::Label(_) => serde_json::Value::String(space.describe(a.mark)),
                Mark::Point(x) => serde_json::json!(x),
            };
            let rec = AtomRecord { t: a.time, mark };
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(horizon: f64, space: &MarkSpace, input: R) -> Result<Self> {
        let mut atoms = Vec::new();
        for line in input.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: AtomRecord = serde_json::from_str(&line)?;
            let mark = match (&rec.mark, space) {
                (serde_json::Value::String(name), MarkSpace::Finite { .. }) => space
                    .label_index(name)
                    .map(Mark::Label)
                    .ok_or_else(|| Error::Config {
                        key: "mark".into(),
                        expected: format!("a declared label, got {name}"),
                    })?,
                (serde_json::Value::Number(x), MarkSpace::Interval { .. }) => {
                    Mark::Point(x.as_f64().unwrap_or(f64::NAN))
                }
                (other, _) => {
                    return Err(Error::Config {
                        key: "mark".into(),
                        expected: format!("mark matching the mark space, got {other}"),
                    })
                }
            };
            atoms.push(Atom { time: rec.t, mark });
        }
        Self::new(horizon, atoms)
    }
}

#[derive(Serialize, Deserialize)]
struct AtomRecord {
    t: f64,
    mark: serde_json::Value,
}

/// A counting window `B × (a, b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub marks: MarkSet,
    pub start: f64,
    pub end: f64,
}

impl Window {
    pub fn new(marks: MarkSet, start: f64, end: f64) -> Result<Self> {
        if !(start >= 0.0 && start < end && end.is_finite()) {
            return Err(invalid(
                "window",
                "0 <= a < b < inf",
                format!("({start}, {end}]"),
            ));
        }
        Ok(Self { marks, start, end })
    }

    pub fn all_marks(start: f64, end: f64) -> Result<Self> {
        Self::new(MarkSet::All, start, end)
    }
}

/// Draws a Poisson(mean) count: inversion below [`INVERSION_LIMIT`],
/// PTRS transformed rejection above.
pub fn sample_poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    if mean < INVERSION_LIMIT {
        let mut u = rng.random::<f64>();
        let mut k = 0u64;
        let mut p = (-mean).exp();
        loop {
            if u < p {
                return k;
            }
            u -= p;
            k += 1;
            p *= mean / k as f64;
            // Rounding can leave u above the remaining mass.
            if p == 0.0 {
                return k;
            }
        }
    }
    ptrs(mean, rng)
}

fn ptrs<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    let smu = mean.sqrt();
    let b = 0.931 + 2.53 * smu;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    let ln_mean = mean.ln();
    loop {
        let u = rng.random::<f64>() - 0.5;
        let v = rng.random::<f64>();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + mean + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        let lhs = v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln();
        let rhs = -mean + k * ln_mean - ln_gamma(k + 1.0);
        if lhs <= rhs {
            return k as u64;
        }
    }
}

/// Samples a realization on `(0, horizon]` with intensity `nu ⊗ dt`.
pub fn sample_prm<R: Rng + ?Sized>(
    nu: &IntensityMeasure,
    horizon: f64,
    rng: &mut R,
) -> Result<AtomList> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(invalid("horizon", "finite T > 0", horizon));
    }
    let n = sample_poisson(nu.total_mass() * horizon, rng) as usize;
    let mut times: Vec<f64> = (0..n).map(|_| uniform_time(horizon, rng)).collect();
    times.sort_by(f64::total_cmp);
    // Ties have probability zero but are possible in floating point.
    while let Some(i) = times.windows(2).position(|w| w[0] == w[1]) {
        times[i + 1] = uniform_time(horizon, rng);
        times.sort_by(f64::total_cmp);
    }
    let mut atoms = Vec::with_capacity(n);
    for time in times {
        atoms.push(Atom {
            time,
            mark: sample_mark(nu, rng)?,
        });
    }
    Ok(AtomList { horizon, atoms })
}

fn uniform_time<R: Rng + ?Sized>(horizon: f64, rng: &mut R) -> f64 {
    horizon * (1.0 - rng.random::<f64>())
}

/// η(B × (a, b]).
pub fn count(atoms: &AtomList, w: &Window) -> Result<usize> {
    if w.end > atoms.horizon {
        return Err(Error::Domain(format!(
            "window end {} beyond horizon {}",
            w.end, atoms.horizon
        )));
    }
    Ok(atoms
        .atoms
        .iter()
        .filter(|a| a.time > w.start && a.time <= w.end && w.marks.contains(a.mark))
        .count())
}

/// γ(B × (a, b]) = ν(B)·(b − a).
pub fn compensator(nu: &IntensityMeasure, w: &Window) -> Result<f64> {
    Ok(nu.measure_of(&w.marks)? * (w.end - w.start))
}

/// η̃(B × (a, b]) = η − γ.
pub fn compensated_count(atoms: &AtomList, nu: &IntensityMeasure, w: &Window) -> Result<f64> {
    Ok(count(atoms, w)? as f64 - compensator(nu, w)?)
}

/// Exact `E|N − λ|^p` for `N ~ Poisson(λ)`, `p ∈ [1, 2]`, by pmf summation
/// outward from the mode.
pub fn poisson_centered_abs_moment(lambda: f64, p: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!("rate must be positive, got {lambda}")));
    }
    if !(1.0..=2.0).contains(&p) {
        return Err(invalid("p", "p in [1, 2]", p));
    }
    let cap = (lambda + 40.0 * lambda.sqrt() + 100.0).ceil() as u64;
    let mode = lambda.floor() as u64;
    let ln_pmf_mode = mode as f64 * lambda.ln() - lambda - ln_gamma(mode as f64 + 1.0);
    let pmf_mode = ln_pmf_mode.exp();
    let dev = |k: u64| (k as f64 - lambda).abs().powf(p);

    let mut mass = pmf_mode;
    let mut moment = pmf_mode * dev(mode);

    // Below the mode: every term down to zero.
    let mut pk = pmf_mode;
    let mut k = mode;
    while k > 0 {
        pk *= k as f64 / lambda;
        k -= 1;
        mass += pk;
        moment += pk * dev(k);
        if pk == 0.0 {
            break;
        }
    }

    // Above the mode until the remaining mass is negligible.
    let mut pk = pmf_mode;
    let mut k = mode;
    while k < cap {
        k += 1;
        pk *= lambda / k as f64;
        mass += pk;
        let term = pk * dev(k);
        moment += term;
        if 1.0 - mass < PMF_TAIL_MASS && term < 1e-17 * moment {
            break;
        }
    }
    Ok(moment)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn nu2() -> IntensityMeasure {
        IntensityMeasure::finite(["a", "b"], vec![0.5, 1.5]).unwrap()
    }

    #[test]
    fn null_intensity_gives_empty_list() {
        let nu = IntensityMeasure::finite(["a"], vec![0.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_prm(&nu, 3.0, &mut rng).unwrap().is_empty());
    }

    #[test]
    fn sampled_atoms_sorted_in_horizon() {
        let nu = nu2();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let a = sample_prm(&nu, 2.5, &mut rng).unwrap();
            assert!(a.atoms().windows(2).all(|w| w[0].time < w[1].time));
            assert!(a.atoms().iter().all(|x| x.time > 0.0 && x.time <= 2.5));
        }
    }

    #[test]
    fn mean_count_matches_rate() {
        let nu = nu2();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 100_000;
        let total: usize = (0..n)
            .map(|_| sample_prm(&nu, 1.0, &mut rng).unwrap().len())
            .sum();
        let mean = total as f64 / n as f64;
        let se = (2.0 / n as f64).sqrt();
        assert!((mean - 2.0).abs() < 3.0 * se, "mean={mean}");
    }

    #[test]
    fn disjoint_windows_uncorrelated() {
        let nu = nu2();
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let n = 100_000;
        let w1 = Window::all_marks(0.0, 0.5).unwrap();
        let w2 = Window::all_marks(0.5, 1.0).unwrap();
        let pairs: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                let a = sample_prm(&nu, 1.0, &mut rng).unwrap();
                (
                    count(&a, &w1).unwrap() as f64,
                    count(&a, &w2).unwrap() as f64,
                )
            })
            .collect();
        let m1 = pairs.iter().map(|p| p.0).sum::<f64>() / n as f64;
        let m2 = pairs.iter().map(|p| p.1).sum::<f64>() / n as f64;
        let prods: Vec<f64> = pairs.iter().map(|p| (p.0 - m1) * (p.1 - m2)).collect();
        let cov = prods.iter().sum::<f64>() / n as f64;
        let var = prods.iter().map(|x| (x - cov).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let se = (var / n as f64).sqrt();
        assert!(cov.abs() < 3.0 * se, "cov={cov} se={se}");
    }

    #[test]
    fn restriction_matches_fresh_sample() {
        // Atoms of a horizon-2 sample restricted to (0, 1] vs a fresh horizon-1 sample.
        let nu = nu2();
        let n = 50_000;
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let w = Window::all_marks(0.0, 1.0).unwrap();
        let restricted: Vec<f64> = (0..n)
            .map(|_| count(&sample_prm(&nu, 2.0, &mut rng).unwrap(), &w).unwrap() as f64)
            .collect();
        let fresh: Vec<f64> = (0..n)
            .map(|_| sample_prm(&nu, 1.0, &mut rng).unwrap().len() as f64)
            .collect();
        let stats = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0);
            (m, var)
        };
        let (m1, v1) = stats(&restricted);
        let (m2, v2) = stats(&fresh);
        let se_mean = ((v1 + v2) / n as f64).sqrt();
        assert!((m1 - m2).abs() < 3.0 * se_mean);
        // Var of a Poisson sample variance ≈ (μ + 2μ²)/n.
        let se_var = (2.0 * (2.0 + 2.0 * 4.0) / n as f64).sqrt();
        assert!((v1 - v2).abs() < 3.0 * se_var, "v1={v1} v2={v2}");
    }

    #[test]
    fn count_hand_enumeration() {
        let atoms = AtomList::new(
            1.0,
            vec![
                Atom {
                    time: 0.3,
                    mark: Mark::Label(0),
                },
                Atom {
                    time: 0.7,
                    mark: Mark::Label(1),
                },
            ],
        )
        .unwrap();
        assert_eq!(count(&atoms, &Window::all_marks(0.0, 0.5).unwrap()).unwrap(), 1);
        assert_eq!(count(&atoms, &Window::all_marks(0.0, 1.0).unwrap()).unwrap(), 2);
        let b_only = Window::new(MarkSet::Labels(vec![1]), 0.0, 1.0).unwrap();
        assert_eq!(count(&atoms, &b_only).unwrap(), 1);
        let empty = AtomList::empty(1.0).unwrap();
        assert_eq!(count(&empty, &Window::all_marks(0.0, 1.0).unwrap()).unwrap(), 0);
        assert!(count(&atoms, &Window::all_marks(0.0, 2.0).unwrap()).is_err());
    }

    #[test]
    fn window_validation() {
        assert!(Window::all_marks(0.5, 0.5).is_err());
        assert!(Window::all_marks(0.7, 0.5).is_err());
    }

    #[test]
    fn compensator_values() {
        let nu = nu2();
        let w = Window::all_marks(0.0, 1.0).unwrap();
        assert!((compensator(&nu, &w).unwrap() - 2.0).abs() < 1e-15);
        let z = IntensityMeasure::finite(["a", "b"], vec![0.0, 1.0]).unwrap();
        let wa = Window::new(MarkSet::Labels(vec![0]), 0.0, 1.0).unwrap();
        assert_eq!(compensator(&z, &wa).unwrap(), 0.0);
        let left = compensator(&nu, &Window::all_marks(0.0, 0.4).unwrap()).unwrap();
        let right = compensator(&nu, &Window::all_marks(0.4, 1.0).unwrap()).unwrap();
        assert!((left + right - 2.0).abs() < 1e-15);
    }

    #[test]
    fn compensated_count_of_empty_list() {
        let nu = IntensityMeasure::finite(["a"], vec![1.0]).unwrap();
        let empty = AtomList::empty(1.0).unwrap();
        let w = Window::all_marks(0.0, 1.0).unwrap();
        assert_eq!(compensated_count(&empty, &nu, &w).unwrap(), -1.0);
    }

    #[test]
    fn compensated_count_centered_with_poisson_variance() {
        let nu = nu2();
        let w = Window::new(MarkSet::Labels(vec![1]), 0.2, 0.9).unwrap();
        let gamma = compensator(&nu, &w).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let n = 100_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| compensated_count(&sample_prm(&nu, 1.0, &mut rng).unwrap(), &nu, &w).unwrap())
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        assert!(mean.abs() < 3.0 * (gamma / n as f64).sqrt(), "mean={mean}");
        // Var of sample variance for Poisson(μ): (μ + 2μ²)/n.
        let se_var = ((gamma + 2.0 * gamma * gamma) / n as f64).sqrt();
        assert!((var - gamma).abs() < 3.0 * se_var, "var={var} gamma={gamma}");
    }

    #[test]
    fn ptrs_branch_mean_and_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let mu = 75.0;
        let n = 50_000;
        let xs: Vec<f64> = (0..n).map(|_| sample_poisson(mu, &mut rng) as f64).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        assert!((mean - mu).abs() < 3.0 * (mu / n as f64).sqrt());
        assert!((var - mu).abs() < 3.0 * ((mu + 2.0 * mu * mu) / n as f64).sqrt());
    }

    #[test]
    fn jsonl_round_trip() {
        let nu = nu2();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let atoms = sample_prm(&nu, 5.0, &mut rng).unwrap();
        let mut buf = Vec::new();
        atoms.write_jsonl(nu.space(), &mut buf).unwrap();
        let back = AtomList::read_jsonl(5.0, nu.space(), buf.as_slice()).unwrap();
        assert_eq!(atoms, back);
    }

    #[test]
    fn mean_deviation_at_half() {
        let v = poisson_centered_abs_moment(0.5, 1.0).unwrap();
        assert!((v - 0.606_530_659_712_633_4).abs() < 1e-12, "{v}");
    }

    #[test]
    fn second_moment_is_rate() {
        for lambda in [0.01, 0.3, 1.0, 2.5, 10.0, 100.0, 1000.0] {
            let v = poisson_centered_abs_moment(lambda, 2.0).unwrap();
            assert!((v - lambda).abs() <= 1e-12 * lambda.max(1.0), "λ={lambda} v={v}");
        }
    }

    #[test]
    fn bound_with_pmf_oracle() {
        let v = poisson_centered_abs_moment(2.0, 1.5).unwrap();
        assert!(v <= 2f64.powf(0.5) * 2.0);
        // Independent summation from k = 0 with the textbook pmf recurrence.
        let mut pk = (-2.0f64).exp();
        let mut want = pk * 2f64.powf(1.5);
        for k in 1..200u32 {
            pk *= 2.0 / k as f64;
            want += pk * (k as f64 - 2.0).abs().powf(1.5);
        }
        assert!((v - want).abs() < 1e-13, "{v} vs {want}");
    }

    #[test]
    fn moment_domain_errors() {
        assert!(poisson_centered_abs_moment(0.0, 1.0).is_err());
        assert!(poisson_centered_abs_moment(-1.0, 1.0).is_err());
        assert!(poisson_centered_abs_moment(1.0, 0.5).is_err());
        assert!(poisson_centered_abs_moment(1.0, 2.5).is_err());
    }

    proptest! {
        #[test]
        fn count_additive_over_disjoint_windows(seed in 0u64..1000, cut in 0.01f64..0.99) {
            let nu = nu2();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let atoms = sample_prm(&nu, 1.0, &mut rng).unwrap();
            let left = count(&atoms, &Window::all_marks(0.0, cut).unwrap()).unwrap();
            let right = count(&atoms, &Window::all_marks(cut, 1.0).unwrap()).unwrap();
            prop_assert_eq!(left + right, atoms.len());
        }

        #[test]
        fn centered_moment_bound_holds(lambda in 0.01f64..50.0, p in 1.0f64..=2.0) {
            let v = poisson_centered_abs_moment(lambda, p).unwrap();
            prop_assert!(v <= 2f64.powf(2.0 - p) * lambda * (1.0 + 1e-12));
        }
    }
}
