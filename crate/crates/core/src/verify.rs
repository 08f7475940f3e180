//! Inequality checks: Monte-Carlo left-hand sides against exact right-hand
//! sides, reported as [`RatioReport`]s.

use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{Experiment, ExperimentConfig, GeneratorConfig};
use crate::convolution::{convolution_path, RegularityFunctional, REFINEMENT_LIMIT};
use crate::error::{invalid, Error, Result};
use crate::mark_space::nu_integral;
use crate::montecarlo::{path_rng, run_paths, McSettings, Summary};
use crate::oracle::{kernel_antiderivative, oracle_poisson_moment};
use crate::prm::{poisson_centered_abs_moment, sample_prm};
use crate::quadrature::gl16;
use crate::semigroup::{DiagonalGenerator, InterpolationNorm, NormParams, Reiteration};
use crate::stochastic_integral::{moment_estimate, MomentKind, StepIntegrand};

/// Largest admissible `SE / LHS` for the maximal-regularity estimate.
pub const MAX_RELATIVE_SE: f64 = 0.10;
/// Largest admissible growth of the maximal-regularity ratio under spectral
/// refinement.
pub const MAX_SPECTRAL_GROWTH: f64 = 1.5;
/// Mode counts compared by the spectral stability check.
pub const SPECTRAL_LADDER: (usize, usize) = (8, 32);
/// Largest admissible max/min of the reiteration ratio band.
pub const MAX_REITERATION_SPREAD: f64 = 50.0;
/// Largest admissible relative change of the band endpoints when `n` doubles.
pub const MAX_REITERATION_DRIFT: f64 = 0.10;
/// Random vectors drawn by the reiteration check.
pub const REITERATION_VECTORS: usize = 100;
/// Relative slack and quadrature agreement for the kernel inequality.
pub const KERNEL_TOLERANCE: f64 = 1e-10;
/// Grid of the kernel inequality.
pub const KERNEL_TIMES: [f64; 4] = [0.01, 0.1, 1.0, 10.0];
pub const KERNEL_SHIFTS: [f64; 4] = [0.01, 0.1, 0.5, 0.9];
pub const KERNEL_EXPONENTS: [(f64, f64); 2] = [(1.5, 2.0), (1.25, 1.75)];
/// Rates for the mean-absolute-deviation identity `E|N − λ| = 2λe^{−λ}`.
pub const MAD_RATES: [f64; 4] = [0.1, 0.3, 0.5, 0.9];
pub const MAD_TOLERANCE: f64 = 1e-10;
/// Grid of the bound `E|N − λ|^p <= 2^{2−p} λ`.
pub const BOUND_RATES: [f64; 6] = [0.1, 0.5, 1.0, 2.0, 5.0, 10.0];
pub const BOUND_EXPONENTS: [f64; 5] = [1.0, 1.25, 1.5, 1.75, 2.0];
pub const BOUND_SLACK: f64 = 1e-12;

/// One checked inequality `LHS <= constant · RHS`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub id: String,
    pub lhs: f64,
    /// Standard error of `lhs`; 0 when exact.
    pub lhs_se: f64,
    pub exact: bool,
    pub rhs: f64,
    /// `lhs / rhs`, absent when `rhs = 0`.
    pub ratio: Option<f64>,
    pub ratio_se: Option<f64>,
    pub constant: Option<f64>,
    pub paths: usize,
    pub seed: u64,
    pub pass: bool,
    /// Both sides vanish.
    pub trivial: bool,
    /// Whether `pass` is asserted or only reported.
    pub asserted: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub details: serde_json::Value,
}

impl RatioReport {
    fn monte_carlo(
        id: &str,
        lhs: Summary,
        rhs: f64,
        constant: Option<f64>,
        settings: &McSettings,
    ) -> Self {
        let ratio = (rhs > 0.0).then(|| lhs.mean / rhs);
        let trivial = lhs.mean == 0.0 && lhs.se == 0.0 && rhs == 0.0;
        let pass = trivial
            || constant.is_none_or(|c| lhs.mean <= c * rhs + 3.0 * lhs.se);
        Self {
            id: id.into(),
            lhs: lhs.mean,
            lhs_se: lhs.se,
            exact: false,
            rhs,
            ratio,
            ratio_se: (rhs > 0.0).then(|| lhs.se / rhs),
            constant,
            paths: settings.paths,
            seed: settings.seed,
            pass,
            trivial,
            asserted: true,
            notes: Vec::new(),
            details: serde_json::Value::Null,
        }
    }

    fn exact(id: &str, lhs: f64, rhs: f64, constant: Option<f64>, pass: bool) -> Self {
        Self {
            id: id.into(),
            lhs,
            lhs_se: 0.0,
            exact: true,
            rhs,
            ratio: (rhs > 0.0).then(|| lhs / rhs),
            ratio_se: None,
            constant,
            paths: 0,
            seed: 0,
            pass,
            trivial: false,
            asserted: true,
            notes: Vec::new(),
            details: serde_json::Value::Null,
        }
    }

    /// Counts against the exit status.
    pub fn failed(&self) -> bool {
        self.asserted && !self.trivial && !self.pass
    }
}

/// `C = 2^{2−p} L_p(E)²`.
pub fn ito_constant(p: f64, martingale_type_constant: f64) -> f64 {
    2f64.powf(2.0 - p) * martingale_type_constant.powi(2)
}

/// `K = C^{k} (2−k)/(1−k)`, `k = q/p < 1`.
pub fn sup_constant(c: f64, p: f64, q: f64) -> f64 {
    let k = q / p;
    c.powf(k) * (2.0 - k) / (1.0 - k)
}

/// `E|I(ξ)(T)|^p <= 2^{2−p} L² ∫_0^T ∫_S |ξ|^p dν dt`.
pub fn check_ito_bound(exp: &Experiment, p: f64, settings: &McSettings) -> Result<RatioReport> {
    let cfg = &exp.config;
    let est = moment_estimate(
        &exp.xi,
        &exp.nu,
        p,
        p,
        cfg.horizon,
        MomentKind::Terminal,
        settings,
    )?;
    let c = ito_constant(p, cfg.martingale_type_constant);
    let mut report = RatioReport::monte_carlo("ito_bound", est.lhs, est.rhs, Some(c), settings);
    report.details = json!({ "p": p });
    if p == 2.0 && exp.xi.norm_exponent() == 2.0 {
        if let (Some(r), Some(se)) = (report.ratio, report.ratio_se) {
            let z = if se > 0.0 { (r - 1.0).abs() / se } else { 0.0 };
            report.details = json!({ "p": p, "isometry_deviation_in_se": z });
        }
    }
    if report.trivial {
        report.notes.push("zero integrand: both sides vanish".into());
    }
    Ok(report)
}

/// `E sup_{t<=T} |I(ξ)(t)|^q <= K (∫_0^T ∫_S |ξ|^p dν dt)^{q/p}`, `q < p`.
pub fn check_low_moment_bound(
    exp: &Experiment,
    p: f64,
    q: f64,
    settings: &McSettings,
) -> Result<RatioReport> {
    if q >= p {
        return Err(Error::Domain(format!(
            "low-moment bound needs q < p (got q={q}, p={p}); use the p-th moment bound"
        )));
    }
    let cfg = &exp.config;
    let est = moment_estimate(
        &exp.xi,
        &exp.nu,
        p,
        q,
        cfg.horizon,
        MomentKind::Supremum,
        settings,
    )?;
    let k = sup_constant(ito_constant(p, cfg.martingale_type_constant), p, q);
    let mut report =
        RatioReport::monte_carlo("low_moment_bound", est.lhs, est.rhs, Some(k), settings);
    report.details = json!({ "p": p, "q": q });
    Ok(report)
}

/// `∫_0^T ∫_S |ξ(t,x)|^p_{D_A(θ,q);1} ν(dx) dt`, exact for step integrands.
pub fn maxreg_rhs(
    xi: &StepIntegrand,
    nu: &crate::mark_space::IntensityMeasure,
    gen: &DiagonalGenerator,
    theta: f64,
    p: f64,
    q: f64,
    horizon: f64,
) -> Result<f64> {
    let norm = InterpolationNorm::new(gen, NormParams::new(theta, q), xi.norm_exponent())?;
    let part = xi.partition();
    let mut total = 0.0;
    for (j, piece) in xi.pieces().iter().enumerate() {
        let len = part[j + 1].min(horizon) - part[j].min(horizon);
        if len > 0.0 {
            total += len * nu_integral(|m| norm.norm(&piece.eval(m)?), nu, p)?;
        }
    }
    Ok(total)
}

/// Per-path values of `∫_0^T |SC(ξ)(t)|^p_{D_A(θ+1/p,q);1} dt`.
pub fn maxreg_lhs_values(
    exp: &Experiment,
    theta: f64,
    p: f64,
    q: f64,
    settings: &McSettings,
) -> Result<Vec<f64>> {
    let cfg = &exp.config;
    let functional =
        RegularityFunctional::new(&exp.gen, theta, p, q, cfg.horizon, exp.xi.norm_exponent())?;
    run_paths(settings, |_, rng| {
        let atoms = sample_prm(&exp.nu, cfg.horizon, rng)?;
        let path = convolution_path(&exp.xi, &atoms, &exp.nu, &exp.gen, &[])?;
        functional.eval(&path)
    })
}

/// Relative change of the regularity functional when time panels are
/// halved, on the first path of `settings`.
pub fn maxreg_pilot_gap(
    exp: &Experiment,
    theta: f64,
    p: f64,
    q: f64,
    settings: &McSettings,
) -> Result<f64> {
    let cfg = &exp.config;
    let functional =
        RegularityFunctional::new(&exp.gen, theta, p, q, cfg.horizon, exp.xi.norm_exponent())?;
    let atoms = sample_prm(&exp.nu, cfg.horizon, &mut path_rng(settings.seed, 0))?;
    let path = convolution_path(&exp.xi, &atoms, &exp.nu, &exp.gen, &[])?;
    functional.refinement_gap(&path)
}

/// Both sides of the maximal-regularity inequality. The constant is not
/// explicit, so the check asserts a finite ratio, a relative standard error
/// of at most [`MAX_RELATIVE_SE`] and a resolved time quadrature. Runs with
/// `q != p` are reported without assertion.
pub fn check_maximal_regularity(
    exp: &Experiment,
    theta: f64,
    p: f64,
    q: f64,
    settings: &McSettings,
) -> Result<RatioReport> {
    let cfg = &exp.config;
    let rhs = maxreg_rhs(&exp.xi, &exp.nu, &exp.gen, theta, p, q, cfg.horizon)?;
    let lhs = Summary::of(&maxreg_lhs_values(exp, theta, p, q, settings)?);
    let gap = maxreg_pilot_gap(exp, theta, p, q, settings)?;
    let mut report = RatioReport::monte_carlo("maximal_regularity", lhs, rhs, None, settings);
    let finite = report.ratio.is_some_and(f64::is_finite);
    let precise = lhs.se <= MAX_RELATIVE_SE * lhs.mean;
    let resolved = gap <= REFINEMENT_LIMIT;
    report.pass = report.trivial || (finite && precise && resolved);
    if !resolved {
        report
            .notes
            .push(format!("time quadrature unresolved on pilot path (gap {gap:.3e})"));
    }
    if !precise && !report.trivial {
        report.notes.push("standard error above 10% of the estimate".into());
    }
    if q != p {
        report.asserted = false;
        report.notes.push("q != p: reported, not asserted".into());
    }
    report.details = json!({
        "theta": theta,
        "p": p,
        "q": q,
        "modes": exp.gen.dim(),
        "refinement_gap": gap,
    });
    Ok(report)
}

/// Maximal-regularity ratio at two mode counts; passes when the finer one
/// exceeds the coarser by at most [`MAX_SPECTRAL_GROWTH`].
pub fn check_spectral_stability(
    cfg: &ExperimentConfig,
    modes: (usize, usize),
    settings: &McSettings,
) -> Result<RatioReport> {
    let ratio_at = |n: usize| -> Result<(f64, f64)> {
        let exp = cfg.with_modes(n)?.build()?;
        let r = check_maximal_regularity(&exp, cfg.theta, cfg.p, cfg.q, settings)?;
        r.ratio
            .map(|v| (v, r.ratio_se.unwrap_or(0.0)))
            .ok_or_else(|| Error::UndefinedRatio(format!("right-hand side vanishes at n = {n}")))
    };
    let (coarse, coarse_se) = ratio_at(modes.0)?;
    let (fine, fine_se) = ratio_at(modes.1)?;
    let growth = fine / coarse;
    let pass = growth.is_finite() && growth <= MAX_SPECTRAL_GROWTH;
    Ok(RatioReport {
        id: "maximal_regularity_spectral".into(),
        lhs: fine,
        lhs_se: fine_se,
        exact: false,
        rhs: coarse,
        ratio: Some(growth),
        ratio_se: None,
        constant: Some(MAX_SPECTRAL_GROWTH),
        paths: settings.paths,
        seed: settings.seed,
        pass,
        trivial: false,
        asserted: cfg.q == cfg.p,
        notes: Vec::new(),
        details: json!({
            "modes": [modes.0, modes.1],
            "ratio_coarse": coarse,
            "ratio_coarse_se": coarse_se,
            "ratio_fine": fine,
            "ratio_fine_se": fine_se,
        }),
    })
}

/// `∫_0^t (t − r + s)^{−α} dr` by Gauss–Legendre on panels graded from
/// `r = t`, where the integrand peaks.
pub fn kernel_quadrature(t: f64, s: f64, alpha: f64) -> f64 {
    let rule = gl16();
    let mut total = 0.0;
    let mut lo = 0.0;
    let mut width = 0.25 * s;
    while lo < t {
        let hi = (lo + width).min(t);
        // u = t − r ∈ [lo, hi]
        total += rule.integrate(lo, hi, |u| (u + s).powf(-alpha));
        lo = hi;
        width = 0.5 * (lo + s);
    }
    total
}

/// `(∫_0^t (t−r+s)^{−α} dr)^{q/p−1} <= C s^{−(q(1−1/p)+1)}`, `α = pq/(q−p)`,
/// `C = (1/(α−1))^{q/p−1}`, on a grid of `(t, s)`.
pub fn check_kernel_bound(p: f64, q: f64, times: &[f64], shifts: &[f64]) -> Result<RatioReport> {
    if !(q > p && p > 1.0) {
        return Err(Error::Domain(format!(
            "kernel inequality needs q > p > 1 (got p={p}, q={q})"
        )));
    }
    if let Some(s) = shifts.iter().find(|s| !(**s > 0.0 && **s < 1.0)) {
        return Err(invalid("s", "0 < s < 1", s));
    }
    if let Some(t) = times.iter().find(|t| !(**t > 0.0)) {
        return Err(invalid("t", "t > 0", t));
    }
    let alpha = p * q / (q - p);
    let power = q / p - 1.0;
    let c = (1.0 / (alpha - 1.0)).powf(power);
    let mut nodes = Vec::new();
    let mut worst_ratio = 0.0f64;
    let mut worst_agreement = 0.0f64;
    let mut pass = true;
    for &t in times {
        for &s in shifts {
            let quad = kernel_quadrature(t, s, alpha);
            let exact = kernel_antiderivative(t, s, alpha)?.value;
            let agreement = (quad - exact).abs() / exact.abs();
            let lhs = quad.powf(power);
            let rhs = c * s.powf(-(q * (1.0 - 1.0 / p) + 1.0));
            let ratio = lhs / rhs;
            pass &= ratio <= 1.0 + KERNEL_TOLERANCE && agreement <= KERNEL_TOLERANCE;
            worst_ratio = worst_ratio.max(ratio);
            worst_agreement = worst_agreement.max(agreement);
            nodes.push(json!({
                "t": t, "s": s, "lhs": lhs, "rhs": rhs,
                "quadrature": quad, "antiderivative": exact, "relative_agreement": agreement,
            }));
        }
    }
    let mut report = RatioReport::exact("kernel_bound", worst_ratio, 1.0, Some(c), pass);
    report.details = json!({
        "p": p, "q": q, "alpha": alpha,
        "max_relative_agreement": worst_agreement,
        "nodes": nodes,
    });
    Ok(report)
}

/// `E|N − λ| = 2λe^{−λ}` from the exact pmf sum.
pub fn check_poisson_mad(rates: &[f64]) -> Result<RatioReport> {
    let mut worst = 0.0f64;
    let mut rows = Vec::new();
    for &lambda in rates {
        let got = poisson_centered_abs_moment(lambda, 1.0)?;
        let want = 2.0 * lambda * (-lambda).exp();
        worst = worst.max((got - want).abs());
        rows.push(json!({ "lambda": lambda, "moment": got, "closed_form": want }));
    }
    let mut report =
        RatioReport::exact("poisson_mad", worst, MAD_TOLERANCE, None, worst <= MAD_TOLERANCE);
    report.details = json!({ "rates": rows });
    Ok(report)
}

/// `E|N − λ|^p <= 2^{2−p} λ` on a grid, with the pmf sum cross-checked
/// against the independent oracle.
pub fn check_poisson_bound(rates: &[f64], exponents: &[f64]) -> Result<RatioReport> {
    let mut worst_ratio = 0.0f64;
    let mut worst_cross = 0.0f64;
    let mut pass = true;
    for &lambda in rates {
        for &p in exponents {
            let m = poisson_centered_abs_moment(lambda, p)?;
            let o = oracle_poisson_moment(lambda, p)?.value;
            let bound = 2f64.powf(2.0 - p) * lambda;
            pass &= m <= bound + BOUND_SLACK && (m - o).abs() <= 1e-12;
            worst_ratio = worst_ratio.max(m / bound);
            worst_cross = worst_cross.max((m - o).abs());
        }
    }
    let mut report = RatioReport::exact("poisson_bound", worst_ratio, 1.0, Some(1.0), pass);
    report.details = json!({ "max_oracle_difference": worst_cross });
    Ok(report)
}

/// Band `[min, max]` of the reiteration ratio over random Gaussian vectors.
pub fn reiteration_band(
    gen: &DiagonalGenerator,
    theta: f64,
    p: f64,
    q: f64,
    r: f64,
    vectors: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let ratio = Reiteration::new(gen, theta, p, q, r)?;
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for i in 0..vectors as u64 {
        let mut rng = path_rng(seed, i);
        let x: Vec<f64> = (0..gen.dim()).map(|_| rng.sample(StandardNormal)).collect();
        let v = ratio.ratio(&x)?;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok((lo, hi))
}

/// Reiteration band at `n` and `2n` modes of `λ_k = k²`: spread at most
/// [`MAX_REITERATION_SPREAD`], endpoints moving by less than
/// [`MAX_REITERATION_DRIFT`].
pub fn check_reiteration(
    theta: f64,
    p: f64,
    q: f64,
    r: f64,
    n: usize,
    vectors: usize,
    seed: u64,
) -> Result<RatioReport> {
    let small = reiteration_band(&DiagonalGenerator::laplacian_1d(n)?, theta, p, q, r, vectors, seed)?;
    let large =
        reiteration_band(&DiagonalGenerator::laplacian_1d(2 * n)?, theta, p, q, r, vectors, seed)?;
    let spread = (small.1 / small.0).max(large.1 / large.0);
    let drift = ((large.0 - small.0) / small.0)
        .abs()
        .max(((large.1 - small.1) / small.1).abs());
    let pass = spread <= MAX_REITERATION_SPREAD && drift < MAX_REITERATION_DRIFT;
    let mut report =
        RatioReport::exact("reiteration", spread, 1.0, Some(MAX_REITERATION_SPREAD), pass);
    report.paths = vectors;
    report.seed = seed;
    report.details = json!({
        "theta": theta, "p": p, "q": q, "modes": [n, 2 * n],
        "band_small": [small.0, small.1],
        "band_large": [large.0, large.1],
        "endpoint_drift": drift,
    });
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Ito,
    LowMoment,
    Maxreg,
    Kernel,
    Reiteration,
    Poisson,
    All,
}

impl Suite {
    pub const NAMES: [&'static str; 7] =
        ["ito", "low-moment", "maxreg", "kernel", "reiteration", "poisson", "all"];

    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "ito" => Suite::Ito,
            "low-moment" => Suite::LowMoment,
            "maxreg" => Suite::Maxreg,
            "kernel" => Suite::Kernel,
            "reiteration" => Suite::Reiteration,
            "poisson" => Suite::Poisson,
            "all" => Suite::All,
            other => {
                return Err(Error::Config {
                    key: "suite".into(),
                    expected: format!("one of {}, got {other}", Self::NAMES.join(", ")),
                })
            }
        })
    }

    fn includes(self, other: Suite) -> bool {
        self == Suite::All || self == other
    }
}

/// Checks run by a suite, in order; deterministic given the config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub config_hash: String,
    pub seed: u64,
    pub paths: usize,
    pub checks: Vec<RatioReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skipped: Vec<String>,
}

impl SuiteReport {
    pub fn failed(&self) -> bool {
        self.checks.iter().any(RatioReport::failed)
    }

    /// Aligned text table.
    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<28} {:>14} {:>12} {:>14} {:>12} {:>10}  {}\n",
            "check", "lhs", "se", "rhs", "ratio", "constant", "result"
        );
        for c in &self.checks {
            let status = match (c.trivial, c.asserted, c.pass) {
                (true, _, _) => "trivial",
                (_, false, _) => "reported",
                (_, true, true) => "PASS",
                (_, true, false) => "FAIL",
            };
            let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.6}"));
            out.push_str(&format!(
                "{:<28} {:>14.6e} {:>12.3e} {:>14.6e} {:>12} {:>10}  {}\n",
                c.id,
                c.lhs,
                c.lhs_se,
                c.rhs,
                opt(c.ratio),
                opt(c.constant),
                status
            ));
        }
        for s in &self.skipped {
            out.push_str(&format!("skipped: {s}\n"));
        }
        out
    }
}

/// Wall-clock duration of one check, kept out of the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub id: String,
    pub seconds: f64,
}

/// Runs `suite` on `cfg` with at most `threads` workers.
pub fn run_suite(
    cfg: &ExperimentConfig,
    suite: Suite,
    threads: usize,
) -> Result<(SuiteReport, Vec<Timing>)> {
    let exp = cfg.build()?;
    let settings = cfg.settings().with_threads(threads);
    let mut checks = Vec::new();
    let mut skipped = Vec::new();
    let mut timings = Vec::new();
    let mut timed = |checks: &mut Vec<RatioReport>, f: &dyn Fn() -> Result<RatioReport>| {
        let start = Instant::now();
        let report = f()?;
        timings.push(Timing {
            id: report.id.clone(),
            seconds: start.elapsed().as_secs_f64(),
        });
        checks.push(report);
        Ok::<_, Error>(())
    };

    if suite.includes(Suite::Poisson) {
        timed(&mut checks, &|| check_poisson_mad(&MAD_RATES))?;
        timed(&mut checks, &|| check_poisson_bound(&BOUND_RATES, &BOUND_EXPONENTS))?;
    }
    if suite.includes(Suite::Kernel) {
        for (p, q) in KERNEL_EXPONENTS {
            timed(&mut checks, &|| check_kernel_bound(p, q, &KERNEL_TIMES, &KERNEL_SHIFTS))?;
        }
    }
    if suite.includes(Suite::Ito) {
        timed(&mut checks, &|| check_ito_bound(&exp, cfg.p, &settings))?;
    }
    if suite.includes(Suite::LowMoment) {
        if cfg.q < cfg.p {
            timed(&mut checks, &|| check_low_moment_bound(&exp, cfg.p, cfg.q, &settings))?;
        } else if suite == Suite::LowMoment {
            return Err(Error::Config {
                key: "q".into(),
                expected: format!("q < p = {} for the low-moment suite, got {}", cfg.p, cfg.q),
            });
        } else {
            skipped.push("low_moment_bound: needs q < p".into());
        }
    }
    if suite.includes(Suite::Maxreg) {
        timed(&mut checks, &|| {
            check_maximal_regularity(&exp, cfg.theta, cfg.p, cfg.q, &settings)
        })?;
        if cfg.with_modes(SPECTRAL_LADDER.0).is_ok() {
            timed(&mut checks, &|| check_spectral_stability(cfg, SPECTRAL_LADDER, &settings))?;
        } else {
            skipped.push("maximal_regularity_spectral: needs family generator and integrand".into());
        }
    }
    if suite.includes(Suite::Reiteration) {
        match cfg.generator {
            GeneratorConfig::Family { n, .. } => timed(&mut checks, &|| {
                check_reiteration(
                    cfg.theta,
                    cfg.p,
                    cfg.q,
                    cfg.norm_exponent,
                    n,
                    REITERATION_VECTORS,
                    cfg.seed,
                )
            })?,
            GeneratorConfig::Explicit { .. } => {
                skipped.push("reiteration: needs the laplacian_1d family".into())
            }
        }
    }
    Ok((
        SuiteReport {
            suite,
            config_hash: cfg.hash()?,
            seed: cfg.seed,
            paths: cfg.paths,
            checks,
            skipped,
        },
        timings,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants() {
        assert_eq!(ito_constant(2.0, 1.0), 1.0);
        assert!((ito_constant(1.5, 2.0) - 4.0 * 2f64.sqrt()).abs() < 1e-12);
        assert!((sup_constant(1.0, 2.0, 1.0) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn kernel_examples() {
        let alpha = 6.0;
        let q = kernel_quadrature(1.0, 0.1, alpha);
        let a = kernel_antiderivative(1.0, 0.1, alpha).unwrap().value;
        assert!((q - a).abs() <= 1e-12 * a);
        let r = check_kernel_bound(1.5, 2.0, &[1.0], &[0.1]).unwrap();
        assert!(r.pass);
        let tiny = check_kernel_bound(1.5, 2.0, &[1e-9], &[0.5]).unwrap();
        // LHS ~ (t s^{-α})^{1/3} as t -> 0.
        let node = &tiny.details["nodes"][0];
        assert!(node["lhs"].as_f64().unwrap() < 5e-3);
        assert!(tiny.pass && tiny.lhs < 1e-2);
        assert!(check_kernel_bound(2.0, 1.5, &[1.0], &[0.1]).is_err());
        assert!(check_kernel_bound(1.5, 1.5, &[1.0], &[0.1]).is_err());
    }

    #[test]
    fn poisson_checks_pass() {
        assert!(check_poisson_mad(&MAD_RATES).unwrap().pass);
        assert!(check_poisson_bound(&BOUND_RATES, &BOUND_EXPONENTS).unwrap().pass);
    }

    #[test]
    fn suite_names_round_trip() {
        for name in Suite::NAMES {
            let s = Suite::parse(name).unwrap();
            assert_eq!(serde_json::to_value(s).unwrap(), name);
        }
        assert!(Suite::parse("bogus").is_err());
    }
}
