//! Compensated stochastic integrals of deterministic step integrands.
//!
//! For `ξ = Σ_j 1_{(t_{j-1}, t_j]} ξ_j` the integral against the compensated
//! measure is, per realization,
//!
//! ```text
//! I(ξ)(t) = Σ_{t_i <= t} ξ_{j(t_i)}(x_i) − Σ_j (t_j∧t − t_{j-1}∧t) ∫_S ξ_j dν
//! ```
//!
//! a finite sum over atoms minus a piecewise-linear drift.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mark_space::{nu_integral, IntensityMeasure, Mark};
use crate::montecarlo::{run_paths, McSettings, Summary};
use crate::prm::{sample_prm, Atom, AtomList};
use crate::semigroup::{lr_norm, ModelVector};

/// Value of one step of the integrand, as a function of the mark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkMap {
    /// Same vector for every mark.
    Constant(Vec<f64>),
    /// One vector per label of a finite mark space.
    Table(Vec<Vec<f64>>),
    /// `x^exponent · vector` on an interval mark space.
    Power { vector: Vec<f64>, exponent: f64 },
}

impl MarkMap {
    pub fn dim(&self) -> usize {
        match self {
            MarkMap::Constant(v) => v.len(),
            MarkMap::Table(rows) => rows.first().map_or(0, Vec::len),
            MarkMap::Power { vector, .. } => vector.len(),
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        let ok = match self {
            MarkMap::Constant(v) => finite(v),
            MarkMap::Table(rows) => {
                !rows.is_empty()
                    && rows.iter().all(|r| r.len() == rows[0].len() && finite(r))
            }
            MarkMap::Power { vector, exponent } => finite(vector) && exponent.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(
                "integrand piece",
                "finite vectors of one common dimension",
                format!("{self:?}"),
            ))
        }
    }

    /// Adds `scale · ξ(mark)` to `out`.
    pub fn accumulate(&self, mark: Mark, scale: f64, out: &mut [f64]) -> Result<()> {
        match (self, mark) {
            (MarkMap::Constant(v), _) => axpy(scale, v, out),
            (MarkMap::Table(rows), Mark::Label(i)) => {
                let row = rows.get(i).ok_or_else(|| {
                    Error::Domain(format!("integrand table has no row for label #{i}"))
                })?;
                axpy(scale, row, out)
            }
            (MarkMap::Power { vector, exponent }, Mark::Point(x)) => {
                let f = x.powf(*exponent);
                if !f.is_finite() {
                    return Err(Error::Evaluation {
                        mark: x.to_string(),
                        value: f,
                    });
                }
                axpy(scale * f, vector, out)
            }
            (m, mark) => {
                return Err(Error::Domain(format!(
                    "integrand piece {m:?} cannot be evaluated at {mark:?}"
                )))
            }
        }
        Ok(())
    }

    pub fn eval(&self, mark: Mark) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.accumulate(mark, 1.0, &mut out)?;
        Ok(out)
    }

    pub fn scaled(&self, c: f64) -> Self {
        let s = |v: &Vec<f64>| v.iter().map(|x| c * x).collect::<Vec<_>>();
        match self {
            MarkMap::Constant(v) => MarkMap::Constant(s(v)),
            MarkMap::Table(rows) => MarkMap::Table(rows.iter().map(s).collect()),
            MarkMap::Power { vector, exponent } => MarkMap::Power {
                vector: s(vector),
                exponent: *exponent,
            },
        }
    }
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Deterministic predictable step process on `[0, horizon]`, zero after the
/// last partition point.
#[derive(Debug, Clone, PartialEq)]
pub struct StepIntegrand {
    partition: Vec<f64>,
    pieces: Vec<MarkMap>,
    horizon: f64,
    dim: usize,
    norm_exponent: f64,
}

impl StepIntegrand {
    pub fn new(
        partition: Vec<f64>,
        pieces: Vec<MarkMap>,
        horizon: f64,
        norm_exponent: f64,
    ) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(invalid("horizon", "finite T > 0", horizon));
        }
        if !(norm_exponent >= 1.0 && norm_exponent.is_finite()) {
            return Err(invalid("norm_exponent", "finite r >= 1", norm_exponent));
        }
        if partition.first() != Some(&0.0) {
            return Err(invalid("partition", "starts at 0", format!("{partition:?}")));
        }
        if partition.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid(
                "partition",
                "strictly increasing",
                format!("{partition:?}"),
            ));
        }
        if *partition.last().unwrap() > horizon {
            return Err(invalid(
                "partition",
                "last point <= horizon",
                format!("{partition:?}"),
            ));
        }
        if pieces.len() + 1 != partition.len() {
            return Err(invalid(
                "pieces",
                "one piece per partition interval",
                format!("{} pieces, {} intervals", pieces.len(), partition.len() - 1),
            ));
        }
        let dim = pieces.first().map_or(0, MarkMap::dim);
        for p in &pieces {
            p.validate()?;
            if p.dim() != dim {
                return Err(invalid(
                    "pieces",
                    "one common dimension",
                    format!("{} vs {dim}", p.dim()),
                ));
            }
        }
        Ok(Self {
            partition,
            pieces,
            horizon,
            dim,
            norm_exponent,
        })
    }

    /// `ξ ≡ 0` on `(0, horizon]`.
    pub fn zero(dim: usize, horizon: f64, norm_exponent: f64) -> Result<Self> {
        Self::new(
            vec![0.0, horizon],
            vec![MarkMap::Constant(vec![0.0; dim])],
            horizon,
            norm_exponent,
        )
    }

    pub fn partition(&self) -> &[f64] {
        &self.partition
    }

    pub fn pieces(&self) -> &[MarkMap] {
        &self.pieces
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn norm_exponent(&self) -> f64 {
        self.norm_exponent
    }

    /// Index `j` of the step containing `t`, i.e. `t ∈ (t_{j}, t_{j+1}]`.
    pub fn piece_index(&self, t: f64) -> Option<usize> {
        if t <= 0.0 || t > *self.partition.last().unwrap() {
            return None;
        }
        Some(self.partition.partition_point(|&s| s < t) - 1)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            pieces: self.pieces.iter().map(|p| p.scaled(c)).collect(),
            ..self.clone()
        }
    }

    /// `ξ · 1_{(a, b]}`.
    pub fn restricted(&self, a: f64, b: f64) -> Result<Self> {
        if !(0.0 <= a && a < b && b <= self.horizon) {
            return Err(invalid("restriction", "0 <= a < b <= T", format!("({a}, {b}]")));
        }
        let zero = MarkMap::Constant(vec![0.0; self.dim]);
        let mut cuts: Vec<f64> = self.partition.clone();
        cuts.extend([a, b]);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut pieces = Vec::with_capacity(cuts.len() - 1);
        for w in cuts.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let inside = mid > a && mid <= b;
            pieces.push(match self.piece_index(w[1]) {
                Some(j) if inside => self.pieces[j].clone(),
                _ => zero.clone(),
            });
        }
        Self::new(cuts, pieces, self.horizon, self.norm_exponent)
    }
}

/// Value of a path at a time: left limit and value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub t: f64,
    pub before: Vec<f64>,
    pub after: Vec<f64>,
}

/// Path of `I(ξ)` sampled at atom times, partition points and a uniform
/// grid, with the exact running supremum of `|·|_E`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathValue {
    pub points: Vec<PathPoint>,
    pub running_sup: Vec<f64>,
    pub norm_exponent: f64,
}

impl PathValue {
    pub fn sup(&self) -> f64 {
        self.running_sup.last().copied().unwrap_or(0.0)
    }

    pub fn terminal(&self) -> &[f64] {
        &self.points.last().expect("path has at least t = 0").after
    }
}

/// A step integrand bound to an intensity, with the per-step compensator
/// means `∫_S ξ_j dν` precomputed.
#[derive(Debug, Clone)]
pub struct CompensatedIntegrand<'a> {
    xi: &'a StepIntegrand,
    nu: &'a IntensityMeasure,
    drift: Vec<Vec<f64>>,
}

impl<'a> CompensatedIntegrand<'a> {
    pub fn new(xi: &'a StepIntegrand, nu: &'a IntensityMeasure) -> Result<Self> {
        let mut drift = Vec::with_capacity(xi.pieces.len());
        for piece in &xi.pieces {
            let mut m = vec![0.0; xi.dim];
            for &(mark, w) in nu.nodes() {
                if w != 0.0 {
                    piece.accumulate(mark, w, &mut m)?;
                }
            }
            if let Some(v) = m.iter().find(|v| !v.is_finite()) {
                return Err(Error::Numerical(format!(
                    "compensator mean of integrand is not finite ({v})"
                )));
            }
            drift.push(m);
        }
        Ok(Self { xi, nu, drift })
    }

    pub fn integrand(&self) -> &StepIntegrand {
        self.xi
    }

    pub fn intensity(&self) -> &IntensityMeasure {
        self.nu
    }

    /// `∫_S ξ_j dν` per step.
    pub fn drift(&self) -> &[Vec<f64>] {
        &self.drift
    }

    fn check_time(&self, t: f64, atoms: &AtomList) -> Result<()> {
        if !(0.0..=self.xi.horizon).contains(&t) || t > atoms.horizon() {
            return Err(Error::Domain(format!(
                "time {t} outside [0, {}]",
                self.xi.horizon.min(atoms.horizon())
            )));
        }
        Ok(())
    }

    /// Adds the jump `ξ_{j(t_i)}(x_i)` of an atom to `out`.
    pub fn add_jump(&self, atom: &Atom, out: &mut [f64]) -> Result<()> {
        if let Some(j) = self.xi.piece_index(atom.time) {
            self.xi.pieces[j].accumulate(atom.mark, 1.0, out)?;
        }
        Ok(())
    }

    /// Adds `−Σ_j (t_j∧t − t_{j-1}∧t) ∫ξ_j dν` to `out`.
    fn sub_drift(&self, t: f64, out: &mut [f64]) {
        for (w, m) in self.xi.partition.windows(2).zip(&self.drift) {
            let len = w[1].min(t) - w[0].min(t);
            if len > 0.0 {
                axpy(-len, m, out);
            }
        }
    }

    /// `I(ξ)(t)` for one realization.
    pub fn integrate(&self, atoms: &AtomList, t: f64) -> Result<ModelVector> {
        self.check_time(t, atoms)?;
        let mut out = vec![0.0; self.xi.dim];
        for a in atoms.atoms().iter().take_while(|a| a.time <= t) {
            self.add_jump(a, &mut out)?;
        }
        self.sub_drift(t, &mut out);
        Ok(ModelVector {
            coeffs: out,
            norm_exponent: self.xi.norm_exponent,
        })
    }

    /// Breakpoints of the piecewise-affine path on `[0, T]`: 0, atom times,
    /// partition points and `uniform_points` equally spaced times.
    fn event_times(&self, atoms: &AtomList, uniform_points: usize) -> Vec<f64> {
        let horizon = self.xi.horizon.min(atoms.horizon());
        let mut times = vec![0.0, horizon];
        times.extend(atoms.atoms().iter().map(|a| a.time).filter(|&t| t <= horizon));
        times.extend(self.xi.partition.iter().copied().filter(|&t| t <= horizon));
        if uniform_points >= 2 {
            let n = uniform_points - 1;
            times.extend((0..=n).map(|i| horizon * i as f64 / n as f64));
        }
        times.sort_by(f64::total_cmp);
        times.dedup();
        times
    }

    /// Path at all breakpoints with exact running sup: between breakpoints the
    /// path is affine, so the norm is maximal at segment endpoints.
    pub fn path(&self, atoms: &AtomList, uniform_points: usize) -> Result<PathValue> {
        let times = self.event_times(atoms, uniform_points);
        let r = self.xi.norm_exponent;
        let mut jumps = vec![0.0; self.xi.dim];
        let mut next_atom = 0;
        let atom_list = atoms.atoms();
        let mut points = Vec::with_capacity(times.len());
        let mut running_sup = Vec::with_capacity(times.len());
        let mut sup = 0.0f64;
        for &t in &times {
            let mut before = jumps.clone();
            self.sub_drift(t, &mut before);
            let mut jumped = false;
            while next_atom < atom_list.len() && atom_list[next_atom].time <= t {
                self.add_jump(&atom_list[next_atom], &mut jumps)?;
                next_atom += 1;
                jumped = true;
            }
            let after = if jumped {
                let mut v = jumps.clone();
                self.sub_drift(t, &mut v);
                v
            } else {
                before.clone()
            };
            sup = sup.max(lr_norm(&before, r)).max(lr_norm(&after, r));
            running_sup.push(sup);
            points.push(PathPoint { t, before, after });
        }
        Ok(PathValue {
            points,
            running_sup,
            norm_exponent: r,
        })
    }

    /// `sup_{t <= T} |I(ξ)(t)|_E`, exact.
    pub fn sup_norm(&self, atoms: &AtomList) -> Result<f64> {
        Ok(self.path(atoms, 0)?.sup())
    }

    /// `∫_0^t ∫_S |ξ(r,x)|^p ν(dx) dr`.
    pub fn rhs_integral(&self, p: f64, t: f64) -> Result<f64> {
        let r = self.xi.norm_exponent;
        let mut total = 0.0;
        for (w, piece) in self.xi.partition.windows(2).zip(&self.xi.pieces) {
            let len = w[1].min(t) - w[0].min(t);
            if len > 0.0 {
                let v = nu_integral(|m| Ok(lr_norm(&piece.eval(m)?, r)), self.nu, p)?;
                total += len * v;
            }
        }
        Ok(total)
    }
}

/// `I(ξ)(t)` for one realization.
pub fn integrate(
    xi: &StepIntegrand,
    atoms: &AtomList,
    nu: &IntensityMeasure,
    t: f64,
) -> Result<ModelVector> {
    CompensatedIntegrand::new(xi, nu)?.integrate(atoms, t)
}

/// Path of `I(ξ)` with `uniform_points` grid points besides atom times and
/// partition points.
pub fn path(
    xi: &StepIntegrand,
    atoms: &AtomList,
    nu: &IntensityMeasure,
    uniform_points: usize,
) -> Result<PathValue> {
    CompensatedIntegrand::new(xi, nu)?.path(atoms, uniform_points)
}

/// Which functional of the path enters the left-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentKind {
    /// `|I(ξ)(t)|^q`.
    Terminal,
    /// `sup_{s <= t} |I(ξ)(s)|^q`.
    Supremum,
}

/// Monte-Carlo left-hand side and exact right-hand side of a moment bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub lhs: Summary,
    /// `(∫_0^t ∫_S |ξ|^p dν dr)^{q/p}`.
    pub rhs: f64,
}

/// Estimates `E|I(ξ)(t)|^q` (or of the running sup) together with
/// `(∫_0^t ∫_S |ξ|^p dν dr)^{q/p}`.
pub fn moment_estimate(
    xi: &StepIntegrand,
    nu: &IntensityMeasure,
    p: f64,
    q: f64,
    t: f64,
    kind: MomentKind,
    settings: &McSettings,
) -> Result<MomentEstimate> {
    settings.validate()?;
    if !(q >= 1.0 && q <= p && p.is_finite()) {
        return Err(invalid("q", "1 <= q <= p", format!("q={q}, p={p}")));
    }
    if p > 2.0 && q != p {
        return Err(invalid("p", "p <= 2 unless q = p", p));
    }
    if !(0.0..=xi.horizon()).contains(&t) {
        return Err(Error::Domain(format!("time {t} outside [0, {}]", xi.horizon())));
    }
    let bound = CompensatedIntegrand::new(xi, nu)?;
    let rhs = bound.rhs_integral(p, t)?.powf(q / p);
    let values = run_paths(settings, |_, rng| {
        let atoms = sample_prm(nu, xi.horizon(), rng)?;
        let v = match kind {
            MomentKind::Terminal => bound.integrate(&atoms, t)?.norm(),
            MomentKind::Supremum => {
                let mut sup = 0.0f64;
                let p = bound.path(&atoms, 0)?;
                for (pt, s) in p.points.iter().zip(&p.running_sup) {
                    if pt.t > t {
                        break;
                    }
                    sup = *s;
                }
                // Segment ending at t when t is not a breakpoint.
                sup.max(bound.integrate(&atoms, t)?.norm())
            }
        };
        Ok(v.powf(q))
    })?;
    Ok(MomentEstimate {
        lhs: Summary::of(&values),
        rhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montecarlo::path_rng;
    use proptest::prelude::*;

    fn nu_ab() -> IntensityMeasure {
        IntensityMeasure::finite(["a", "b"], vec![1.0, 3.0]).unwrap()
    }

    fn atom(t: f64, i: usize) -> Atom {
        Atom {
            time: t,
            mark: Mark::Label(i),
        }
    }

    #[test]
    fn zero_integrand_integrates_to_zero() {
        let nu = nu_ab();
        let xi = StepIntegrand::zero(3, 1.0, 2.0).unwrap();
        let atoms = AtomList::new(1.0, vec![atom(0.2, 0), atom(0.9, 1)]).unwrap();
        assert_eq!(integrate(&xi, &atoms, &nu, 1.0).unwrap().coeffs, vec![0.0; 3]);
    }

    #[test]
    fn hand_enumeration_single_step() {
        let nu = IntensityMeasure::finite(["a"], vec![1.0]).unwrap();
        let v = vec![1.5, -2.0];
        let xi = StepIntegrand::new(vec![0.0, 1.0], vec![MarkMap::Constant(v.clone())], 1.0, 2.0)
            .unwrap();
        let one = AtomList::new(1.0, vec![atom(0.4, 0)]).unwrap();
        let got = integrate(&xi, &one, &nu, 1.0).unwrap();
        assert!(got.coeffs.iter().all(|c| c.abs() < 1e-15));
        let two = AtomList::new(1.0, vec![atom(0.4, 0), atom(0.8, 0)]).unwrap();
        let got = integrate(&xi, &two, &nu, 1.0).unwrap();
        for (g, w) in got.coeffs.iter().zip(&v) {
            assert!((g - w).abs() < 1e-15);
        }
    }

    #[test]
    fn time_outside_horizon_is_domain_error() {
        let nu = nu_ab();
        let xi = StepIntegrand::zero(1, 1.0, 2.0).unwrap();
        let atoms = AtomList::empty(1.0).unwrap();
        assert!(integrate(&xi, &atoms, &nu, 1.5).is_err());
        assert!(integrate(&xi, &atoms, &nu, -0.1).is_err());
    }

    #[test]
    fn integrand_validation() {
        let c = |v: f64| MarkMap::Constant(vec![v]);
        assert!(StepIntegrand::new(vec![0.1, 1.0], vec![c(1.0)], 1.0, 2.0).is_err());
        assert!(StepIntegrand::new(vec![0.0, 0.5, 0.5], vec![c(1.0), c(1.0)], 1.0, 2.0).is_err());
        assert!(StepIntegrand::new(vec![0.0, 2.0], vec![c(1.0)], 1.0, 2.0).is_err());
        assert!(StepIntegrand::new(vec![0.0, 1.0], vec![], 1.0, 2.0).is_err());
        assert!(StepIntegrand::new(
            vec![0.0, 0.5, 1.0],
            vec![c(1.0), MarkMap::Constant(vec![1.0, 2.0])],
            1.0,
            2.0
        )
        .is_err());
    }

    #[test]
    fn table_needs_label_marks() {
        let nu = IntensityMeasure::interval(0.5, crate::mark_space::Density::Constant { value: 1.0 })
            .unwrap();
        let xi = StepIntegrand::new(
            vec![0.0, 1.0],
            vec![MarkMap::Table(vec![vec![1.0]])],
            1.0,
            2.0,
        )
        .unwrap();
        assert!(CompensatedIntegrand::new(&xi, &nu).is_err());
    }

    #[test]
    fn drift_only_path() {
        // No atoms, ξ ≡ v, ν(S) = 1: I(t) = −t v, sup over [0,1] is |v|.
        let nu = IntensityMeasure::finite(["a"], vec![1.0]).unwrap();
        let v = vec![3.0, 4.0];
        let xi = StepIntegrand::new(vec![0.0, 1.0], vec![MarkMap::Constant(v)], 1.0, 2.0).unwrap();
        let p = path(&xi, &AtomList::empty(1.0).unwrap(), &nu, 11).unwrap();
        for pt in &p.points {
            assert!((pt.after[0] + 3.0 * pt.t).abs() < 1e-14);
            assert!((pt.after[1] + 4.0 * pt.t).abs() < 1e-14);
        }
        assert!((p.sup() - 5.0).abs() < 1e-14);
    }

    #[test]
    fn path_consistent_with_integrate_and_jumps_exact() {
        let nu = nu_ab();
        let xi = StepIntegrand::new(
            vec![0.0, 0.5, 1.0],
            vec![
                MarkMap::Table(vec![vec![1.0, 0.0], vec![0.0, -2.0]]),
                MarkMap::Table(vec![vec![0.5, 0.5], vec![3.0, 1.0]]),
            ],
            1.0,
            2.0,
        )
        .unwrap();
        let atoms = AtomList::new(1.0, vec![atom(0.3, 1), atom(0.6, 0), atom(0.75, 1)]).unwrap();
        let bound = CompensatedIntegrand::new(&xi, &nu).unwrap();
        let p = bound.path(&atoms, 17).unwrap();
        assert_eq!(p.terminal(), bound.integrate(&atoms, 1.0).unwrap().coeffs.as_slice());
        for a in atoms.atoms() {
            let pt = p.points.iter().find(|pt| pt.t == a.time).unwrap();
            let mut jump = vec![0.0; 2];
            bound.add_jump(a, &mut jump).unwrap();
            for (k, dj) in jump.iter().enumerate() {
                assert_eq!(pt.after[k] - pt.before[k], *dj);
            }
        }
        assert!(p.running_sup.windows(2).all(|w| w[0] <= w[1]));
        // Dense-grid sup cannot exceed the exact sup.
        let dense = bound.path(&atoms, 20_001).unwrap();
        assert!((dense.sup() - p.sup()).abs() < 1e-12);
    }

    #[test]
    fn window_additivity() {
        let nu = nu_ab();
        let xi = StepIntegrand::new(
            vec![0.0, 0.4, 1.0],
            vec![
                MarkMap::Table(vec![vec![1.0], vec![-1.0]]),
                MarkMap::Table(vec![vec![2.0], vec![0.5]]),
            ],
            1.0,
            2.0,
        )
        .unwrap();
        let mut rng = path_rng(3, 0);
        for _ in 0..200 {
            let atoms = sample_prm(&nu, 1.0, &mut rng).unwrap();
            let (s, t) = (0.3, 0.85);
            let head = integrate(&xi, &atoms, &nu, s).unwrap();
            let tail = integrate(&xi.restricted(s, t).unwrap(), &atoms, &nu, 1.0).unwrap();
            let full = integrate(&xi, &atoms, &nu, t).unwrap();
            assert!((head.coeffs[0] + tail.coeffs[0] - full.coeffs[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn moment_estimate_zero_and_errors() {
        let nu = nu_ab();
        let xi = StepIntegrand::zero(2, 1.0, 2.0).unwrap();
        let est = moment_estimate(&xi, &nu, 2.0, 2.0, 1.0, MomentKind::Terminal, &McSettings::new(100, 1))
            .unwrap();
        assert_eq!(est.lhs.mean, 0.0);
        assert_eq!(est.rhs, 0.0);
        assert!(moment_estimate(&xi, &nu, 2.0, 2.0, 1.0, MomentKind::Terminal, &McSettings::new(10, 1))
            .is_err());
        assert!(moment_estimate(&xi, &nu, 1.5, 2.0, 1.0, MomentKind::Terminal, &McSettings::new(100, 1))
            .is_err());
    }

    proptest! {
        #[test]
        fn linear_per_realization(seed in 0u64..500, alpha in -3.0f64..3.0, beta in -3.0f64..3.0,
                                  t in 0.0f64..=1.0) {
            let nu = nu_ab();
            let part = vec![0.0, 0.5, 1.0];
            let f = StepIntegrand::new(part.clone(), vec![
                MarkMap::Table(vec![vec![1.0, 2.0], vec![0.0, -1.0]]),
                MarkMap::Constant(vec![0.5, 0.25]),
            ], 1.0, 2.0).unwrap();
            let g = StepIntegrand::new(part.clone(), vec![
                MarkMap::Constant(vec![-1.0, 1.0]),
                MarkMap::Table(vec![vec![3.0, 0.0], vec![1.0, 1.0]]),
            ], 1.0, 2.0).unwrap();
            let combo = StepIntegrand::new(part, vec![
                MarkMap::Table(vec![vec![alpha - beta, 2.0 * alpha + beta], vec![-beta, -alpha + beta]]),
                MarkMap::Table(vec![vec![0.5 * alpha + 3.0 * beta, 0.25 * alpha],
                                    vec![0.5 * alpha + beta, 0.25 * alpha + beta]]),
            ], 1.0, 2.0).unwrap();
            let atoms = sample_prm(&nu, 1.0, &mut path_rng(seed, 0)).unwrap();
            let a = integrate(&f, &atoms, &nu, t).unwrap();
            let b = integrate(&g, &atoms, &nu, t).unwrap();
            let c = integrate(&combo, &atoms, &nu, t).unwrap();
            for k in 0..2 {
                let want = alpha * a.coeffs[k] + beta * b.coeffs[k];
                prop_assert!((c.coeffs[k] - want).abs() <= 1e-12 * (1.0 + want.abs()));
            }
        }
    }
}
