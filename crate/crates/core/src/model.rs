//! GPT models, ensembles and measurements, together with validation of the
//! framework axioms (normalization, effect bounds, unit-effect membership).

use std::fmt;
use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::cone::PolyhedralCone;
use crate::{Error, Result};

/// Coordinates of a state or effect in the ambient vector space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point(coords)
    }

    pub fn zeros(dim: usize) -> Self {
        Point(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    /// Euclidean inner product. Callers are responsible for matching
    /// dimensions; see [`evaluate`] for the checked version.
    pub fn dot(&self, other: &Point) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scale(&self, s: f64) -> Point {
        Point(self.0.iter().map(|c| c * s).collect())
    }

    pub fn add(&self, other: &Point) -> Point {
        Point(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Point) -> Point {
        Point(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    /// `self + s * other`
    pub fn add_scaled(&self, s: f64, other: &Point) -> Point {
        Point(self.0.iter().zip(&other.0).map(|(a, b)| a + s * b).collect())
    }

    pub fn distance(&self, other: &Point) -> f64 {
        self.sub(other).norm()
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Point(v)
    }
}

impl Index<usize> for Point {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Outcome probability of effect `e` on state `w`.
pub fn evaluate(e: &Point, w: &Point) -> Result<f64> {
    if e.dim() != w.dim() {
        return Err(Error::DimensionMismatch {
            expected: e.dim(),
            found: w.dim(),
        });
    }
    Ok(e.dot(w))
}

/// Sum of a non-empty list of points of equal dimension.
pub(crate) fn sum_points(dim: usize, points: &[Point]) -> Point {
    points.iter().fold(Point::zeros(dim), |acc, p| acc.add(p))
}

fn check_point(dim: usize, p: &Point, what: &str) -> Result<()> {
    if p.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: p.dim(),
        });
    }
    if !p.is_finite() {
        return Err(Error::InvalidInput(format!("{what} has non-finite coordinates")));
    }
    Ok(())
}

/// A finitely generated GPT: extremal normalized states, extremal effects and
/// the unit effect.
#[derive(Debug, Clone, PartialEq)]
pub struct GptModel {
    dim: usize,
    state_gens: Vec<Point>,
    effect_gens: Vec<Point>,
    unit_effect: Point,
}

impl GptModel {
    /// Structural construction: dimensions and finiteness only. Use
    /// [`validate_model`] for the framework axioms.
    pub fn new(
        dim: usize,
        unit_effect: Point,
        state_gens: Vec<Point>,
        effect_gens: Vec<Point>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        check_point(dim, &unit_effect, "unit effect")?;
        for (i, w) in state_gens.iter().enumerate() {
            check_point(dim, w, &format!("state generator {i}"))?;
        }
        for (i, g) in effect_gens.iter().enumerate() {
            check_point(dim, g, &format!("effect generator {i}"))?;
        }
        if state_gens.is_empty() {
            return Err(Error::InvalidInput("model has no state generators".into()));
        }
        if effect_gens.is_empty() {
            return Err(Error::InvalidInput("model has no effect generators".into()));
        }
        Ok(GptModel {
            dim,
            state_gens,
            effect_gens,
            unit_effect,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn state_gens(&self) -> &[Point] {
        &self.state_gens
    }

    pub fn effect_gens(&self) -> &[Point] {
        &self.effect_gens
    }

    pub fn unit_effect(&self) -> &Point {
        &self.unit_effect
    }

    pub fn state_cone(&self) -> PolyhedralCone {
        PolyhedralCone::new(self.dim, self.state_gens.clone())
            .expect("generators checked at construction")
    }

    pub fn effect_cone(&self) -> PolyhedralCone {
        PolyhedralCone::new(self.dim, self.effect_gens.clone())
            .expect("generators checked at construction")
    }
}

/// The discrimination instance `{q_x, w_x}` over a model.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    model: GptModel,
    states: Vec<Point>,
    priors: Vec<f64>,
}

impl Ensemble {
    pub fn new(model: GptModel, states: Vec<Point>, priors: Vec<f64>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InvalidInput("ensemble has no states".into()));
        }
        if states.len() != priors.len() {
            return Err(Error::InvalidInput(format!(
                "{} states but {} priors",
                states.len(),
                priors.len()
            )));
        }
        for (i, w) in states.iter().enumerate() {
            check_point(model.dim(), w, &format!("state {i}"))?;
        }
        if priors.iter().any(|q| !q.is_finite()) {
            return Err(Error::InvalidInput("non-finite prior".into()));
        }
        Ok(Ensemble {
            model,
            states,
            priors,
        })
    }

    pub fn model(&self) -> &GptModel {
        &self.model
    }

    pub fn states(&self) -> &[Point] {
        &self.states
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// `q_x w_x`
    pub fn weighted_state(&self, x: usize) -> Point {
        self.states[x].scale(self.priors[x])
    }

    pub fn max_prior(&self) -> f64 {
        self.priors.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// A list of effects, one per guess.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Measurement {
    effects: Vec<Point>,
}

impl Measurement {
    pub fn new(effects: Vec<Point>) -> Self {
        Measurement { effects }
    }

    pub fn effects(&self) -> &[Point] {
        &self.effects
    }

    pub fn len(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }

    /// The trivial measurement: `u` on outcome `x`, zero elsewhere.
    pub fn trivial(model: &GptModel, outcomes: usize, x: usize) -> Self {
        let effects = (0..outcomes)
            .map(|i| {
                if i == x {
                    model.unit_effect().clone()
                } else {
                    Point::zeros(model.dim())
                }
            })
            .collect();
        Measurement { effects }
    }

    /// Average success probability `Σ q_x e_x[w_x]`.
    pub fn success_probability(&self, ens: &Ensemble) -> Result<f64> {
        if self.len() != ens.len() {
            return Err(Error::InvalidInput(format!(
                "measurement has {} outcomes, ensemble has {} states",
                self.len(),
                ens.len()
            )));
        }
        let mut total = 0.0;
        for (x, e) in self.effects.iter().enumerate() {
            total += ens.priors()[x] * evaluate(e, &ens.states()[x])?;
        }
        Ok(total)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueKind {
    Normalization,
    EffectBounds,
    UnitEffectNotInCone,
    NotPointed,
    PriorNegative,
    PriorSum,
    StateNotInCone,
    EffectNotInCone,
    MeasurementSum,
    Dimension,
}

/// One violated invariant, with the offending indices and the size of the
/// violation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Issue {
    pub kind: IssueKind,
    pub indices: Vec<usize>,
    pub residual: f64,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)?;
        if !self.indices.is_empty() {
            write!(f, " (indices {:?})", self.indices)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
    pub warnings: Vec<String>,
    /// Whether the supplied effect cone equals the dual of the state cone.
    /// `None` when the check was not performed.
    pub unrestricted_effects: Option<bool>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }

    fn push(&mut self, kind: IssueKind, indices: Vec<usize>, residual: f64, message: String) {
        self.issues.push(Issue {
            kind,
            indices,
            residual,
            message,
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.issues.is_empty() {
            f.write_str("valid")?;
        }
        for (i, issue) in self.issues.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

/// Compact human-readable number for messages (`1.1`, not `1.0999999999999999`).
pub(crate) fn short(x: f64) -> String {
    let s = format!("{x:.12}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

/// Checks the framework axioms of a model. Never fails; every problem is
/// listed in the returned report.
pub fn validate_model(m: &GptModel, tol: f64) -> ValidationReport {
    let mut report = ValidationReport::default();
    let u = m.unit_effect();

    for (i, w) in m.state_gens().iter().enumerate() {
        let residual = (u.dot(w) - 1.0).abs();
        if residual > tol {
            report.push(
                IssueKind::Normalization,
                vec![i],
                residual,
                format!("u[w]=1 violated, residual {}", short(residual)),
            );
        }
    }

    for (j, g) in m.effect_gens().iter().enumerate() {
        for (i, w) in m.state_gens().iter().enumerate() {
            let p = g.dot(w);
            let residual = if p < 0.0 { -p } else { p - 1.0 };
            if residual > tol {
                report.push(
                    IssueKind::EffectBounds,
                    vec![j, i],
                    residual,
                    format!(
                        "effect generator {j} on state generator {i} gives {}, outside [0,1]",
                        short(p)
                    ),
                );
            }
        }
    }

    let effect_cone = m.effect_cone();
    let state_cone = m.state_cone();
    match effect_cone.member_of(u, tol) {
        Ok(true) => {}
        Ok(false) => report.push(
            IssueKind::UnitEffectNotInCone,
            vec![],
            f64::NAN,
            "unit effect is not in the effect cone".into(),
        ),
        Err(e) => report.warnings.push(format!("unit-effect membership undecided: {e}")),
    }

    // Pointedness: no -w_i may lie in the cone of the remaining generators.
    for (i, w) in m.state_gens().iter().enumerate() {
        let others: Vec<Point> = m
            .state_gens()
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != i)
            .map(|(_, p)| p.clone())
            .collect();
        if others.is_empty() {
            continue;
        }
        let Ok(rest) = PolyhedralCone::new(m.dim(), others) else {
            continue;
        };
        if let Ok(true) = rest.member_of(&w.scale(-1.0), tol) {
            report.push(
                IssueKind::NotPointed,
                vec![i],
                f64::NAN,
                format!("state cone is not pointed at generator {i}"),
            );
        }
    }

    if matrix_rank(m.state_gens(), 1e-10) < m.dim() {
        report
            .warnings
            .push("state cone is not full-dimensional".to_string());
    }

    if m.dim() <= crate::cone::MAX_DUAL_DIM {
        report.unrestricted_effects = state_cone
            .dual_cone()
            .ok()
            .map(|dual| {
                let effects_positive = m
                    .effect_gens()
                    .iter()
                    .all(|g| m.state_gens().iter().all(|w| g.dot(w) >= -tol));
                effects_positive
                    && dual
                        .generators()
                        .iter()
                        .all(|y| matches!(effect_cone.member_of(y, tol), Ok(true)))
            });
    }
    report
}

/// Checks prior-simplex membership and validity of every ensemble state.
pub fn validate_ensemble(ens: &Ensemble, tol: f64) -> ValidationReport {
    let mut report = ValidationReport::default();
    for (x, &q) in ens.priors().iter().enumerate() {
        if q < -tol {
            report.push(
                IssueKind::PriorNegative,
                vec![x],
                -q,
                format!("prior {x} is negative ({})", short(q)),
            );
        }
    }
    let total: f64 = ens.priors().iter().sum();
    if (total - 1.0).abs() > tol {
        report.push(
            IssueKind::PriorSum,
            vec![],
            (total - 1.0).abs(),
            format!("priors sum {}", short(total)),
        );
    }

    let u = ens.model().unit_effect();
    let cone = ens.model().state_cone();
    for (x, w) in ens.states().iter().enumerate() {
        let residual = (u.dot(w) - 1.0).abs();
        if residual > tol {
            report.push(
                IssueKind::Normalization,
                vec![x],
                residual,
                format!("u[w]=1 violated for state {x}, residual {}", short(residual)),
            );
        }
        match cone.member_of(w, tol) {
            Ok(true) => {}
            Ok(false) => report.push(
                IssueKind::StateNotInCone,
                vec![x],
                f64::NAN,
                format!("state {x} is outside the state cone"),
            ),
            Err(e) => report.warnings.push(format!("state {x} membership undecided: {e}")),
        }
    }
    report
}

/// Checks that every effect lies in the effect cone and that the effects sum
/// to the unit effect.
pub fn validate_measurement(model: &GptModel, meas: &Measurement, tol: f64) -> ValidationReport {
    let mut report = ValidationReport::default();
    let cone = model.effect_cone();
    for (x, e) in meas.effects().iter().enumerate() {
        if e.dim() != model.dim() {
            report.push(
                IssueKind::Dimension,
                vec![x],
                f64::NAN,
                format!("effect {x} has dimension {}, expected {}", e.dim(), model.dim()),
            );
            continue;
        }
        if !matches!(cone.member_of(e, tol), Ok(true)) {
            report.push(
                IssueKind::EffectNotInCone,
                vec![x],
                f64::NAN,
                format!("effect {x} is outside the effect cone"),
            );
        }
    }
    if report.is_valid() {
        let sum = sum_points(model.dim(), meas.effects());
        let residual = sum.distance(model.unit_effect());
        if residual > tol * meas.len().max(1) as f64 {
            report.push(
                IssueKind::MeasurementSum,
                vec![],
                residual,
                format!("effects do not sum to u, residual {}", short(residual)),
            );
        }
    }
    report
}

/// Numerical rank of a list of vectors via Gaussian elimination with partial
/// pivoting, relative to the largest entry.
pub(crate) fn matrix_rank(rows: &[Point], rel_tol: f64) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let mut a: Vec<Vec<f64>> = rows.iter().map(|p| p.coords().to_vec()).collect();
    let ncols = a[0].len();
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0;
    }
    let eps = rel_tol * scale;
    let mut rank = 0;
    for col in 0..ncols {
        if rank == a.len() {
            break;
        }
        let (pivot, mag) = (rank..a.len())
            .map(|r| (r, a[r][col].abs()))
            .fold((rank, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if mag <= eps {
            continue;
        }
        a.swap(rank, pivot);
        for r in rank + 1..a.len() {
            let f = a[r][col] / a[rank][col];
            if f != 0.0 {
                for c in col..ncols {
                    a[r][c] -= f * a[rank][c];
                }
            }
        }
        rank += 1;
    }
    rank
}
