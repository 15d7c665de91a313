//! The measurement (primal) and symmetry-operator (dual) problems of
//! minimum-error discrimination, and verification of their complementarity
//! certificates.
//!
//! Primal: `max Σ_x q_x e_x[w_x]` over effects `e_x` in the effect cone with
//! `Σ_x e_x = u`. Dual: `min u[K]` over `K` with `g[K − q_x w_x] ≥ 0` for
//! every effect generator `g` and every `x`. At an optimum
//! `K = q_x w_x + r_x d_x` with `u[d_x] = 1`, `p_guess = u[K] = q_x + r_x`,
//! and `e_x[r_x d_x] = 0`.

use serde::{Deserialize, Serialize};

use crate::cone::cone_ge;
use crate::lp::{solve_lp, LpBuilder, LpProblem, LpStatus};
use crate::model::{sum_points, Ensemble, Measurement, Point};
use crate::{Error, Result};

/// Weight `r_x` and normalized complementary state `d_x`. `d` is `None` when
/// `r ≤ tol`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplementaryPair {
    pub r: f64,
    pub d: Option<Point>,
}

impl ComplementaryPair {
    pub fn is_degenerate(&self) -> bool {
        self.d.is_none()
    }

    /// `r_x d_x`, or `None` for a degenerate pair.
    pub fn scaled(&self) -> Option<Point> {
        self.d.as_ref().map(|d| d.scale(self.r))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminationSolution {
    #[serde(default)]
    pub p_guess: f64,
    pub measurement: Measurement,
    #[serde(rename = "K")]
    pub symmetry_operator: Point,
    pub complementary: Vec<ComplementaryPair>,
    #[serde(default)]
    pub primal_objective: f64,
    #[serde(default)]
    pub dual_objective: f64,
}

impl DiscriminationSolution {
    /// Same dual data with a different measurement (and its value).
    pub fn with_measurement(&self, measurement: Measurement, primal_objective: f64) -> Self {
        DiscriminationSolution {
            measurement,
            primal_objective,
            ..self.clone()
        }
    }

    pub fn gap(&self) -> f64 {
        (self.primal_objective - self.dual_objective).abs()
    }
}

/// Variables `c_{x,j} ≥ 0` (index `x·G + j`) with `e_x = Σ_j c_{x,j} g_j`;
/// one equality row per coordinate for `Σ_x e_x = u`; objective
/// `−Σ_x q_x e_x[w_x]`.
pub fn build_primal(ens: &Ensemble) -> LpProblem {
    let gens = ens.model().effect_gens();
    let g = gens.len();
    let n = ens.len();
    let d = ens.model().dim();
    let mut objective = vec![0.0; n * g];
    for x in 0..n {
        for (j, gj) in gens.iter().enumerate() {
            objective[x * g + j] = -ens.priors()[x] * gj.dot(&ens.states()[x]);
        }
    }
    let rows = (0..d)
        .map(|k| {
            let mut row = vec![0.0; n * g];
            for x in 0..n {
                for (j, gj) in gens.iter().enumerate() {
                    row[x * g + j] = gj[k];
                }
            }
            row
        })
        .collect();
    LpProblem::new(objective, rows, ens.model().unit_effect().coords().to_vec())
        .expect("dimensions consistent by construction")
}

/// Variables `K⁺, K⁻ ∈ R^d_+` with `K = K⁺ − K⁻`; rows
/// `g_j[K] ≥ g_j[q_x w_x]` for every `x` (outer) and `j` (inner); objective
/// `u[K]`.
pub fn build_dual(ens: &Ensemble) -> LpProblem {
    let u = ens.model().unit_effect();
    let mut objective = u.coords().to_vec();
    objective.extend(u.coords().iter().map(|c| -c));
    let mut lp = LpBuilder::minimize(objective);
    for x in 0..ens.len() {
        let qw = ens.weighted_state(x);
        for g in ens.model().effect_gens() {
            let mut row = g.coords().to_vec();
            row.extend(g.coords().iter().map(|c| -c));
            lp = lp.ge(row, g.dot(&qw));
        }
    }
    lp.build().expect("dimensions consistent by construction")
}

/// Splits `K` into `q_x w_x + r_x d_x` with `r_x = u[K] − q_x`.
pub fn complementary_pairs(ens: &Ensemble, k: &Point, tol: f64) -> Vec<ComplementaryPair> {
    let uk = ens.model().unit_effect().dot(k);
    (0..ens.len())
        .map(|x| {
            let r = (uk - ens.priors()[x]).max(0.0);
            let d = (r > tol).then(|| k.sub(&ens.weighted_state(x)).scale(1.0 / r));
            ComplementaryPair { r, d }
        })
        .collect()
}

/// Solves both problems and assembles the optimal measurement, the symmetry
/// operator and the complementary states.
pub fn solve_discrimination(ens: &Ensemble, tol: f64) -> Result<DiscriminationSolution> {
    let model = ens.model();
    let g = model.effect_gens().len();
    let d = model.dim();

    let primal = build_primal(ens);
    let ps = solve_lp(&primal, tol)?;
    match ps.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => {
            return Err(Error::InvalidInput(
                "no measurement exists: unit effect is outside the effect cone".into(),
            ))
        }
        LpStatus::Unbounded => {
            return Err(Error::NumericalFailure("measurement problem reported unbounded".into()))
        }
    }
    let effects: Vec<Point> = (0..ens.len())
        .map(|x| {
            model
                .effect_gens()
                .iter()
                .enumerate()
                .fold(Point::zeros(d), |acc, (j, gj)| acc.add_scaled(ps.x[x * g + j], gj))
        })
        .collect();
    let measurement = Measurement::new(effects);
    let primal_objective = measurement.success_probability(ens)?;

    let dual = build_dual(ens);
    let ds = solve_lp(&dual, tol)?;
    if ds.status != LpStatus::Optimal {
        return Err(Error::InvalidInput(format!(
            "symmetry-operator problem is {:?}; the effect cone is not pointed",
            ds.status
        )));
    }
    let k = Point::new((0..d).map(|i| ds.x[i] - ds.x[d + i]).collect());
    let dual_objective = model.unit_effect().dot(&k);

    let gap = (primal_objective - dual_objective).abs();
    if gap > 10.0 * tol {
        return Err(Error::InternalInconsistency(format!(
            "duality gap {gap:e} between primal {primal_objective} and dual {dual_objective}"
        )));
    }

    let complementary = complementary_pairs(ens, &k, tol);
    Ok(DiscriminationSolution {
        p_guess: dual_objective,
        measurement,
        symmetry_operator: k,
        complementary,
        primal_objective,
        dual_objective,
    })
}

/// Complementarity residuals recomputed from scratch. A passing report
/// certifies optimality of both the measurement and `K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    /// `‖K − q_x w_x − r_x d_x‖`
    pub stability_residuals: Vec<f64>,
    /// `K ≥ q_x w_x` in the effect-cone order.
    pub positivity_ok: Vec<bool>,
    /// `|e_x[r_x d_x]|`
    pub orthogonality_residuals: Vec<f64>,
    /// `‖Σ_x e_x − u‖`
    pub measurement_residual: f64,
    /// `|Σ_x q_x e_x[w_x] − u[K]|`
    pub gap: f64,
    pub effects_in_cone: Vec<bool>,
    /// `r_x ∈ [0, 1]`, `u[d_x] = 1` and `d_x` positive on every effect.
    pub complementary_ok: Vec<bool>,
    /// Lengths and dimensions of the solution match the ensemble.
    pub structure_ok: bool,
    pub passed: bool,
}

impl KktReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.structure_ok
            && self.stability_residuals.iter().all(|&r| r <= tol)
            && self.positivity_ok.iter().all(|&b| b)
            && self.orthogonality_residuals.iter().all(|&r| r <= tol)
            && self.measurement_residual <= tol
            && self.gap <= tol
            && self.effects_in_cone.iter().all(|&b| b)
            && self.complementary_ok.iter().all(|&b| b)
    }

    fn malformed() -> Self {
        KktReport {
            stability_residuals: Vec::new(),
            positivity_ok: Vec::new(),
            orthogonality_residuals: Vec::new(),
            measurement_residual: f64::INFINITY,
            gap: f64::INFINITY,
            effects_in_cone: Vec::new(),
            complementary_ok: Vec::new(),
            structure_ok: false,
            passed: false,
        }
    }

    /// Human-readable list of failing checks.
    pub fn failures(&self, tol: f64) -> Vec<String> {
        let mut out = Vec::new();
        if !self.structure_ok {
            out.push("solution shape does not match the ensemble".to_string());
        }
        for (x, r) in self.stability_residuals.iter().enumerate() {
            if *r > tol {
                out.push(format!("stability residual {x}: {r:e}"));
            }
        }
        for (x, ok) in self.positivity_ok.iter().enumerate() {
            if !ok {
                out.push(format!("K ≥ q_{x} w_{x} violated"));
            }
        }
        for (x, r) in self.orthogonality_residuals.iter().enumerate() {
            if *r > tol {
                out.push(format!("orthogonality residual {x}: {r:e}"));
            }
        }
        if self.measurement_residual > tol {
            out.push(format!("measurement residual: {:e}", self.measurement_residual));
        }
        if self.gap > tol {
            out.push(format!("gap: {:e}", self.gap));
        }
        for (x, ok) in self.effects_in_cone.iter().enumerate() {
            if !ok {
                out.push(format!("effect {x} outside the effect cone"));
            }
        }
        for (x, ok) in self.complementary_ok.iter().enumerate() {
            if !ok {
                out.push(format!("complementary pair {x} invalid"));
            }
        }
        out
    }
}

/// Verifies a possibly untrusted solution against the ensemble.
pub fn verify_kkt(ens: &Ensemble, sol: &DiscriminationSolution, tol: f64) -> KktReport {
    let model = ens.model();
    let d = model.dim();
    let n = ens.len();
    let k = &sol.symmetry_operator;
    let shape_ok = sol.measurement.len() == n
        && sol.complementary.len() == n
        && k.dim() == d
        && sol.measurement.effects().iter().all(|e| e.dim() == d)
        && sol
            .complementary
            .iter()
            .all(|c| c.d.as_ref().is_none_or(|p| p.dim() == d));
    if !shape_ok {
        return KktReport::malformed();
    }

    let u = model.unit_effect();
    let effect_cone = model.effect_cone();
    let zero = Point::zeros(d);
    let mut report = KktReport {
        stability_residuals: Vec::with_capacity(n),
        positivity_ok: Vec::with_capacity(n),
        orthogonality_residuals: Vec::with_capacity(n),
        measurement_residual: sum_points(d, sol.measurement.effects()).distance(u),
        gap: 0.0,
        effects_in_cone: Vec::with_capacity(n),
        complementary_ok: Vec::with_capacity(n),
        structure_ok: true,
        passed: false,
    };

    let mut primal = 0.0;
    for x in 0..n {
        let qw = ens.weighted_state(x);
        let e = &sol.measurement.effects()[x];
        let pair = &sol.complementary[x];
        let rd = pair.scaled().unwrap_or_else(|| k.sub(&qw));
        report
            .stability_residuals
            .push(k.sub(&qw).sub(&pair.scaled().unwrap_or_else(|| zero.clone())).norm());
        report
            .positivity_ok
            .push(cone_ge(k, &qw, &effect_cone, tol).unwrap_or(false));
        report.orthogonality_residuals.push(e.dot(&rd).abs());
        report
            .effects_in_cone
            .push(effect_cone.member_of(e, tol).unwrap_or(false));
        let weight_ok = pair.r.is_finite() && pair.r >= -tol && pair.r <= 1.0 + tol;
        let state_ok = match &pair.d {
            Some(dx) => {
                (u.dot(dx) - 1.0).abs() <= tol
                    && cone_ge(dx, &zero, &effect_cone, tol).unwrap_or(false)
            }
            None => pair.r <= tol,
        };
        report.complementary_ok.push(weight_ok && state_ok);
        primal += ens.priors()[x] * e.dot(&ens.states()[x]);
    }
    report.gap = (primal - u.dot(k)).abs();
    report.passed = report.passes(tol);
    report
}

/// Value of guessing the most likely state without measuring.
pub fn no_measurement_value(ens: &Ensemble) -> f64 {
    ens.max_prior()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polygon::{no_measurement_ensemble, polygon_model, uniform_ensemble};

    fn close(a: &Point, b: &[f64], tol: f64) -> bool {
        a.coords().iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn single_state_is_identified() {
        let m = polygon_model(5).unwrap();
        let w = m.state_gens()[2].clone();
        let ens = Ensemble::new(m, vec![w], vec![1.0]).unwrap();
        let lp = build_primal(&ens);
        let s = solve_lp(&lp, 1e-9).unwrap();
        assert!((s.objective + 1.0).abs() < 1e-9);
        let sol = solve_discrimination(&ens, 1e-9).unwrap();
        assert!((sol.p_guess - 1.0).abs() < 1e-9);
        assert!(sol.complementary[0].is_degenerate());
        assert!(verify_kkt(&ens, &sol, 1e-9).passed);
    }

    #[test]
    fn primal_values() {
        for (n, expected) in [(3, 1.0), (4, 0.5)] {
            let ens = uniform_ensemble(n).unwrap();
            let s = solve_lp(&build_primal(&ens), 1e-9).unwrap();
            assert!((-s.objective - expected).abs() < 1e-9, "n={n}");
        }
    }

    #[test]
    fn dual_minimizers() {
        let ens = uniform_ensemble(4).unwrap();
        let s = solve_lp(&build_dual(&ens), 1e-9).unwrap();
        let k = [s.x[0] - s.x[3], s.x[1] - s.x[4], s.x[2] - s.x[5]];
        assert!(close(&Point::new(k.to_vec()), &[0.0, 0.0, 0.5], 1e-9));

        let ens = uniform_ensemble(3).unwrap();
        let s = solve_lp(&build_dual(&ens), 1e-9).unwrap();
        let k = [s.x[0] - s.x[3], s.x[1] - s.x[4], s.x[2] - s.x[5]];
        assert!(close(&Point::new(k.to_vec()), &[0.0, 0.0, 1.0], 1e-9));
    }

    #[test]
    fn trivial_dual_point_bounds_guessing_probability() {
        let ens = uniform_ensemble(4).unwrap();
        let k = (0..ens.len()).fold(Point::zeros(3), |acc, x| acc.add(&ens.weighted_state(x)));
        assert!((ens.model().unit_effect().dot(&k) - 1.0).abs() < 1e-12);
        for x in 0..ens.len() {
            assert!(cone_ge(&k, &ens.weighted_state(x), &ens.model().effect_cone(), 1e-9).unwrap());
        }
        let sol = solve_discrimination(&ens, 1e-9).unwrap();
        assert!(sol.p_guess <= 1.0);
    }

    #[test]
    fn triangle_solution() {
        let ens = uniform_ensemble(3).unwrap();
        let sol = solve_discrimination(&ens, 1e-9).unwrap();
        assert!((sol.p_guess - 1.0).abs() < 1e-9);
        let r2 = 2f64.sqrt();
        for c in &sol.complementary {
            assert!((c.r - 2.0 / 3.0).abs() < 1e-9);
        }
        let d0 = sol.complementary[0].d.as_ref().unwrap();
        assert!(close(d0, &[-r2 / 2.0, 0.0, 1.0], 1e-9));
        // d_x is the midpoint of the two other vertices.
        let s = ens.states();
        for x in 0..3 {
            let mid = s[(x + 1) % 3].add(&s[(x + 2) % 3]).scale(0.5);
            assert!(sol.complementary[x].d.as_ref().unwrap().distance(&mid) < 1e-9);
        }
    }

    #[test]
    fn square_solution() {
        let ens = uniform_ensemble(4).unwrap();
        let sol = solve_discrimination(&ens, 1e-9).unwrap();
        assert!((sol.p_guess - 0.5).abs() < 1e-9);
        for x in 0..4 {
            let c = &sol.complementary[x];
            assert!((c.r - 0.25).abs() < 1e-9);
            assert!(c.d.as_ref().unwrap().distance(&ens.states()[(x + 2) % 4]) < 1e-9);
        }
        let report = verify_kkt(&ens, &sol, 1e-9);
        assert!(report.passed, "{report:?}");
        assert!(report.stability_residuals.iter().all(|&r| r <= 1e-9));
    }

    #[test]
    fn mixture_half_attains_no_measurement_value() {
        let ens = no_measurement_ensemble(0.5).unwrap();
        let sol = solve_discrimination(&ens, 1e-9).unwrap();
        assert!((sol.p_guess - 0.5).abs() < 1e-9);
        assert!(close(&sol.symmetry_operator, &[0.0, 0.0, 0.5], 1e-9));
        assert!((no_measurement_value(&ens) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn no_measurement_values() {
        assert!((no_measurement_value(&uniform_ensemble(5).unwrap()) - 0.2).abs() < 1e-15);
        let ens = no_measurement_ensemble(0.1).unwrap();
        assert!((no_measurement_value(&ens) - 0.225).abs() < 1e-15);
    }

    #[test]
    fn deterministic_alternative_measurement_passes() {
        let ens = uniform_ensemble(4).unwrap();
        let sol = solve_discrimination(&ens, 1e-9).unwrap();
        let f = ens.model().effect_gens();
        let z = Point::zeros(3);
        let meas = Measurement::new(vec![f[0].clone(), z.clone(), f[2].clone(), z]);
        let value = meas.success_probability(&ens).unwrap();
        assert!((value - 0.5).abs() < 1e-12);
        let alt = sol.with_measurement(meas, value);
        let report = verify_kkt(&ens, &alt, 1e-9);
        assert!(report.passed, "{:?}", report.failures(1e-9));
        // f_0[d_0] = f_0[w_2] = 0
        assert!(report.orthogonality_residuals[0] < 1e-12);
    }

    #[test]
    fn perturbed_operator_is_reported() {
        let ens = uniform_ensemble(4).unwrap();
        let mut sol = solve_discrimination(&ens, 1e-9).unwrap();
        sol.symmetry_operator = Point::new(vec![0.0, 0.0, 0.6]);
        let report = verify_kkt(&ens, &sol, 1e-9);
        assert!(!report.passed);
        for r in &report.stability_residuals {
            assert!((r - 0.1).abs() < 1e-9);
        }
    }

    #[test]
    fn suboptimal_measurement_fails() {
        let ens = uniform_ensemble(4).unwrap();
        let sol = solve_discrimination(&ens, 1e-9).unwrap();
        let trivial = Measurement::trivial(ens.model(), 4, 0);
        let value = trivial.success_probability(&ens).unwrap();
        let report = verify_kkt(&ens, &sol.with_measurement(trivial, value), 1e-9);
        assert!(!report.passed);
        assert!((report.gap - 0.25).abs() < 1e-9);
    }

    #[test]
    fn malformed_solution_is_rejected() {
        let ens = uniform_ensemble(4).unwrap();
        let mut sol = solve_discrimination(&ens, 1e-9).unwrap();
        sol.complementary.pop();
        let report = verify_kkt(&ens, &sol, 1e-9);
        assert!(!report.structure_ok && !report.passed);
    }

    #[test]
    fn repeated_states_stay_distinct() {
        let m = polygon_model(4).unwrap();
        let w = m.state_gens().to_vec();
        let ens = Ensemble::new(m, vec![w[0].clone(), w[0].clone(), w[2].clone()], vec![0.3, 0.3, 0.4])
            .unwrap();
        let sol = solve_discrimination(&ens, 1e-9).unwrap();
        assert_eq!(sol.measurement.len(), 3);
        // w_0 and w_2 are perfectly distinguishable; the duplicate cannot add.
        assert!((sol.p_guess - 0.7).abs() < 1e-9);
        assert!(verify_kkt(&ens, &sol, 1e-9).passed);
    }

    #[test]
    fn solution_json_shape() {
        let ens = uniform_ensemble(4).unwrap();
        let sol = solve_discrimination(&ens, 1e-9).unwrap();
        let v = serde_json::to_value(&sol).unwrap();
        assert!(v.get("K").is_some());
        assert!(v["complementary"][0].get("r").is_some());
        let back: DiscriminationSolution = serde_json::from_value(v).unwrap();
        assert_eq!(back, sol);
    }
}
