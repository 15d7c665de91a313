//! Geometric view of optimality: the polytope of weighted states and the
//! polytope of weighted complementary states are congruent through a point
//! reflection, `q_x w_x − q_y w_y = r_y d_y − r_x d_x`. For uniform priors the
//! scale factor between them is `r = p_guess − 1/N`.
//!
//! Distances use the Euclidean norm on ambient coordinates.

use serde::{Deserialize, Serialize};

use crate::discrimination::DiscriminationSolution;
use crate::model::{Ensemble, Point};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CongruenceReport {
    /// Worst `‖(q_x w_x − q_y w_y) + (r_x d_x − r_y d_y)‖` over checked pairs.
    pub max_residual: f64,
    /// Common ratio `‖(w_x − w_y)/N‖ / ‖d_x − d_y‖`, for uniform priors only.
    pub ratio: Option<f64>,
    /// Max minus min of the per-pair ratios (0 when no ratio was computed).
    pub ratio_spread: f64,
    /// Outcomes left out because their complementary pair is degenerate.
    pub skipped: Vec<usize>,
}

fn uniform_priors(ens: &Ensemble, tol: f64) -> bool {
    let q = 1.0 / ens.len() as f64;
    ens.priors().iter().all(|p| (p - q).abs() <= tol)
}

fn pair_ratios(ens: &Ensemble, sol: &DiscriminationSolution, tol: f64) -> Vec<f64> {
    let n = ens.len();
    let mut ratios = Vec::new();
    for x in 0..n {
        for y in x + 1..n {
            let (Some(dx), Some(dy)) = (&sol.complementary[x].d, &sol.complementary[y].d) else {
                continue;
            };
            let denom = dx.distance(dy);
            if denom <= tol {
                continue;
            }
            let num = ens.states()[x].sub(&ens.states()[y]).scale(1.0 / n as f64).norm();
            ratios.push(num / denom);
        }
    }
    ratios
}

/// Checks the congruence relation over all pairs `x < y` whose
/// complementary pairs are non-degenerate.
pub fn congruence_check(ens: &Ensemble, sol: &DiscriminationSolution, tol: f64) -> CongruenceReport {
    let n = ens.len().min(sol.complementary.len());
    let skipped: Vec<usize> = (0..n)
        .filter(|&x| sol.complementary[x].is_degenerate())
        .collect();
    let scaled: Vec<Option<Point>> = sol.complementary.iter().map(|c| c.scaled()).collect();
    let mut max_residual: f64 = 0.0;
    for x in 0..n {
        for y in x + 1..n {
            let (Some(rx), Some(ry)) = (&scaled[x], &scaled[y]) else {
                continue;
            };
            let lhs = ens.weighted_state(x).sub(&ens.weighted_state(y));
            let residual = lhs.add(&rx.sub(ry)).norm();
            max_residual = max_residual.max(residual);
        }
    }

    let (ratio, ratio_spread) = if n == ens.len() && uniform_priors(ens, tol) {
        let ratios = pair_ratios(ens, sol, tol);
        if ratios.is_empty() {
            (None, 0.0)
        } else {
            let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (Some(ratios.iter().sum::<f64>() / ratios.len() as f64), hi - lo)
        }
    } else {
        (None, 0.0)
    };

    CongruenceReport {
        max_residual,
        ratio,
        ratio_spread,
        skipped,
    }
}

/// The scale factor `r` between the state polytope and the complementary
/// polytope for uniform priors. Fails when the per-pair ratios disagree or
/// differ from `p_guess − 1/N` by more than `tol`.
pub fn ratio_r(ens: &Ensemble, sol: &DiscriminationSolution, tol: f64) -> Result<f64> {
    if sol.complementary.len() != ens.len() {
        return Err(Error::InvalidInput("solution and ensemble sizes differ".into()));
    }
    if !uniform_priors(ens, tol) {
        return Err(Error::Precondition("ratio requires uniform priors".into()));
    }
    let ratios = pair_ratios(ens, sol, tol);
    if ratios.is_empty() {
        return Err(Error::UndefinedRatio(
            "no pair of distinct complementary states".into(),
        ));
    }
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo > tol {
        return Err(Error::InternalInconsistency(format!(
            "pair ratios spread over {:e}",
            hi - lo
        )));
    }
    let r = ratios[0];
    let expected = sol.p_guess - 1.0 / ens.len() as f64;
    if (r - expected).abs() > tol {
        return Err(Error::InternalInconsistency(format!(
            "ratio {r} differs from p_guess − 1/N = {expected}"
        )));
    }
    Ok(r)
}

/// Scales an interior axis until it dominates every weighted state:
/// `K = λ·axis` with `λ = max_{g,x} g[q_x w_x] / g[axis]`. The result is
/// always dual feasible; it is optimal when the ensemble is symmetric about
/// the axis.
pub fn symmetric_axis_k(ens: &Ensemble, axis: &Point, tol: f64) -> Result<Point> {
    let model = ens.model();
    if axis.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: axis.dim(),
        });
    }
    if (model.unit_effect().dot(axis) - 1.0).abs() > tol {
        return Err(Error::Precondition("axis must satisfy u[axis] = 1".into()));
    }
    let mut lambda = f64::NEG_INFINITY;
    for g in model.effect_gens() {
        let ga = g.dot(axis);
        if ga <= tol {
            return Err(Error::Precondition(
                "axis must be strictly positive on every effect generator".into(),
            ));
        }
        for x in 0..ens.len() {
            lambda = lambda.max(g.dot(&ens.weighted_state(x)) / ga);
        }
    }
    Ok(axis.scale(lambda))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::cone_ge;
    use crate::discrimination::solve_discrimination;
    use crate::polygon::{no_measurement_ensemble, polygon_model, uniform_ensemble};

    const AXIS: [f64; 3] = [0.0, 0.0, 1.0];

    #[test]
    fn polygon_congruence() {
        for n in [3, 4] {
            let ens = uniform_ensemble(n).unwrap();
            let sol = solve_discrimination(&ens, 1e-9).unwrap();
            let report = congruence_check(&ens, &sol, 1e-9);
            assert!(report.max_residual <= 1e-9, "n={n}");
            assert!(report.ratio_spread <= 1e-9);
            assert!(report.skipped.is_empty());
        }
    }

    #[test]
    fn broken_congruence() {
        let ens = uniform_ensemble(3).unwrap();
        let mut sol = solve_discrimination(&ens, 1e-9).unwrap();
        let d0 = sol.complementary[0].d.clone().unwrap();
        let d1 = sol.complementary[1].d.clone().unwrap();
        sol.complementary[1].d = Some(d0.clone());
        let report = congruence_check(&ens, &sol, 1e-9);
        let expected = 2.0 / 3.0 * d1.distance(&d0);
        assert!(report.max_residual > 0.1);
        assert!((report.max_residual - expected).abs() < 1e-9);
    }

    #[test]
    fn ratios() {
        let ens = uniform_ensemble(4).unwrap();
        let sol = solve_discrimination(&ens, 1e-9).unwrap();
        assert!((ratio_r(&ens, &sol, 1e-9).unwrap() - 0.25).abs() < 1e-9);

        let ens = uniform_ensemble(3).unwrap();
        let sol = solve_discrimination(&ens, 1e-9).unwrap();
        assert!((ratio_r(&ens, &sol, 1e-9).unwrap() - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn antipodal_pair_ratio() {
        let m = polygon_model(4).unwrap();
        let states = vec![m.state_gens()[0].clone(), m.state_gens()[2].clone()];
        let ens = Ensemble::new(m, states, vec![0.5, 0.5]).unwrap();
        let sol = solve_discrimination(&ens, 1e-9).unwrap();
        assert!((sol.p_guess - 1.0).abs() < 1e-9);
        assert!((ratio_r(&ens, &sol, 1e-9).unwrap() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn ratio_errors() {
        let ens = no_measurement_ensemble(0.5).unwrap();
        let sol = solve_discrimination(&ens, 1e-9).unwrap();
        assert!(matches!(ratio_r(&ens, &sol, 1e-9), Err(Error::Precondition(_))));

        let m = polygon_model(4).unwrap();
        let w = m.state_gens()[1].clone();
        let ens = Ensemble::new(m, vec![w.clone(), w], vec![0.5, 0.5]).unwrap();
        let sol = solve_discrimination(&ens, 1e-9).unwrap();
        assert!(matches!(ratio_r(&ens, &sol, 1e-9), Err(Error::UndefinedRatio(_))));
    }

    #[test]
    fn axis_construction() {
        let axis = Point::new(AXIS.to_vec());
        let k = symmetric_axis_k(&uniform_ensemble(4).unwrap(), &axis, 1e-9).unwrap();
        assert!(k.distance(&Point::new(vec![0.0, 0.0, 0.5])) < 1e-12);
        let k = symmetric_axis_k(&uniform_ensemble(3).unwrap(), &axis, 1e-9).unwrap();
        assert!(k.distance(&Point::new(vec![0.0, 0.0, 1.0])) < 1e-12);
        let k = symmetric_axis_k(&no_measurement_ensemble(0.5).unwrap(), &axis, 1e-9).unwrap();
        assert!(k.distance(&Point::new(vec![0.0, 0.0, 0.5])) < 1e-12);
    }

    #[test]
    fn axis_preconditions() {
        let ens = uniform_ensemble(4).unwrap();
        assert!(symmetric_axis_k(&ens, &Point::new(vec![0.0, 0.0, 2.0]), 1e-9).is_err());
        // A vertex of the square is on the boundary: f_1 and f_2 vanish there.
        let vertex = ens.states()[0].clone();
        assert!(matches!(
            symmetric_axis_k(&ens, &vertex, 1e-9),
            Err(Error::Precondition(_))
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn axis_operator_is_dual_feasible_upper_bound(
                n in 3usize..9,
                raw in proptest::collection::vec(0.01f64..1.0, 2..6),
            ) {
                let m = polygon_model(n).unwrap();
                let k = raw.len();
                let states: Vec<Point> = (0..k).map(|i| m.state_gens()[i % n].clone()).collect();
                let total: f64 = raw.iter().sum();
                let priors: Vec<f64> = raw.iter().map(|r| r / total).collect();
                let ens = Ensemble::new(m, states, priors).unwrap();
                let axis = Point::new(AXIS.to_vec());
                let kk = symmetric_axis_k(&ens, &axis, 1e-9).unwrap();
                let cone = ens.model().effect_cone();
                for x in 0..ens.len() {
                    prop_assert!(cone_ge(&kk, &ens.weighted_state(x), &cone, 1e-9).unwrap());
                }
                let sol = solve_discrimination(&ens, 1e-9).unwrap();
                prop_assert!(ens.model().unit_effect().dot(&kk) >= sol.p_guess - 1e-9);
            }
        }
    }
}
