//! The regular-polygon family of GPTs and its worked examples: perfect
//! discrimination of the triangle, non-unique optimal measurements on the
//! square, and the regime where no measurement is optimal.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::discrimination::{solve_discrimination, verify_kkt, DiscriminationSolution, KktReport};
use crate::geometry::{congruence_check, CongruenceReport};
use crate::model::{Ensemble, GptModel, Measurement, Point};
use crate::oracle::{dual_vertex_enumeration, OracleResult};
use crate::{Error, Result};

/// Threshold on the mixture prior stated alongside the no-measurement
/// example in the literature. Reported, never used as ground truth.
pub const CLAIMED_THRESHOLD: f64 = 0.2;

/// Threshold implied by dual feasibility of `K = p·w_4` on the square:
/// `f_0[p w_4 − q_0 w_0] = (3p − 1)/4 ≥ 0`.
pub const DUAL_FEASIBILITY_THRESHOLD: f64 = 1.0 / 3.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolygonSpec {
    pub n: usize,
    /// Circumradius `cos(π/n)^(-1/2)`.
    pub rn: f64,
}

impl PolygonSpec {
    pub fn new(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidInput(format!(
                "polygon order must be at least 3, got {n}"
            )));
        }
        Ok(PolygonSpec {
            n,
            rn: (PI / n as f64).cos().powf(-0.5),
        })
    }

    /// Vertex `x`: `(r cos(2πx/n), r sin(2πx/n), 1)`.
    pub fn state(&self, x: usize) -> Point {
        let t = 2.0 * PI * x as f64 / self.n as f64;
        Point::new(vec![self.rn * t.cos(), self.rn * t.sin(), 1.0])
    }

    /// Effect generator `x`. Even orders use facet normals rotated half a
    /// step; odd orders use rescaled vertices.
    pub fn effect(&self, x: usize) -> Point {
        let n = self.n as f64;
        if self.n.is_multiple_of(2) {
            let t = (2.0 * x as f64 - 1.0) * PI / n;
            Point::new(vec![self.rn * t.cos(), self.rn * t.sin(), 1.0]).scale(0.5)
        } else {
            let t = 2.0 * PI * x as f64 / n;
            Point::new(vec![self.rn * t.cos(), self.rn * t.sin(), 1.0])
                .scale(1.0 / (1.0 + self.rn * self.rn))
        }
    }
}

pub fn polygon_model(n: usize) -> Result<GptModel> {
    let spec = PolygonSpec::new(n)?;
    GptModel::new(
        3,
        Point::new(vec![0.0, 0.0, 1.0]),
        (0..n).map(|x| spec.state(x)).collect(),
        (0..n).map(|x| spec.effect(x)).collect(),
    )
}

/// All `n` vertices of the order-`n` polygon with uniform priors.
pub fn uniform_ensemble(n: usize) -> Result<Ensemble> {
    let model = polygon_model(n)?;
    let states = model.state_gens().to_vec();
    Ensemble::new(model, states, vec![1.0 / n as f64; n])
}

/// Square vertices with prior `(1 − p)/4` each, plus their barycentre with
/// prior `p`.
pub fn no_measurement_ensemble(p: f64) -> Result<Ensemble> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidInput(format!("p must lie in [0, 1], got {p}")));
    }
    let model = polygon_model(4)?;
    let mut states = model.state_gens().to_vec();
    let centre = crate::model::sum_points(3, &states).scale(0.25);
    states.push(centre);
    let q = (1.0 - p) / 4.0;
    Ensemble::new(model, states, vec![q, q, q, q, p])
}

/// A solved worked example with its certificates.
#[derive(Debug, Clone, Serialize)]
pub struct Demo {
    #[serde(skip)]
    pub ensemble: Ensemble,
    #[serde(flatten)]
    pub solution: DiscriminationSolution,
    pub kkt: KktReport,
    pub geometry: CongruenceReport,
    pub oracle: OracleResult,
}

impl Demo {
    fn run(ensemble: Ensemble, tol: f64) -> Result<Self> {
        let solution = solve_discrimination(&ensemble, tol)?;
        let kkt = verify_kkt(&ensemble, &solution, tol);
        let geometry = congruence_check(&ensemble, &solution, tol);
        let oracle = dual_vertex_enumeration(&ensemble)?;
        Ok(Demo {
            ensemble,
            solution,
            kkt,
            geometry,
            oracle,
        })
    }
}

/// An optimal measurement other than the one returned by the solver,
/// checked against the same symmetry operator.
#[derive(Debug, Clone, Serialize)]
pub struct AlternateMeasurement {
    pub label: String,
    pub measurement: Measurement,
    pub p_guess: f64,
    pub kkt: KktReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct DemoN4 {
    #[serde(flatten)]
    pub demo: Demo,
    pub alternates: Vec<AlternateMeasurement>,
}

/// Uniform three-state triangle: perfect discrimination.
pub fn demo_n3(tol: f64) -> Result<Demo> {
    Demo::run(uniform_ensemble(3)?, tol)
}

/// Uniform four-state square, plus the three known optimal measurements:
/// `{f_x/2}`, `{f_0, f_2}` and `{f_1, f_3}` with each effect's outcome split
/// evenly between the two states it supports.
pub fn demo_n4(tol: f64) -> Result<DemoN4> {
    let demo = Demo::run(uniform_ensemble(4)?, tol)?;
    let f = demo.ensemble.model().effect_gens().to_vec();
    let half = |p: &Point| p.scale(0.5);
    let candidates = vec![
        (
            "i) {f_x/2}",
            Measurement::new(f.iter().map(half).collect()),
        ),
        (
            "ii) {f_0, f_2}",
            Measurement::new(vec![half(&f[0]), half(&f[2]), half(&f[2]), half(&f[0])]),
        ),
        (
            "iii) {f_1, f_3}",
            Measurement::new(vec![half(&f[1]), half(&f[1]), half(&f[3]), half(&f[3])]),
        ),
    ];
    let mut alternates = Vec::with_capacity(candidates.len());
    for (label, measurement) in candidates {
        let p_guess = measurement.success_probability(&demo.ensemble)?;
        let candidate = demo.solution.with_measurement(measurement.clone(), p_guess);
        let kkt = verify_kkt(&demo.ensemble, &candidate, tol);
        alternates.push(AlternateMeasurement {
            label: label.to_string(),
            measurement,
            p_guess,
            kkt,
        });
    }
    Ok(DemoN4 { demo, alternates })
}

/// The five-state ensemble of [`no_measurement_ensemble`], solved.
pub fn demo_no_measurement(p: f64, tol: f64) -> Result<Demo> {
    Demo::run(no_measurement_ensemble(p)?, tol)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    pub p: f64,
    pub p_guess: f64,
    pub max_prior: f64,
    pub no_measurement_optimal: bool,
    pub oracle_p_guess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdScan {
    pub rows: Vec<ScanRow>,
    /// Smallest `p` at which guessing without measuring is optimal, to 1e-6.
    pub threshold: f64,
    pub claimed_threshold: f64,
    pub dual_feasibility_threshold: f64,
}

fn no_measurement_optimal(p: f64, tol: f64) -> Result<(f64, f64, bool)> {
    let ens = no_measurement_ensemble(p)?;
    let sol = solve_discrimination(&ens, tol)?;
    let max_prior = ens.max_prior();
    Ok((sol.p_guess, max_prior, sol.p_guess <= max_prior + tol))
}

/// Solves the mixture ensemble on every grid point and bisects for the
/// smallest `p` where the no-measurement value is optimal.
pub fn threshold_scan(p_grid: &[f64], tol: f64) -> Result<ThresholdScan> {
    if let Some(p) = p_grid.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidInput(format!("grid value {p} outside [0, 1]")));
    }
    let rows = p_grid
        .par_iter()
        .map(|&p| {
            let (p_guess, max_prior, optimal) = no_measurement_optimal(p, tol)?;
            let oracle = dual_vertex_enumeration(&no_measurement_ensemble(p)?)?;
            Ok(ScanRow {
                p,
                p_guess,
                max_prior,
                no_measurement_optimal: optimal,
                oracle_p_guess: oracle.p_guess,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let (mut lo, mut hi) = (0.0, 1.0);
    if no_measurement_optimal(lo, tol)?.2 {
        hi = lo;
    }
    while hi - lo > 1e-7 {
        let mid = 0.5 * (lo + hi);
        if no_measurement_optimal(mid, tol)?.2 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(ThresholdScan {
        rows,
        threshold: hi,
        claimed_threshold: CLAIMED_THRESHOLD,
        dual_feasibility_threshold: DUAL_FEASIBILITY_THRESHOLD,
    })
}

/// `{0, 0.05, …, 1}`
pub fn default_grid() -> Vec<f64> {
    (0..=20).map(|i| i as f64 / 20.0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sum_points, validate_model};

    fn close(a: &Point, b: &[f64], tol: f64) -> bool {
        a.coords().iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn order_below_three_rejected() {
        assert!(polygon_model(2).is_err());
        assert!(PolygonSpec::new(0).is_err());
    }

    #[test]
    fn radius_identity() {
        for n in 3..=12 {
            let s = PolygonSpec::new(n).unwrap();
            assert!((s.rn * s.rn * (PI / n as f64).cos() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn triangle_states_match_closed_form() {
        let m = polygon_model(3).unwrap();
        let r2 = 2f64.sqrt();
        let r6 = 6f64.sqrt();
        let s = m.state_gens();
        assert!(close(&s[0], &[r2, 0.0, 1.0], 1e-12));
        assert!(close(&s[1], &[-r2 / 2.0, r6 / 2.0, 1.0], 1e-12));
        assert!(close(&s[2], &[-r2 / 2.0, -r6 / 2.0, 1.0], 1e-12));
        for (f, w) in m.effect_gens().iter().zip(s) {
            assert!(f.distance(&w.scale(1.0 / 3.0)) < 1e-12);
        }
    }

    #[test]
    fn square_effects_match_closed_form() {
        let m = polygon_model(4).unwrap();
        let r4 = 2f64.powf(0.25);
        let c = r4 / 2f64.sqrt();
        let f = m.effect_gens();
        assert!(close(&f[0], &[c / 2.0, -c / 2.0, 0.5], 1e-12));
        assert!(close(&f[1], &[c / 2.0, c / 2.0, 0.5], 1e-12));
        assert!(close(&f[2], &[-c / 2.0, c / 2.0, 0.5], 1e-12));
        assert!(close(&f[3], &[-c / 2.0, -c / 2.0, 0.5], 1e-12));
        assert!(close(&sum_points(3, f), &[0.0, 0.0, 2.0], 1e-12));
    }

    #[test]
    fn effect_sums_are_proportional_to_unit() {
        for n in 3..=12 {
            let s = PolygonSpec::new(n).unwrap();
            let m = polygon_model(n).unwrap();
            assert!(validate_model(&m, 1e-9).is_valid(), "n={n}");
            let sum = sum_points(3, m.effect_gens());
            let expected = if n % 2 == 0 {
                n as f64 / 2.0
            } else {
                n as f64 / (1.0 + s.rn * s.rn)
            };
            assert!(close(&sum, &[0.0, 0.0, expected], 1e-9), "n={n}");
            if n % 2 == 1 {
                for (f, w) in m.effect_gens().iter().zip(m.state_gens()) {
                    assert!((f.dot(w) - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn triangle_demo() {
        let demo = demo_n3(1e-9).unwrap();
        assert!((demo.solution.p_guess - 1.0).abs() < 1e-9);
        for (e, f) in demo
            .solution
            .measurement
            .effects()
            .iter()
            .zip(demo.ensemble.model().effect_gens())
        {
            assert!(e.distance(f) < 1e-9);
        }
        for c in &demo.solution.complementary {
            assert!((c.r - 2.0 / 3.0).abs() < 1e-9);
        }
        assert!(demo.kkt.passes(1e-9));
    }

    #[test]
    fn square_demo_alternates() {
        let demo = demo_n4(1e-9).unwrap();
        assert!((demo.demo.solution.p_guess - 0.5).abs() < 1e-9);
        assert_eq!(demo.alternates.len(), 3);
        for alt in &demo.alternates {
            assert!((alt.p_guess - 0.5).abs() < 1e-12, "{}", alt.label);
            assert!(alt.kkt.passes(1e-9), "{}: {:?}", alt.label, alt.kkt);
        }
        // Per-state success of {f_x/2}.
        let ens = &demo.demo.ensemble;
        for (x, e) in demo.alternates[0].measurement.effects().iter().enumerate() {
            assert!((e.dot(&ens.states()[x]) - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn no_measurement_endpoints() {
        let half = demo_no_measurement(0.5, 1e-9).unwrap();
        assert!((half.solution.p_guess - 0.5).abs() < 1e-9);
        assert!(close(&half.solution.symmetry_operator, &[0.0, 0.0, 0.5], 1e-9));

        let zero = demo_no_measurement(0.0, 1e-9).unwrap();
        assert!((zero.solution.p_guess - 0.5).abs() < 1e-9);

        let one = demo_no_measurement(1.0, 1e-9).unwrap();
        assert!((one.solution.p_guess - 1.0).abs() < 1e-9);

        assert!(no_measurement_ensemble(1.5).is_err());
    }

    #[test]
    fn scan_flags_and_threshold() {
        let scan = threshold_scan(&[0.05, 0.9], 1e-9).unwrap();
        assert!(!scan.rows[0].no_measurement_optimal);
        assert!(scan.rows[1].no_measurement_optimal);
        assert!((scan.threshold - DUAL_FEASIBILITY_THRESHOLD).abs() < 1e-6);
        assert!(threshold_scan(&[1.2], 1e-9).is_err());
    }
}
