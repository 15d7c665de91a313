//! Brute-force checks that do not go through the simplex engine's pivoting.
//!
//! [`dual_vertex_enumeration`] solves the symmetry-operator problem exactly
//! by trying every vertex of its feasible region. [`primal_random_search`]
//! samples measurements and gives a lower bound.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::lp::{solve_lp, LpBuilder};
use crate::model::{Ensemble, Measurement, Point};
use crate::{Error, Result};

pub const MAX_ORACLE_DIM: usize = 4;
/// Upper bound on (effect generators × states).
pub const MAX_ORACLE_CONSTRAINTS: usize = 64;
/// Fixed feasibility tolerance of the enumeration.
pub const ORACLE_FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub p_guess: f64,
    #[serde(rename = "K")]
    pub k: Point,
    pub vertices_examined: usize,
}

struct Constraint {
    normal: Vec<f64>,
    rhs: f64,
}

/// Solves `min u[K]` s.t. `g[K] ≥ g[q_x w_x]` by enumerating every
/// `dim`-subset of constraints, solving the square system with them tight,
/// and keeping feasible solutions. Ties resolve to the lexicographically
/// smallest `K`.
pub fn dual_vertex_enumeration(ens: &Ensemble) -> Result<OracleResult> {
    let model = ens.model();
    let d = model.dim();
    if d > MAX_ORACLE_DIM {
        return Err(Error::UnsupportedSize(format!(
            "oracle dimension {d} exceeds {MAX_ORACLE_DIM}"
        )));
    }
    let count = model.effect_gens().len() * ens.len();
    if count > MAX_ORACLE_CONSTRAINTS {
        return Err(Error::UnsupportedSize(format!(
            "{count} constraints exceed the oracle bound of {MAX_ORACLE_CONSTRAINTS}"
        )));
    }
    let constraints: Vec<Constraint> = (0..ens.len())
        .flat_map(|x| {
            let qw = ens.weighted_state(x);
            model.effect_gens().iter().map(move |g| Constraint {
                normal: g.coords().to_vec(),
                rhs: g.dot(&qw),
            })
        })
        .collect();
    let u = model.unit_effect().coords().to_vec();

    let subsets: Vec<Vec<usize>> = (0..constraints.len()).combinations(d).collect();
    let candidates: Vec<(f64, Vec<f64>)> = subsets
        .par_iter()
        .filter_map(|subset| {
            let a = DMatrix::from_fn(d, d, |i, j| constraints[subset[i]].normal[j]);
            let scale: f64 = (0..d)
                .map(|i| a.row(i).norm())
                .product::<f64>()
                .max(f64::MIN_POSITIVE);
            let lu = a.lu();
            if lu.determinant().abs() <= 1e-10 * scale {
                return None;
            }
            let b = DVector::from_fn(d, |i, _| constraints[subset[i]].rhs);
            let k = lu.solve(&b)?;
            let k: Vec<f64> = k.iter().copied().collect();
            let feasible = constraints.iter().all(|c| {
                let lhs: f64 = c.normal.iter().zip(&k).map(|(a, b)| a * b).sum();
                lhs >= c.rhs - ORACLE_FEASIBILITY_TOL
            });
            if !feasible {
                return Some((f64::INFINITY, k));
            }
            let value: f64 = u.iter().zip(&k).map(|(a, b)| a * b).sum();
            Some((value, k))
        })
        .collect();

    let examined = candidates.len();
    let best = candidates
        .into_iter()
        .filter(|(v, _)| v.is_finite())
        .min_by(|a, b| {
            a.0.total_cmp(&b.0).then_with(|| {
                a.1.iter()
                    .zip(&b.1)
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
        });
    match best {
        Some((value, k)) => Ok(OracleResult {
            p_guess: value,
            k: Point::new(k),
            vertices_examined: examined,
        }),
        None => Err(Error::NumericalFailure(
            "no feasible vertex; the effect cone may not span the space".into(),
        )),
    }
}

/// Decomposes `u = Σ_j α_j g_j` with `α ≥ 0`, choosing the decomposition
/// closest in L1 to `target`.
fn decompose_unit(ens: &Ensemble, target: &[f64]) -> Result<Vec<f64>> {
    let gens = ens.model().effect_gens();
    let g = gens.len();
    let d = ens.model().dim();
    // Columns: α (g), t⁺ (g), t⁻ (g) with α − t⁺ + t⁻ = target.
    let mut objective = vec![0.0; 3 * g];
    for c in objective.iter_mut().skip(g) {
        *c = 1.0;
    }
    let mut lp = LpBuilder::minimize(objective);
    for k in 0..d {
        let mut row = vec![0.0; 3 * g];
        for (j, gj) in gens.iter().enumerate() {
            row[j] = gj[k];
        }
        lp = lp.eq(row, ens.model().unit_effect()[k]);
    }
    for (j, &t) in target.iter().enumerate() {
        let mut row = vec![0.0; 3 * g];
        row[j] = 1.0;
        row[g + j] = -1.0;
        row[2 * g + j] = 1.0;
        lp = lp.eq(row, t);
    }
    let sol = solve_lp(&lp.build()?, 1e-9)?;
    if !sol.is_optimal() {
        return Err(Error::InvalidInput(
            "unit effect is outside the effect cone".into(),
        ));
    }
    Ok(sol.x[..g].to_vec())
}

/// Best success probability over `samples` random measurements; a lower
/// bound on the guessing probability. The first sample is always the trivial
/// measurement that guesses the most likely state.
///
/// Each random sample draws nonnegative coefficients `c_{x,j}` (one-hot per
/// generator half of the time, exponential otherwise), projects the
/// per-generator totals onto a decomposition `u = Σ α_j g_j` by an L1
/// feasibility LP, and uses `e_x = Σ_j α_j c_{x,j}/Σ_y c_{y,j} g_j`.
pub fn primal_random_search(ens: &Ensemble, samples: usize, seed: u64) -> Result<f64> {
    if samples == 0 {
        return Err(Error::InvalidInput("at least one sample is required".into()));
    }
    let model = ens.model();
    let gens = model.effect_gens();
    let (g, n, d) = (gens.len(), ens.len(), model.dim());
    let best_x = ens
        .priors()
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut best = Measurement::trivial(model, n, best_x).success_probability(ens)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 1..samples {
        let one_hot = rng.gen_bool(0.5);
        let mut c = vec![0.0; n * g];
        for j in 0..g {
            if one_hot {
                c[rng.gen_range(0..n) * g + j] = 1.0;
            } else {
                for x in 0..n {
                    c[x * g + j] = -rng.gen::<f64>().max(f64::MIN_POSITIVE).ln();
                }
            }
        }
        let totals: Vec<f64> = (0..g).map(|j| (0..n).map(|x| c[x * g + j]).sum()).collect();
        let alpha = decompose_unit(ens, &totals)?;
        let effects: Vec<Point> = (0..n)
            .map(|x| {
                (0..g).fold(Point::zeros(d), |acc, j| {
                    let share = if totals[j] > 0.0 { c[x * g + j] / totals[j] } else { 0.0 };
                    acc.add_scaled(alpha[j] * share, &gens[j])
                })
            })
            .collect();
        let value = Measurement::new(effects).success_probability(ens)?;
        best = best.max(value);
    }
    Ok(best)
}
