//! Polyhedral cones in generator form: membership, dual cones (double
//! description) and the order relation induced by a cone.

use nalgebra::DMatrix;

use crate::lp::{solve_lp, LpProblem};
use crate::model::Point;
use crate::{Error, Result};

/// Largest ambient dimension accepted by [`PolyhedralCone::dual_cone`].
pub const MAX_DUAL_DIM: usize = 8;

const ZERO_NORM: f64 = 1e-12;
const SAME_DIRECTION_COS: f64 = 1.0 - 1e-12;
/// Relative threshold for treating `a·r` as zero during double description.
const DD_EPS: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct PolyhedralCone {
    dim: usize,
    generators: Vec<Point>,
}

fn same_direction(a: &Point, b: &Point) -> bool {
    a.dot(b) / (a.norm() * b.norm()) > SAME_DIRECTION_COS
}

impl PolyhedralCone {
    /// Strips zero generators and drops positive rescalings of earlier ones.
    pub fn new(dim: usize, generators: Vec<Point>) -> Result<Self> {
        let mut kept: Vec<Point> = Vec::with_capacity(generators.len());
        for g in generators {
            if g.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: g.dim(),
                });
            }
            if !g.is_finite() {
                return Err(Error::InvalidInput("non-finite cone generator".into()));
            }
            if g.norm() <= ZERO_NORM {
                continue;
            }
            if kept.iter().any(|k| same_direction(k, &g)) {
                continue;
            }
            kept.push(g);
        }
        Ok(PolyhedralCone {
            dim,
            generators: kept,
        })
    }

    /// The nonnegative orthant of `R^dim`.
    pub fn orthant(dim: usize) -> Self {
        let gens = (0..dim)
            .map(|i| {
                let mut v = vec![0.0; dim];
                v[i] = 1.0;
                Point::new(v)
            })
            .collect();
        PolyhedralCone {
            dim,
            generators: gens,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn generators(&self) -> &[Point] {
        &self.generators
    }

    fn check_dim(&self, v: &Point) -> Result<()> {
        if v.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: v.dim(),
            });
        }
        Ok(())
    }

    /// Decides `v ∈ cone` by minimizing the L1 residual `‖Σ λ_j g_j − v‖₁`
    /// over `λ ≥ 0`; `v` is a member when the minimum is at most `tol`.
    pub fn member_of(&self, v: &Point, tol: f64) -> Result<bool> {
        self.check_dim(v)?;
        if !v.is_finite() {
            return Err(Error::InvalidInput("non-finite point".into()));
        }
        Ok(self.membership_residual(v)? <= tol)
    }

    /// Minimal L1 distance from `v` to the cone.
    pub fn membership_residual(&self, v: &Point) -> Result<f64> {
        self.check_dim(v)?;
        let m = self.generators.len();
        let d = self.dim;
        // Columns: λ (m), s⁺ (d), s⁻ (d).
        let n = m + 2 * d;
        let mut objective = vec![0.0; n];
        for c in objective.iter_mut().skip(m) {
            *c = 1.0;
        }
        let mut rows = Vec::with_capacity(d);
        for k in 0..d {
            let mut row = vec![0.0; n];
            for (j, g) in self.generators.iter().enumerate() {
                row[j] = g[k];
            }
            row[m + k] = 1.0;
            row[m + d + k] = -1.0;
            rows.push(row);
        }
        let lp = LpProblem::new(objective, rows, v.coords().to_vec())?;
        let sol = solve_lp(&lp, 1e-12)?;
        if !sol.is_optimal() {
            return Err(Error::NumericalFailure(
                "membership LP is always feasible and bounded".into(),
            ));
        }
        Ok(sol.objective.max(0.0))
    }

    /// Generators of `{ y : y·g ≥ 0 for every generator g }`, computed by the
    /// double-description method. Lineality directions (present when this cone
    /// is not full-dimensional) appear as `±` pairs.
    pub fn dual_cone(&self) -> Result<PolyhedralCone> {
        if self.dim > MAX_DUAL_DIM {
            return Err(Error::UnsupportedDimension {
                dim: self.dim,
                max: MAX_DUAL_DIM,
            });
        }
        let d = self.dim;
        if self.generators.is_empty() {
            let mut gens = Vec::with_capacity(2 * d);
            for g in PolyhedralCone::orthant(d).generators {
                gens.push(g.scale(-1.0));
                gens.push(g);
            }
            return PolyhedralCone::new(d, gens);
        }

        let a = DMatrix::from_fn(self.generators.len(), d, |i, j| self.generators[i][j]);
        let svd = a.clone().svd(false, true);
        let v_t = svd.v_t.as_ref().expect("requested V^T");
        let smax = svd.singular_values.max();
        // Singular values come sorted in nalgebra's SVD, but be explicit.
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
        let rank = order
            .iter()
            .filter(|&&i| svd.singular_values[i] > 1e-10 * smax)
            .count();

        // Orthonormal basis of the row space (q) and of the null space.
        let q = DMatrix::from_fn(d, rank, |r, c| v_t[(order[c], r)]);
        let mut null_basis: Vec<Point> = Vec::new();
        if rank < d {
            let full = a.transpose() * &a;
            let eig = full.symmetric_eigen();
            let mut idx: Vec<usize> = (0..d).collect();
            idx.sort_by(|&i, &j| eig.eigenvalues[i].abs().total_cmp(&eig.eigenvalues[j].abs()));
            for &i in idx.iter().take(d - rank) {
                null_basis.push(Point::new(eig.eigenvectors.column(i).iter().copied().collect()));
            }
        }

        let reduced = &a * &q;
        let rows: Vec<Vec<f64>> = (0..reduced.nrows())
            .map(|i| reduced.row(i).iter().copied().collect())
            .collect();
        let rays = double_description(&rows, rank)?;

        let mut gens: Vec<Point> = rays
            .into_iter()
            .map(|z| {
                let y: Vec<f64> = (0..d)
                    .map(|r| (0..rank).map(|c| q[(r, c)] * z[c]).sum())
                    .collect();
                let y = Point::new(y);
                let nrm = y.norm();
                y.scale(1.0 / nrm)
            })
            .collect();
        for nb in null_basis {
            gens.push(nb.scale(-1.0));
            gens.push(nb);
        }
        PolyhedralCone::new(d, gens)
    }

    /// True when both cones have the same generator directions up to positive
    /// scaling and order.
    pub fn same_generators(&self, other: &PolyhedralCone, tol: f64) -> bool {
        if self.dim != other.dim || self.generators.len() != other.generators.len() {
            return false;
        }
        let unit = |p: &Point| p.scale(1.0 / p.norm());
        let matched = |a: &PolyhedralCone, b: &PolyhedralCone| {
            a.generators.iter().all(|g| {
                let gu = unit(g);
                b.generators.iter().any(|h| gu.distance(&unit(h)) <= tol)
            })
        };
        matched(self, other) && matched(other, self)
    }
}

struct Ray {
    z: Vec<f64>,
    /// Indices of processed constraints that this ray makes tight.
    tight: Vec<usize>,
}

fn dotv(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normv(a: &[f64]) -> f64 {
    dotv(a, a).sqrt()
}

fn rank_of(rows: &[&Vec<f64>], k: usize) -> usize {
    let pts: Vec<Point> = rows.iter().map(|r| Point::new(r[..k].to_vec())).collect();
    crate::model::matrix_rank(&pts, 1e-9)
}

/// Extreme rays of `{ z ∈ R^k : row_i · z ≥ 0 }` where the rows have full
/// column rank `k`.
fn double_description(rows: &[Vec<f64>], k: usize) -> Result<Vec<Vec<f64>>> {
    if k == 0 {
        return Ok(Vec::new());
    }
    // Greedily pick k independent rows for the initial simplicial cone.
    let mut basis_rows: Vec<usize> = Vec::with_capacity(k);
    for i in 0..rows.len() {
        let mut trial: Vec<&Vec<f64>> = basis_rows.iter().map(|&b| &rows[b]).collect();
        trial.push(&rows[i]);
        if rank_of(&trial, k) == trial.len() {
            basis_rows.push(i);
            if basis_rows.len() == k {
                break;
            }
        }
    }
    if basis_rows.len() < k {
        return Err(Error::NumericalFailure("constraint rows are rank deficient".into()));
    }
    let b = DMatrix::from_fn(k, k, |i, j| rows[basis_rows[i]][j]);
    let b_inv = b
        .try_inverse()
        .ok_or_else(|| Error::NumericalFailure("singular initial basis".into()))?;
    let mut rays: Vec<Ray> = (0..k)
        .map(|c| {
            let z: Vec<f64> = (0..k).map(|r| b_inv[(r, c)]).collect();
            let nz = normv(&z);
            Ray {
                z: z.iter().map(|v| v / nz).collect(),
                tight: basis_rows
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != c)
                    .map(|(_, &r)| r)
                    .collect(),
            }
        })
        .collect();

    for (i, row) in rows.iter().enumerate() {
        if basis_rows.contains(&i) {
            continue;
        }
        let rn = normv(row);
        if rn == 0.0 {
            continue;
        }
        let vals: Vec<f64> = rays.iter().map(|r| dotv(row, &r.z)).collect();
        let eps = DD_EPS * rn;
        let plus: Vec<usize> = (0..rays.len()).filter(|&j| vals[j] > eps).collect();
        let minus: Vec<usize> = (0..rays.len()).filter(|&j| vals[j] < -eps).collect();
        let zero: Vec<usize> = (0..rays.len())
            .filter(|&j| vals[j].abs() <= eps)
            .collect();

        let mut next: Vec<Ray> = Vec::new();
        for &p in &plus {
            for &n in &minus {
                let common: Vec<usize> = rays[p]
                    .tight
                    .iter()
                    .copied()
                    .filter(|t| rays[n].tight.contains(t))
                    .collect();
                if common.len() + 2 < k {
                    continue;
                }
                let common_rows: Vec<&Vec<f64>> = common.iter().map(|&t| &rows[t]).collect();
                if k < 2 || rank_of(&common_rows, k) != k - 2 {
                    continue;
                }
                let z: Vec<f64> = rays[n]
                    .z
                    .iter()
                    .zip(&rays[p].z)
                    .map(|(zn, zp)| vals[p] * zn - vals[n] * zp)
                    .collect();
                let nz = normv(&z);
                if nz <= ZERO_NORM {
                    continue;
                }
                let mut tight = common;
                tight.push(i);
                next.push(Ray {
                    z: z.iter().map(|v| v / nz).collect(),
                    tight,
                });
            }
        }
        let mut kept: Vec<Ray> = Vec::with_capacity(plus.len() + zero.len() + next.len());
        for j in 0..rays.len() {
            if vals[j] > eps {
                kept.push(Ray {
                    z: rays[j].z.clone(),
                    tight: rays[j].tight.clone(),
                });
            } else if vals[j].abs() <= eps {
                let mut tight = rays[j].tight.clone();
                tight.push(i);
                kept.push(Ray {
                    z: rays[j].z.clone(),
                    tight,
                });
            }
        }
        kept.extend(next);
        rays = kept;
    }
    Ok(rays.into_iter().map(|r| r.z).collect())
}

/// `v ≥ w` in the order induced by `test_cone`: `g·(v − w) ≥ −tol` for every
/// generator `g`.
pub fn cone_ge(v: &Point, w: &Point, test_cone: &PolyhedralCone, tol: f64) -> Result<bool> {
    test_cone.check_dim(v)?;
    test_cone.check_dim(w)?;
    let diff = v.sub(w);
    Ok(test_cone.generators().iter().all(|g| g.dot(&diff) >= -tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polygon::polygon_model;

    fn p(v: &[f64]) -> Point {
        Point::new(v.to_vec())
    }

    #[test]
    fn construction_strips_zero_and_duplicates() {
        let c = PolyhedralCone::new(
            2,
            vec![p(&[1.0, 0.0]), p(&[0.0, 0.0]), p(&[3.0, 0.0]), p(&[0.0, 1.0]), p(&[-1.0, 0.0])],
        )
        .unwrap();
        assert_eq!(c.generators().len(), 3);
        assert!(PolyhedralCone::new(2, vec![p(&[1.0])]).is_err());
    }

    #[test]
    fn orthant_membership() {
        let c = PolyhedralCone::orthant(3);
        assert!(c.member_of(&p(&[1.0, 2.0, 0.0]), 1e-9).unwrap());
        assert!(!c.member_of(&p(&[1.0, -1e-3, 0.0]), 1e-9).unwrap());
        assert!(c.member_of(&p(&[1.0, 2.0]), 1e-9).is_err());
    }

    #[test]
    fn square_mixture_is_member() {
        let m = polygon_model(4).unwrap();
        assert!(m.state_cone().member_of(&p(&[0.0, 0.0, 1.0]), 1e-9).unwrap());
    }

    #[test]
    fn orthant_is_self_dual() {
        for d in 1..=5 {
            let c = PolyhedralCone::orthant(d);
            assert!(c.dual_cone().unwrap().same_generators(&c, 1e-9), "d={d}");
        }
    }

    #[test]
    fn square_effect_cone_dualizes_to_state_cone() {
        let m = polygon_model(4).unwrap();
        let dual = m.effect_cone().dual_cone().unwrap();
        assert!(dual.same_generators(&m.state_cone(), 1e-9));
    }

    #[test]
    fn triangle_state_cone_dualizes_to_effects() {
        let m = polygon_model(3).unwrap();
        let dual = m.state_cone().dual_cone().unwrap();
        let scaled: Vec<Point> = m.effect_gens().iter().map(|f| f.scale(3.0)).collect();
        assert!(dual.same_generators(&PolyhedralCone::new(3, scaled).unwrap(), 1e-9));
    }

    #[test]
    fn dual_of_lower_dimensional_cone_has_lineality() {
        // A ray along e1 in R^2: dual is the half-plane y1 ≥ 0.
        let c = PolyhedralCone::new(2, vec![p(&[1.0, 0.0])]).unwrap();
        let dual = c.dual_cone().unwrap();
        assert_eq!(dual.generators().len(), 3);
        assert!(dual.member_of(&p(&[0.0, -5.0]), 1e-9).unwrap());
        assert!(dual.member_of(&p(&[2.0, 5.0]), 1e-9).unwrap());
        assert!(!dual.member_of(&p(&[-1.0, 0.0]), 1e-9).unwrap());
    }

    #[test]
    fn dual_dimension_bound() {
        let c = PolyhedralCone::orthant(9);
        assert_eq!(
            c.dual_cone().unwrap_err(),
            Error::UnsupportedDimension { dim: 9, max: 8 }
        );
    }

    #[test]
    fn cone_ge_examples() {
        let m = polygon_model(4).unwrap();
        let effects = m.effect_cone();
        let w0 = &m.state_gens()[0];
        assert!(cone_ge(w0, w0, &effects, 1e-9).unwrap());
        let k = p(&[0.0, 0.0, 0.5]);
        assert!(cone_ge(&k, &w0.scale(0.25), &effects, 1e-9).unwrap());
        // p = 1/4 in the mixture ensemble: f_0·(p w_4 − q_0 w_0) = −1/16.
        let pw4 = p(&[0.0, 0.0, 0.25]);
        let q0w0 = w0.scale(0.75 / 4.0);
        assert!(!cone_ge(&pw4, &q0w0, &effects, 1e-9).unwrap());
        let f0 = &m.effect_gens()[0];
        assert!((f0.dot(&pw4.sub(&q0w0)) + 1.0 / 16.0).abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn nonnegative_combinations_are_members(
                n in 3usize..10,
                weights in proptest::collection::vec(0.0f64..3.0, 10),
            ) {
                let cone = polygon_model(n).unwrap().state_cone();
                for g in cone.generators() {
                    prop_assert!(cone.member_of(g, 1e-9).unwrap());
                }
                let v = cone
                    .generators()
                    .iter()
                    .zip(&weights)
                    .fold(Point::zeros(3), |acc, (g, w)| acc.add_scaled(*w, g));
                prop_assert!(cone.member_of(&v, 1e-9).unwrap());
            }

            #[test]
            fn dual_membership_matches_order(
                n in 3usize..9,
                v in proptest::collection::vec(-2.0f64..2.0, 3),
            ) {
                let cone = polygon_model(n).unwrap().state_cone();
                let dual = cone.dual_cone().unwrap();
                let v = Point::new(v);
                let ge = cone_ge(&v, &Point::zeros(3), &cone, 1e-9).unwrap();
                // Skip points within rounding distance of the boundary.
                let margin = cone.generators().iter().map(|g| g.dot(&v)).fold(f64::INFINITY, f64::min);
                prop_assume!(margin.abs() > 1e-6);
                prop_assert_eq!(dual.member_of(&v, 1e-9).unwrap(), ge);
            }
        }
    }
}
