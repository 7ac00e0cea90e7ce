//! Constrained linear solve.

use std::collections::BTreeMap;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side as FaerSide};

use super::sparse::SparseMatrix;
use super::AssemblyError;

/// Target relative residual of the reduced system. A refinement that stalls
/// above it is still accepted at the rounding floor of the solution.
pub const RESIDUAL_TOL: f64 = 1e-10;
const MAX_REFINEMENT: usize = 6;
/// Multiple of `eps ‖|A||x|‖ / ‖b‖` below which a stalled refinement is
/// accepted: no double vector can do better.
const FLOOR_FACTOR: f64 = 8.0;

/// Assembled `A u = b` together with fixed dof values.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
    pub constraints: BTreeMap<usize, f64>,
}

/// Coefficient vector over the hierarchical basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteField {
    pub coefficients: Vec<f64>,
}

impl DiscreteField {
    pub fn zeros(n: usize) -> Self {
        Self {
            coefficients: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }
}

impl LinearSystem {
    /// Eliminates the constraints symmetrically and solves the free block by
    /// a Jacobi-scaled sparse Cholesky factorization with iterative
    /// refinement.
    pub fn solve(&self) -> Result<DiscreteField, AssemblyError> {
        let n = self.matrix.dim();
        if self.rhs.len() != n {
            return Err(AssemblyError::InvalidArgument(format!(
                "rhs has length {} for a {n}x{n} system",
                self.rhs.len()
            )));
        }
        let mut u = vec![0.0; n];
        for (&d, &v) in &self.constraints {
            if d >= n {
                return Err(AssemblyError::InvalidArgument(format!("constraint on dof {d} >= {n}")));
            }
            u[d] = v;
        }
        let mut reduced = vec![usize::MAX; n];
        let mut free = Vec::new();
        for d in 0..n {
            if !self.constraints.contains_key(&d) {
                reduced[d] = free.len();
                free.push(d);
            }
        }
        let nf = free.len();
        if nf == 0 {
            return Ok(DiscreteField { coefficients: u });
        }

        // b_f - A_fc u_c
        let mut b = Vec::with_capacity(nf);
        let mut scale = Vec::with_capacity(nf);
        let mut triplets = Vec::new();
        let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(nf);
        for &d in &free {
            let diag = self.matrix.get(d, d);
            if diag <= 0.0 || !diag.is_finite() {
                return Err(AssemblyError::Solver(format!("non-positive diagonal {diag:e} at dof {d}")));
            }
            scale.push(1.0 / diag.sqrt());
        }
        for (r, &d) in free.iter().enumerate() {
            let mut bi = self.rhs[d];
            let mut row = Vec::new();
            for (j, v) in self.matrix.row(d) {
                if reduced[j] == usize::MAX {
                    bi -= v * u[j];
                } else {
                    let c = reduced[j];
                    let sv = scale[r] * v * scale[c];
                    row.push((c, sv));
                    if r >= c {
                        triplets.push(Triplet::new(r, c, sv));
                    }
                }
            }
            rows.push(row);
            b.push(scale[r] * bi);
        }
        // residuals are measured on the unscaled system
        let unscaled = |v: &[f64]| -> f64 { v.iter().zip(&scale).map(|(x, s)| (x / s) * (x / s)).sum::<f64>().sqrt() };
        let bnorm = unscaled(&b);
        if bnorm == 0.0 {
            return Ok(DiscreteField { coefficients: u });
        }

        let a = SparseColMat::<usize, f64>::try_new_from_triplets(nf, nf, &triplets)
            .map_err(|e| AssemblyError::Solver(format!("matrix construction failed: {e:?}")))?;
        let llt = a
            .sp_cholesky(FaerSide::Lower)
            .map_err(|e| AssemblyError::Solver(format!("Cholesky factorization failed: {e:?}")))?;

        // b - A x in compensated arithmetic; a plain residual stalls at the
        // rounding level of A x on strongly graded meshes.
        let residual = |x: &[f64]| -> Vec<f64> {
            rows.iter()
                .zip(&b)
                .map(|(row, &bi)| {
                    let (mut s, mut c) = (bi, 0.0);
                    for (j, v) in row {
                        let p = -v * x[*j];
                        let pe = (-v).mul_add(x[*j], -p);
                        let t = s + p;
                        let z = t - s;
                        c += (s - (t - z)) + (p - z) + pe;
                        s = t;
                    }
                    s + c
                })
                .collect()
        };
        let mut x = vec![0.0; nf];
        let mut r = b.clone();
        let mut rel = f64::INFINITY;
        for _ in 0..=MAX_REFINEMENT {
            let mut rhs = Mat::<f64>::from_fn(nf, 1, |i, _| r[i]);
            llt.solve_in_place(&mut rhs);
            for (i, xi) in x.iter_mut().enumerate() {
                *xi += rhs[(i, 0)];
            }
            r = residual(&x);
            let prev = rel;
            rel = unscaled(&r) / bnorm;
            if !rel.is_finite() {
                break;
            }
            let stalled = rel > 0.5 * prev;
            let floor = if stalled {
                let ax: Vec<f64> = rows.iter().map(|row| row.iter().map(|(c, v)| (v * x[*c]).abs()).sum()).collect();
                FLOOR_FACTOR * f64::EPSILON * unscaled(&ax) / bnorm
            } else {
                0.0
            };
            if rel <= RESIDUAL_TOL.max(floor) {
                for (k, &d) in free.iter().enumerate() {
                    u[d] = scale[k] * x[k];
                }
                return Ok(DiscreteField { coefficients: u });
            }
            if stalled {
                break;
            }
        }
        Err(AssemblyError::Solver(format!(
            "relative residual {rel:e} above {RESIDUAL_TOL:e} after refinement"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eliminates_constraints_symmetrically() {
        // [2 -1 0; -1 2 -1; 0 -1 2] u = [0 0 0] with u_2 = 1
        let groups: Vec<Vec<usize>> = vec![vec![0, 1], vec![1, 2]];
        let mut a = SparseMatrix::from_groups(3, groups.iter().map(|g| g.as_slice()));
        for (i, j, v) in [(0, 0, 2.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 2.0), (1, 2, -1.0), (2, 1, -1.0), (2, 2, 2.0)] {
            a.add(i, j, v);
        }
        let sys = LinearSystem {
            matrix: a,
            rhs: vec![0.0; 3],
            constraints: BTreeMap::from([(2, 1.0)]),
        };
        let u = sys.solve().unwrap().coefficients;
        assert!((u[0] - 1.0 / 3.0).abs() < 1e-14);
        assert!((u[1] - 2.0 / 3.0).abs() < 1e-14);
        assert_eq!(u[2], 1.0);
    }

    #[test]
    fn indefinite_matrix_is_a_solver_error() {
        let groups: Vec<Vec<usize>> = vec![vec![0, 1]];
        let mut a = SparseMatrix::from_groups(2, groups.iter().map(|g| g.as_slice()));
        for (i, j, v) in [(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)] {
            a.add(i, j, v);
        }
        let sys = LinearSystem {
            matrix: a,
            rhs: vec![1.0, 0.0],
            constraints: BTreeMap::new(),
        };
        assert!(matches!(sys.solve(), Err(AssemblyError::Solver(_))));
    }
}
