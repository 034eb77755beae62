//! Communication topologies: weighted digraphs over the robot set.
//!
//! Edge-direction convention used throughout the crate: `adjacency[i][j] > 0`
//! means robot `i` listens to robot `j` (j is an in-neighbor of i), so
//! information flows along `j -> i`. A "directed spanning tree" exists when
//! some root robot's information reaches every other robot through such
//! edges; that root itself may listen to nobody.

use thiserror::Error;

use crate::matops::{self, Matrix};
use crate::scalar::{cast, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TopologyError {
    #[error("adjacency must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("adjacency diagonal must be zero, entry ({i},{i}) is {value}")]
    NonzeroDiagonal { i: usize, value: f64 },
    #[error("adjacency weights must be nonnegative, entry ({i},{j}) is {value}")]
    NegativeWeight { i: usize, j: usize, value: f64 },
    #[error("adjacency entries must be finite")]
    NonFinite,
    #[error("no eigenvalue with real part above {threshold:e} (edgeless graph?)")]
    NoPositiveEigenvalue { threshold: f64 },
    #[error(transparent)]
    MatOps(#[from] matops::MatOpsError),
}

/// Graph Laplacian `L = D - A` where `D` holds the in-degree row sums.
///
/// Row `i` sums to exactly zero by construction (the diagonal entry reuses
/// the same left-to-right summation as the row it cancels), so the all-ones
/// vector is always in the null space.
pub fn laplacian_of<T: Scalar>(adjacency: &Matrix<T>) -> Result<Matrix<T>, TopologyError> {
    validate_adjacency(adjacency)?;
    let n = adjacency.rows();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        let mut degree = T::zero();
        for j in 0..n {
            let w = adjacency[(i, j)];
            degree += w;
            if i != j {
                l[(i, j)] = -w;
            }
        }
        l[(i, i)] = degree;
    }
    Ok(l)
}

fn validate_adjacency<T: Scalar>(adjacency: &Matrix<T>) -> Result<(), TopologyError> {
    if !adjacency.is_square() {
        return Err(TopologyError::NotSquare {
            rows: adjacency.rows(),
            cols: adjacency.cols(),
        });
    }
    let n = adjacency.rows();
    for i in 0..n {
        for j in 0..n {
            let v = adjacency[(i, j)];
            if !v.is_finite() {
                return Err(TopologyError::NonFinite);
            }
            if i == j && v != T::zero() {
                return Err(TopologyError::NonzeroDiagonal {
                    i,
                    value: v.to_f64().unwrap_or(f64::NAN),
                });
            }
            if v < T::zero() {
                return Err(TopologyError::NegativeWeight {
                    i,
                    j,
                    value: v.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
    }
    Ok(())
}

/// A validated communication graph with its Laplacian.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology<T> {
    adjacency: Matrix<T>,
    laplacian: Matrix<T>,
}

impl<T: Scalar> Topology<T> {
    pub fn new(adjacency: Matrix<T>) -> Result<Self, TopologyError> {
        let laplacian = laplacian_of(&adjacency)?;
        Ok(Self {
            adjacency,
            laplacian,
        })
    }

    pub fn n(&self) -> usize {
        self.adjacency.rows()
    }

    pub fn adjacency(&self) -> &Matrix<T> {
        &self.adjacency
    }

    pub fn laplacian(&self) -> &Matrix<T> {
        &self.laplacian
    }

    /// In-neighbors of robot `i` with their weights: `(j, a_ij)`.
    pub fn in_neighbors(&self, i: usize) -> Vec<(usize, T)> {
        (0..self.n())
            .filter(|&j| self.adjacency[(i, j)] > T::zero())
            .map(|j| (j, self.adjacency[(i, j)]))
            .collect()
    }

    /// Whether some robot's information reaches every other robot.
    ///
    /// Breadth-first search over information-flow edges (`j -> i` whenever
    /// `a_ij > 0`) from each candidate root; n <= 16 keeps this trivial.
    pub fn has_directed_spanning_tree(&self) -> bool {
        let n = self.n();
        (0..n).any(|root| {
            let mut seen = vec![false; n];
            let mut queue = vec![root];
            seen[root] = true;
            while let Some(u) = queue.pop() {
                for v in 0..n {
                    if !seen[v] && self.adjacency[(v, u)] > T::zero() {
                        seen[v] = true;
                        queue.push(v);
                    }
                }
            }
            seen.iter().all(|&s| s)
        })
    }

    /// The smallest Laplacian eigenvalue real part exceeding 1e-9. For a
    /// connected undirected graph this is the algebraic connectivity; it sets
    /// the slowest consensus rate.
    pub fn smallest_positive_eigenvalue(&self) -> Result<T, TopologyError> {
        let threshold = cast::<T>(1e-9);
        let eigs = matops::eigenvalues(&self.laplacian)?;
        eigs.iter()
            .map(|&(re, _)| re)
            .filter(|&re| re > threshold)
            .fold(None, |best: Option<T>, re| {
                Some(best.map_or(re, |b| b.min(re)))
            })
            .ok_or(TopologyError::NoPositiveEigenvalue { threshold: 1e-9 })
    }

    /// Complete graph with unit weights.
    pub fn complete(n: usize) -> Self {
        let adjacency = Matrix::from_fn(n, n, |i, j| if i == j { T::zero() } else { T::one() });
        Self::new(adjacency).expect("complete graph adjacency is valid")
    }

    /// Undirected path 0 - 1 - ... - n-1 with unit weights.
    pub fn path(n: usize) -> Self {
        let adjacency = Matrix::from_fn(n, n, |i, j| {
            if i.abs_diff(j) == 1 {
                T::one()
            } else {
                T::zero()
            }
        });
        Self::new(adjacency).expect("path graph adjacency is valid")
    }

    /// Default 4-robot digraph: robot 2 is the root whose information reaches
    /// everyone (2 -> 1 -> 0 and 2 -> 3), while robot 2 itself listens to
    /// nobody and therefore holds its position. Listening edges: robot 0
    /// hears robot 1, robot 1 hears robot 2, robot 3 hears robot 2.
    pub fn default_four_robot() -> Self {
        let mut adjacency = Matrix::zeros(4, 4);
        adjacency[(0, 1)] = T::one();
        adjacency[(1, 2)] = T::one();
        adjacency[(3, 2)] = T::one();
        Self::new(adjacency).expect("default adjacency is valid")
    }
}
