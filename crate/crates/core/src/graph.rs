//! Communication topology of the follower network and the leader links.
//!
//! Followers are numbered `1..=n` at the API boundary (node `0` is the
//! leader) and stored zero-based internally. The follower graph is undirected
//! with strictly positive weights; the leader informs follower `i` through a
//! pinning weight `b_i`.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

/// Smallest eigenvalue of `H` that still counts as positive.
pub const POSITIVE_DEFINITE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TopologyError {
    #[error("a topology needs at least one follower")]
    Empty,
    #[error("node {node} is out of range 1..={n}")]
    IndexOutOfRange { node: usize, n: usize },
    #[error("self-loop on follower {0}")]
    SelfLoop(usize),
    #[error("weight {weight} on {link} must be finite and strictly positive")]
    NonPositiveWeight { link: String, weight: f64 },
    #[error("edge ({0}, {1}) listed more than once")]
    DuplicateEdge(usize, usize),
    #[error("leader link to follower {0} listed more than once")]
    DuplicateLeaderLink(usize),
}

/// Undirected follower graph plus leader pinning weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    adjacency: DMatrix<f64>,
    leader_links: DVector<f64>,
}

impl Topology {
    /// Builds and validates a topology. Node ids are one-based.
    pub fn new(
        n: usize,
        edges: &[(usize, usize, f64)],
        leader_links: &[(usize, f64)],
    ) -> Result<Self, TopologyError> {
        if n == 0 {
            return Err(TopologyError::Empty);
        }
        let check_node = |node: usize| {
            if node == 0 || node > n {
                Err(TopologyError::IndexOutOfRange { node, n })
            } else {
                Ok(node - 1)
            }
        };
        let check_weight = |link: String, weight: f64| {
            if weight.is_finite() && weight > 0.0 {
                Ok(())
            } else {
                Err(TopologyError::NonPositiveWeight { link, weight })
            }
        };

        let mut adjacency = DMatrix::zeros(n, n);
        for &(i, j, w) in edges {
            let (a, b) = (check_node(i)?, check_node(j)?);
            if a == b {
                return Err(TopologyError::SelfLoop(i));
            }
            check_weight(format!("edge ({i}, {j})"), w)?;
            if adjacency[(a, b)] != 0.0 {
                return Err(TopologyError::DuplicateEdge(i.min(j), i.max(j)));
            }
            adjacency[(a, b)] = w;
            adjacency[(b, a)] = w;
        }

        let mut links = DVector::zeros(n);
        for &(i, w) in leader_links {
            let a = check_node(i)?;
            check_weight(format!("leader link to {i}"), w)?;
            if links[a] != 0.0 {
                return Err(TopologyError::DuplicateLeaderLink(i));
            }
            links[a] = w;
        }

        Ok(Self {
            adjacency,
            leader_links: links,
        })
    }

    /// Unit-weight path `1 - 2 - ... - n` with the leader pinned to follower 1.
    pub fn chain(n: usize) -> Result<Self, TopologyError> {
        let edges: Vec<_> = (1..n).map(|i| (i, i + 1, 1.0)).collect();
        Self::new(n, &edges, &[(1, 1.0)])
    }

    pub fn n_followers(&self) -> usize {
        self.leader_links.len()
    }

    /// `a_ij` for zero-based follower indices.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.adjacency[(i, j)]
    }

    /// `b_i` for a zero-based follower index.
    pub fn leader_weight(&self, i: usize) -> f64 {
        self.leader_links[i]
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    pub fn leader_weights(&self) -> &DVector<f64> {
        &self.leader_links
    }

    /// Zero-based neighbours of follower `i` with their weights.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.n_followers()).filter_map(move |j| {
            let w = self.adjacency[(i, j)];
            (w != 0.0).then_some((j, w))
        })
    }

    pub fn is_neighbor(&self, i: usize, j: usize) -> bool {
        self.adjacency[(i, j)] != 0.0
    }

    /// `Σ_j a_ij (v_i - v_j)` for every follower.
    pub fn disagreement(&self, values: &[f64]) -> Vec<f64> {
        (0..self.n_followers())
            .map(|i| {
                self.neighbors(i)
                    .map(|(j, w)| w * (values[i] - values[j]))
                    .sum()
            })
            .collect()
    }

    /// Edge list with one-based ids, each unordered pair reported once (`i < j`).
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let n = self.n_followers();
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let w = self.adjacency[(i, j)];
                if w != 0.0 {
                    out.push((i + 1, j + 1, w));
                }
            }
        }
        out
    }

    /// Leader links with one-based ids.
    pub fn leader_links(&self) -> Vec<(usize, f64)> {
        self.leader_links
            .iter()
            .enumerate()
            .filter(|(_, &w)| w != 0.0)
            .map(|(i, &w)| (i + 1, w))
            .collect()
    }

    pub fn has_leader_link(&self) -> bool {
        self.leader_links.iter().any(|&b| b > 0.0)
    }

    /// True iff every follower can be reached from the leader through leader
    /// links and follower edges.
    pub fn leader_globally_reachable(&self) -> bool {
        let n = self.n_followers();
        let mut seen = vec![false; n];
        let mut queue: VecDeque<usize> = (0..n).filter(|&i| self.leader_links[i] > 0.0).collect();
        for &i in &queue {
            seen[i] = true;
        }
        while let Some(i) = queue.pop_front() {
            for (j, _) in self.neighbors(i) {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    pub fn matrices(&self) -> GraphMatrices {
        GraphMatrices::from_topology(self)
    }
}

/// Laplacian `L`, pinning matrix `B`, and `H = L + B` with its spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphMatrices {
    pub laplacian: DMatrix<f64>,
    pub leader: DMatrix<f64>,
    pub coupling: DMatrix<f64>,
    /// Eigenvalues of `H`, ascending.
    pub eigenvalues: Vec<f64>,
}

impl GraphMatrices {
    pub fn from_topology(t: &Topology) -> Self {
        let n = t.n_followers();
        let mut laplacian = -t.adjacency.clone();
        for i in 0..n {
            laplacian[(i, i)] = t.adjacency.row(i).sum();
        }
        let leader = DMatrix::from_diagonal(&t.leader_links);
        let coupling = &laplacian + &leader;
        let mut eigenvalues: Vec<f64> = SymmetricEigen::new(coupling.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        eigenvalues.sort_by(f64::total_cmp);
        Self {
            laplacian,
            leader,
            coupling,
            eigenvalues,
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn is_positive_definite(&self) -> bool {
        self.min_eigenvalue() > POSITIVE_DEFINITE_TOL
    }
}
