//! Covariant tensor fields sampled on grid nodes.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Where a field lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Domain {
    Plasma,
    Vacuum,
    Interface,
    Wall,
}

/// A (0, r) tensor in two dimensions with 2^r components per node.
///
/// Component (a₁, …, a_r) is stored at flat index Σ a_k 2^{r-1-k}, so the
/// first index is the most significant bit.  For ∇T the new derivative index
/// is placed first.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    pub rank: usize,
    pub domain: Domain,
    pub n: usize,
    pub data: Vec<f64>,
}

impl TensorField {
    pub fn zeros(rank: usize, domain: Domain, n: usize) -> Self {
        Self {
            rank,
            domain,
            n,
            data: vec![0.0; n << rank],
        }
    }

    pub fn scalar(domain: Domain, values: Vec<f64>) -> Self {
        Self {
            rank: 0,
            domain,
            n: values.len(),
            data: values,
        }
    }

    pub fn vector(domain: Domain, v: [Vec<f64>; 2]) -> Self {
        let n = v[0].len();
        let mut data = v[0].clone();
        data.extend_from_slice(&v[1]);
        Self {
            rank: 1,
            domain,
            n,
            data,
        }
    }

    pub fn from_components(rank: usize, domain: Domain, comps: Vec<Vec<f64>>) -> Result<Self> {
        if comps.len() != 1 << rank {
            return Err(Error::Shape(format!(
                "rank {rank} needs {} components, got {}",
                1 << rank,
                comps.len()
            )));
        }
        let n = comps[0].len();
        if comps.iter().any(|c| c.len() != n) {
            return Err(Error::Shape("component lengths differ".into()));
        }
        Ok(Self {
            rank,
            domain,
            n,
            data: comps.concat(),
        })
    }

    pub fn n_comp(&self) -> usize {
        1 << self.rank
    }

    pub fn flat(idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &a| (acc << 1) | a)
    }

    pub fn comp(&self, c: usize) -> &[f64] {
        &self.data[c * self.n..(c + 1) * self.n]
    }

    pub fn comp_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.n;
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn at(&self, idx: &[usize]) -> &[f64] {
        self.comp(Self::flat(idx))
    }

    /// Value of component `c` at node `k`.
    pub fn get(&self, c: usize, k: usize) -> f64 {
        self.data[c * self.n + k]
    }

    pub fn check_shape(&self, other: &TensorField) -> Result<()> {
        if self.rank != other.rank || self.n != other.n || self.domain != other.domain {
            return Err(Error::Shape(format!(
                "tensor mismatch: rank {} / {}, nodes {} / {}, {:?} / {:?}",
                self.rank, other.rank, self.n, other.n, self.domain, other.domain
            )));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// self + s * other
    pub fn axpy(&self, s: f64, other: &TensorField) -> TensorField {
        let mut out = self.clone();
        out.data
            .iter_mut()
            .zip(&other.data)
            .for_each(|(a, b)| *a += s * b);
        out
    }

    pub fn scaled(&self, s: f64) -> TensorField {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|a| *a *= s);
        out
    }

    pub fn max_diff(&self, other: &TensorField) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Restrict to the nodes listed in `nodes`, retagging the domain.
    pub fn restrict(&self, nodes: &[usize], domain: Domain) -> TensorField {
        let mut comps = Vec::with_capacity(self.n_comp());
        for c in 0..self.n_comp() {
            let src = self.comp(c);
            comps.push(nodes.iter().map(|&k| src[k]).collect::<Vec<_>>());
        }
        TensorField {
            rank: self.rank,
            domain,
            n: nodes.len(),
            data: comps.concat(),
        }
    }
}

/// All index tuples of a rank-r tensor in storage order.
pub fn index_tuples(rank: usize) -> Vec<Vec<usize>> {
    (0..1usize << rank)
        .map(|c| (0..rank).map(|k| (c >> (rank - 1 - k)) & 1).collect())
        .collect()
}
