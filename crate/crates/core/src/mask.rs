//! Attention masks as directed graphs.
//!
//! An edge `(j, i)` means token `i` may attend to token `j`. Every node has a
//! self-loop, so each softmax row is over a non-empty neighbourhood.
//!
//! Public positions are 1-based. Matrix accessors such as
//! [`MaskGraph::allows`] take 0-based `(row, col)` indices.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MaskKind {
    Causal,
    /// Token itself plus `width - 1` predecessors.
    SlidingWindow { width: usize },
    /// First `prefix_len` tokens are mutually visible; the rest is causal.
    Prefix { prefix_len: usize },
    Complete,
}

impl MaskKind {
    pub fn validate(&self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::InvalidMask("sequence length n must be >= 1".into()));
        }
        match *self {
            MaskKind::SlidingWindow { width } if width < 2 => Err(Error::InvalidMask(format!(
                "window width w={width} violates w >= 2"
            ))),
            MaskKind::SlidingWindow { width } if width > n => Err(Error::InvalidMask(format!(
                "window width w={width} violates w <= n={n}"
            ))),
            MaskKind::Prefix { prefix_len } if prefix_len < 1 => Err(Error::InvalidMask(
                "prefix length k=0 violates k >= 1".into(),
            )),
            MaskKind::Prefix { prefix_len } if prefix_len > n => Err(Error::InvalidMask(format!(
                "prefix length k={prefix_len} violates k <= n={n}"
            ))),
            _ => Ok(()),
        }
    }

    /// Whether 1-based token `i` may attend to 1-based token `j`.
    fn edge(&self, j: usize, i: usize) -> bool {
        match *self {
            MaskKind::Causal => j <= i,
            MaskKind::SlidingWindow { width } => j <= i && j + width > i,
            MaskKind::Prefix { prefix_len } => j <= prefix_len || j <= i,
            MaskKind::Complete => true,
        }
    }

    pub fn is_causal(&self) -> bool {
        matches!(self, MaskKind::Causal)
    }
}

impl fmt::Display for MaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MaskKind::Causal => write!(f, "causal"),
            MaskKind::SlidingWindow { width } => write!(f, "window:w={width}"),
            MaskKind::Prefix { prefix_len } => write!(f, "prefix:k={prefix_len}"),
            MaskKind::Complete => write!(f, "complete"),
        }
    }
}

fn parse_param(s: &str, key: &str) -> Result<usize> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::InvalidMask(format!("expected `{key}=<int>`, got `{s}`")))?;
    if k.trim() != key {
        return Err(Error::InvalidMask(format!("expected parameter `{key}`, got `{k}`")));
    }
    v.trim()
        .parse()
        .map_err(|_| Error::InvalidMask(format!("`{v}` is not a non-negative integer")))
}

impl FromStr for MaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, rest) = match s.split_once(':') {
            Some((a, b)) => (a, Some(b)),
            None => (s, None),
        };
        let kind = match (name, rest) {
            ("causal", None) => MaskKind::Causal,
            ("complete", None) => MaskKind::Complete,
            ("window", Some(p)) => MaskKind::SlidingWindow { width: parse_param(p, "w")? },
            ("prefix", Some(p)) => MaskKind::Prefix { prefix_len: parse_param(p, "k")? },
            _ => {
                return Err(Error::InvalidMask(format!(
                    "unknown mask `{s}` (expected causal, window:w=<int>, prefix:k=<int>, complete)"
                )))
            }
        };
        match kind {
            MaskKind::SlidingWindow { width } if width < 2 => Err(Error::InvalidMask(format!(
                "window width w={width} violates w >= 2"
            ))),
            MaskKind::Prefix { prefix_len: 0 } => {
                Err(Error::InvalidMask("prefix length k=0 violates k >= 1".into()))
            }
            k => Ok(k),
        }
    }
}

impl Serialize for MaskKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MaskKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Immutable attention graph over `n` positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskGraph {
    n: usize,
    kind: Option<MaskKind>,
    /// Row-major: `allowed[row * n + col]` iff token `row` attends to `col`.
    allowed: Vec<bool>,
}

pub fn build_mask(kind: MaskKind, n: usize) -> Result<MaskGraph> {
    MaskGraph::new(kind, n)
}

impl MaskGraph {
    pub fn new(kind: MaskKind, n: usize) -> Result<Self> {
        kind.validate(n)?;
        let mut allowed = vec![false; n * n];
        for i in 1..=n {
            for j in 1..=n {
                allowed[(i - 1) * n + (j - 1)] = kind.edge(j, i);
            }
        }
        Ok(MaskGraph { n, kind: Some(kind), allowed })
    }

    /// Builds a graph from an arbitrary row-major attend matrix. Self-loops
    /// are always added.
    pub fn from_attend_matrix(n: usize, mut allowed: Vec<bool>) -> Result<Self> {
        if n == 0 || allowed.len() != n * n {
            return Err(Error::Shape(format!(
                "attend matrix of length {} for n={n}",
                allowed.len()
            )));
        }
        for i in 0..n {
            allowed[i * n + i] = true;
        }
        Ok(MaskGraph { n, kind: None, allowed })
    }

    /// Returns a copy with the edge `(j, i)` (1-based) added.
    pub fn with_edge(&self, j: usize, i: usize) -> Result<Self> {
        self.check(j)?;
        self.check(i)?;
        let mut g = self.clone();
        g.allowed[(i - 1) * self.n + (j - 1)] = true;
        g.kind = None;
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// The mask kind this graph was built from, if any.
    pub fn kind(&self) -> Option<MaskKind> {
        self.kind
    }

    /// 0-based: does row `row` attend to column `col`?
    #[inline]
    pub fn allows(&self, row: usize, col: usize) -> bool {
        self.allowed[row * self.n + col]
    }

    /// 1-based edge query: `(j, i) ∈ E`.
    pub fn has_edge(&self, j: usize, i: usize) -> Result<bool> {
        self.check(j)?;
        self.check(i)?;
        Ok(self.allows(i - 1, j - 1))
    }

    fn check(&self, pos: usize) -> Result<()> {
        if pos == 0 || pos > self.n {
            Err(Error::PositionOutOfRange { pos, n: self.n })
        } else {
            Ok(())
        }
    }

    /// `N_i = {k : (k, i) ∈ E}` in ascending order.
    pub fn neighbors(&self, i: usize) -> Result<Vec<usize>> {
        self.check(i)?;
        Ok((1..=self.n).filter(|&k| self.allows(i - 1, k - 1)).collect())
    }

    /// All positions reachable from `u` along directed edges (`u` included).
    pub fn reachable_from(&self, u: usize) -> Result<Vec<usize>> {
        self.check(u)?;
        let n = self.n;
        let mut seen = vec![false; n];
        let mut queue = VecDeque::new();
        seen[u - 1] = true;
        queue.push_back(u - 1);
        while let Some(src) = queue.pop_front() {
            // Out-edges of `src`: every row that attends to it.
            for dst in 0..n {
                if !seen[dst] && self.allows(dst, src) {
                    seen[dst] = true;
                    queue.push_back(dst);
                }
            }
        }
        Ok((1..=n).filter(|&v| seen[v - 1]).collect())
    }

    /// Nodes from which every node is reachable.
    pub fn center_nodes(&self) -> Vec<usize> {
        (1..=self.n)
            .filter(|&v| {
                self.reachable_from(v)
                    .map(|r| r.len() == self.n)
                    .unwrap_or(false)
            })
            .collect()
    }

    /// Column sums of the 0/1 adjacency: how many rows may attend to each token.
    pub fn column_counts(&self) -> Vec<usize> {
        (0..self.n)
            .map(|c| (0..self.n).filter(|&r| self.allows(r, c)).count())
            .collect()
    }

    /// True when no row attends to a later column.
    pub fn is_lower_triangular(&self) -> bool {
        (0..self.n).all(|r| (r + 1..self.n).all(|c| !self.allows(r, c)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edges(g: &MaskGraph) -> Vec<(usize, usize)> {
        let mut out = vec![];
        for j in 1..=g.n() {
            for i in 1..=g.n() {
                if g.has_edge(j, i).unwrap() {
                    out.push((j, i));
                }
            }
        }
        out
    }

    #[test]
    fn causal_three() {
        let g = MaskGraph::new(MaskKind::Causal, 3).unwrap();
        assert_eq!(edges(&g), vec![(1, 1), (1, 2), (1, 3), (2, 2), (2, 3), (3, 3)]);
    }

    #[test]
    fn window_row_is_clamped() {
        let g = MaskGraph::new(MaskKind::SlidingWindow { width: 2 }, 4).unwrap();
        assert_eq!(g.neighbors(4).unwrap(), vec![3, 4]);
        assert_eq!(g.neighbors(1).unwrap(), vec![1]);
    }

    #[test]
    fn prefix_rows() {
        let g = MaskGraph::new(MaskKind::Prefix { prefix_len: 2 }, 4).unwrap();
        assert_eq!(g.neighbors(1).unwrap(), vec![1, 2]);
        assert_eq!(g.neighbors(3).unwrap(), vec![1, 2, 3]);
    }

    #[test]
    fn neighbor_examples() {
        let c = MaskGraph::new(MaskKind::Causal, 3).unwrap();
        assert_eq!(c.neighbors(2).unwrap(), vec![1, 2]);
        let full = MaskGraph::new(MaskKind::Complete, 3).unwrap();
        assert_eq!(full.neighbors(1).unwrap(), vec![1, 2, 3]);
        assert!(matches!(
            c.neighbors(4),
            Err(Error::PositionOutOfRange { pos: 4, n: 3 })
        ));
        assert!(c.neighbors(0).is_err());
    }

    #[test]
    fn reachability_examples() {
        let c = MaskGraph::new(MaskKind::Causal, 4).unwrap();
        assert_eq!(c.reachable_from(1).unwrap(), vec![1, 2, 3, 4]);
        assert_eq!(c.reachable_from(3).unwrap(), vec![3, 4]);
        let w = MaskGraph::new(MaskKind::SlidingWindow { width: 2 }, 5).unwrap();
        assert_eq!(w.reachable_from(1).unwrap(), vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn center_examples() {
        let c = MaskGraph::new(MaskKind::Causal, 8).unwrap();
        assert_eq!(c.center_nodes(), vec![1]);
        let p = MaskGraph::new(MaskKind::Prefix { prefix_len: 3 }, 8).unwrap();
        assert_eq!(p.center_nodes(), vec![1, 2, 3]);
        let f = MaskGraph::new(MaskKind::Complete, 8).unwrap();
        assert_eq!(f.center_nodes(), (1..=8).collect::<Vec<_>>());
    }

    #[test]
    fn invalid_parameters() {
        assert!(MaskGraph::new(MaskKind::Causal, 0).is_err());
        let e = MaskGraph::new(MaskKind::SlidingWindow { width: 1 }, 4).unwrap_err();
        assert!(e.to_string().contains("w >= 2"), "{e}");
        let e = MaskGraph::new(MaskKind::SlidingWindow { width: 5 }, 4).unwrap_err();
        assert!(e.to_string().contains("w <= n"), "{e}");
        let e = MaskGraph::new(MaskKind::Prefix { prefix_len: 5 }, 4).unwrap_err();
        assert!(e.to_string().contains("k <= n"), "{e}");
        assert!(MaskGraph::new(MaskKind::Prefix { prefix_len: 0 }, 4).is_err());
    }

    #[test]
    fn parse_and_display() {
        for s in ["causal", "complete", "window:w=4", "prefix:k=2"] {
            let k: MaskKind = s.parse().unwrap();
            assert_eq!(k.to_string(), s);
        }
        let e = "window:w=1".parse::<MaskKind>().unwrap_err();
        assert!(e.to_string().contains("w >= 2"));
        assert!("window:k=3".parse::<MaskKind>().is_err());
        assert!("banded".parse::<MaskKind>().is_err());
    }
}
