//! Graph shift operators, graph signals, and the random graph models used by
//! the experiments.
//!
//! A [`GraphShiftOperator`] is stored as a coordinate list sorted by
//! `(row, col)` with a row index on top, so every traversal visits entries in
//! the same order. Entry `(i, j)` nonzero means node `i` aggregates from node
//! `j`.

use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};

/// Largest node count accepted from text or binary input.
pub const MAX_NODES: usize = 1 << 20;

/// Largest operator handed to the dense eigensolver fallback.
pub const DENSE_EIGEN_LIMIT: usize = 2000;

/// Sparse `n x n` operator encoding the graph topology.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphShiftOperator {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

/// One entry of a [`GraphShiftOperator`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

impl GraphShiftOperator {
    /// Builds an operator from `(row, col, value)` triplets in any order.
    ///
    /// Zero-valued triplets are dropped; duplicates are rejected.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("graph must have at least one node".into()));
        }
        let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for &(i, j, v) in triplets {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, n });
            }
            if j >= n {
                return Err(Error::IndexOutOfRange { index: j, n });
            }
            if !v.is_finite() {
                return Err(Error::NonFinite("graph shift operator entries"));
            }
            if v != 0.0 {
                entries.push((i, j, v));
            }
        }
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        if let Some(w) = entries.windows(2).find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(Error::InvalidArgument(format!(
                "duplicate entry ({}, {})",
                w[0].0, w[0].1
            )));
        }
        let mut row_ptr = vec![0usize; n + 1];
        for &(i, _, _) in &entries {
            row_ptr[i + 1] += 1;
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            n,
            row_ptr,
            cols: entries.iter().map(|e| e.1).collect(),
            vals: entries.iter().map(|e| e.2).collect(),
        })
    }

    /// Symmetric binary adjacency from an undirected edge list.
    pub fn from_undirected_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut t = Vec::with_capacity(2 * edges.len());
        for &(i, j) in edges {
            t.push((i, j, 1.0));
            if i != j {
                t.push((j, i, 1.0));
            }
        }
        Self::from_triplets(n, &t)
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut t = Vec::new();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {n}",
                    r.len()
                )));
            }
            t.extend(r.iter().enumerate().map(|(j, &v)| (i, j, v)));
        }
        Self::from_triplets(n, &t)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of stored nonzeros, including any diagonal entries.
    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.vals
    }

    pub fn cols(&self) -> &[usize] {
        &self.cols
    }

    /// Range into [`Self::cols`]/[`Self::values`] holding row `i`.
    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        self.row_ptr[i]..self.row_ptr[i + 1]
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.row_range(i).map(move |p| (self.cols[p], self.vals[p]))
    }

    pub fn entries(&self) -> impl Iterator<Item = Entry> + '_ {
        (0..self.n).flat_map(move |i| {
            self.row_range(i).map(move |p| Entry {
                row: i,
                col: self.cols[p],
                value: self.vals[p],
            })
        })
    }

    /// Row index of every stored entry, aligned with [`Self::values`].
    pub fn rows(&self) -> Vec<usize> {
        let mut r = Vec::with_capacity(self.nnz());
        for i in 0..self.n {
            r.extend(std::iter::repeat_n(i, self.row_range(i).len()));
        }
        r
    }

    /// Off-diagonal support, i.e. the communication links `(i, j)`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.entries()
            .filter(|e| e.row != e.col)
            .map(|e| (e.row, e.col))
            .collect()
    }

    /// Number of directed links; an undirected edge counts twice.
    pub fn num_edges(&self) -> usize {
        self.entries().filter(|e| e.row != e.col).count()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_range(i);
        match self.cols[r.clone()].binary_search(&j) {
            Ok(p) => self.vals[r.start + p],
            Err(_) => 0.0,
        }
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        let r = self.row_range(i);
        self.cols[r].binary_search(&j).is_ok()
    }

    /// Number of neighbors node `i` receives from (diagonal excluded).
    pub fn in_degree(&self, i: usize) -> usize {
        self.row(i).filter(|&(j, _)| j != i).count()
    }

    /// Number of neighbors that receive node `i`'s broadcast.
    pub fn out_degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n];
        for e in self.entries().filter(|e| e.row != e.col) {
            d[e.col] += 1;
        }
        d
    }

    pub fn has_diagonal(&self) -> bool {
        self.entries().any(|e| e.row == e.col)
    }

    pub fn is_symmetric(&self) -> bool {
        self.entries().all(|e| self.get(e.col, e.row) == e.value)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for e in self.entries() {
            d[e.row][e.col] = e.value;
        }
        d
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            n: self.n,
            row_ptr: self.row_ptr.clone(),
            cols: self.cols.clone(),
            vals: self.vals.iter().map(|v| v * factor).collect(),
        }
    }

    /// Same pattern with new values (aligned with [`Self::values`]).
    pub fn with_values(&self, vals: Vec<f64>) -> Result<Self> {
        if vals.len() != self.nnz() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {} nonzeros",
                vals.len(),
                self.nnz()
            )));
        }
        Ok(Self {
            n: self.n,
            row_ptr: self.row_ptr.clone(),
            cols: self.cols.clone(),
            vals,
        })
    }

    /// Relabels nodes so that old node `i` becomes node `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.n)?;
        let t: Vec<_> = self
            .entries()
            .map(|e| (perm[e.row], perm[e.col], e.value))
            .collect();
        Self::from_triplets(self.n, &t)
    }

    /// `y = S x` for a dense vector.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// Largest eigenvalue of a symmetric operator by shifted power iteration.
    ///
    /// The shift by the maximum absolute row sum makes the spectrum of
    /// `S + cI` nonnegative, so iteration converges to the largest algebraic
    /// eigenvalue even on bipartite graphs.
    pub fn largest_eigenvalue(&self, tol: f64, max_iter: usize) -> Result<f64> {
        let n = self.n;
        let shift = (0..n)
            .map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        if shift == 0.0 {
            return Err(Error::ZeroSpectralRadius(0.0));
        }
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * (i as f64 + 1.0) / n as f64).collect();
        normalize(&mut v);
        let mut prev = f64::NAN;
        for _ in 0..max_iter {
            let mut w = self.mul_vec(&v);
            for (wi, vi) in w.iter_mut().zip(&v) {
                *wi += shift * vi;
            }
            let rq: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
            normalize(&mut w);
            v = w;
            if (rq - prev).abs() <= tol * rq.abs() {
                return Ok(rq - shift);
            }
            prev = rq;
        }
        Err(Error::NoConvergence(max_iter))
    }

    /// Largest eigenvalue from a dense symmetric eigendecomposition.
    pub fn largest_eigenvalue_dense(&self) -> f64 {
        let n = self.n;
        let mut m = nalgebra::DMatrix::<f64>::zeros(n, n);
        for e in self.entries() {
            m[(e.row, e.col)] = e.value;
        }
        m.symmetric_eigenvalues().iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `S / lambda_max(S)`; power iteration to relative tolerance `1e-10`,
    /// with a dense solve when the top of the spectrum is too crowded for
    /// it to converge.
    pub fn normalize_by_spectral_radius(&self) -> Result<Self> {
        if !self.is_symmetric() {
            return Err(Error::InvalidArgument("operator must be symmetric".into()));
        }
        let lambda = match self.largest_eigenvalue(1e-10, 10_000) {
            Err(Error::NoConvergence(_)) if self.n <= DENSE_EIGEN_LIMIT => self.largest_eigenvalue_dense(),
            other => other?,
        };
        if lambda.abs() < 1e-300 || lambda <= 0.0 {
            return Err(Error::ZeroSpectralRadius(lambda));
        }
        Ok(self.scaled(1.0 / lambda))
    }

    /// Edge-list text: header `n=<count>` then one `i j weight` per line.
    pub fn to_edge_list(&self) -> String {
        let mut s = format!("n={}\n", self.n);
        for e in self.entries() {
            let _ = writeln!(s, "{} {} {}", e.row, e.col, e.value);
        }
        s
    }

    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut n = None;
        let mut t = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse { line: lineno + 1, msg };
            match n {
                None => {
                    let count = line
                        .strip_prefix("n=")
                        .ok_or_else(|| err("expected header `n=<count>`".into()))?;
                    let count: usize = count
                        .trim()
                        .parse()
                        .map_err(|e| err(format!("bad node count: {e}")))?;
                    if count == 0 || count > MAX_NODES {
                        return Err(err(format!("node count must be in 1..={MAX_NODES}")));
                    }
                    n = Some(count);
                }
                Some(count) => {
                    let mut it = line.split_whitespace();
                    let (Some(a), Some(b), Some(w), None) = (it.next(), it.next(), it.next(), it.next())
                    else {
                        return Err(err("expected `i j weight`".into()));
                    };
                    let i: usize = a.parse().map_err(|e| err(format!("bad row index: {e}")))?;
                    let j: usize = b.parse().map_err(|e| err(format!("bad column index: {e}")))?;
                    let w: f64 = w.parse().map_err(|e| err(format!("bad weight: {e}")))?;
                    if i >= count || j >= count {
                        return Err(err(format!("index out of range for n={count}")));
                    }
                    if !w.is_finite() {
                        return Err(err("weight must be finite".into()));
                    }
                    t.push((i, j, w));
                }
            }
        }
        let n = n.ok_or(Error::Parse { line: 0, msg: "missing header".into() })?;
        Self::from_triplets(n, &t)
    }
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(Error::DimensionMismatch(format!("permutation of length {} for n={n}", perm.len())));
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || std::mem::replace(&mut seen[p], true) {
            return Err(Error::InvalidArgument("not a permutation".into()));
        }
    }
    Ok(())
}

/// Node-indexed values with `F` feature channels, stored row-major `n x F`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSignal {
    n: usize,
    features: usize,
    data: Vec<f64>,
}

impl GraphSignal {
    pub fn zeros(n: usize, features: usize) -> Self {
        Self { n, features, data: vec![0.0; n * features] }
    }

    pub fn from_rows(n: usize, features: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * features {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {n}x{features} signal",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("graph signal"));
        }
        Ok(Self { n, features, data })
    }

    /// Single-feature signal.
    pub fn from_column(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        Self::from_rows(n, 1, values)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn features(&self) -> usize {
        self.features
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, node: usize, feature: usize) -> f64 {
        self.data[node * self.features + feature]
    }

    pub fn set(&mut self, node: usize, feature: usize, v: f64) {
        self.data[node * self.features + feature] = v;
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.data[i * self.features..(i + 1) * self.features]
    }

    pub fn node_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.features..(i + 1) * self.features]
    }

    pub fn column(&self, f: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, f)).collect()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.n, self.features), (other.n, other.features));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Rows reordered so that old node `i` becomes node `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.n)?;
        let mut out = Self::zeros(self.n, self.features);
        for i in 0..self.n {
            out.node_mut(perm[i]).copy_from_slice(self.node(i));
        }
        Ok(out)
    }
}

/// One-hot single-feature signal at `node`.
pub fn kronecker_delta(n: usize, node: usize) -> Result<GraphSignal> {
    if node >= n {
        return Err(Error::IndexOutOfRange { index: node, n });
    }
    let mut x = GraphSignal::zeros(n, 1);
    x.set(node, 0, 1.0);
    Ok(x)
}

/// `S x`, column by column.
pub fn ideal_shift(s: &GraphShiftOperator, x: &GraphSignal) -> Result<GraphSignal> {
    if s.n() != x.n() {
        return Err(Error::DimensionMismatch(format!(
            "operator has {} nodes, signal has {}",
            s.n(),
            x.n()
        )));
    }
    let f = x.features();
    let mut out = GraphSignal::zeros(x.n(), f);
    for i in 0..s.n() {
        let row = out.node_mut(i);
        for (j, v) in s.row(i) {
            for (o, xv) in row.iter_mut().zip(x.node(j)) {
                *o += v * xv;
            }
        }
    }
    Ok(out)
}

/// Stochastic block model with contiguous, equally sized communities.
///
/// Node `i` belongs to community `i / (n / communities)`. Each unordered pair
/// is sampled once, in lexicographic order.
pub fn generate_sbm<R: Rng + ?Sized>(
    n: usize,
    communities: usize,
    p_intra: f64,
    p_inter: f64,
    rng: &mut R,
) -> Result<GraphShiftOperator> {
    for (name, p) in [("p_intra", p_intra), ("p_inter", p_inter)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidProbability(format!("{name} = {p} is outside [0, 1]")));
        }
    }
    if p_inter > p_intra {
        return Err(Error::InvalidProbability(format!(
            "p_inter = {p_inter} exceeds p_intra = {p_intra}"
        )));
    }
    if n == 0 || communities == 0 || n % communities != 0 {
        return Err(Error::CommunitySize { n, communities });
    }
    let block = n / communities;
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if i / block == j / block { p_intra } else { p_inter };
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    GraphShiftOperator::from_undirected_edges(n, &edges)
}

/// Disk graph: an edge joins every pair of distinct nodes within `radius`.
pub fn generate_geometric(positions: &[[f64; 2]], radius: f64) -> Result<GraphShiftOperator> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
    }
    if positions.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("positions"));
    }
    let n = positions.len();
    let r2 = radius * radius;
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = positions[i][0] - positions[j][0];
            let dy = positions[i][1] - positions[j][1];
            if dx * dx + dy * dy <= r2 {
                edges.push((i, j));
            }
        }
    }
    GraphShiftOperator::from_undirected_edges(n, &edges)
}

/// Whether the undirected graph underlying `s` is connected.
pub fn is_connected(s: &GraphShiftOperator) -> bool {
    let n = s.n();
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    let mut count = 1;
    while let Some(i) = stack.pop() {
        for (j, _) in s.row(i) {
            if !seen[j] {
                seen[j] = true;
                count += 1;
                stack.push(j);
            }
        }
    }
    count == n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    fn path(n: usize) -> GraphShiftOperator {
        let e: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
        GraphShiftOperator::from_undirected_edges(n, &e).unwrap()
    }

    #[test]
    fn triplets_are_sorted_and_deduplicated() {
        let s = GraphShiftOperator::from_triplets(3, &[(2, 0, 1.0), (0, 2, 1.0), (0, 1, 0.0)]).unwrap();
        assert_eq!(s.nnz(), 2);
        let e: Vec<_> = s.entries().map(|e| (e.row, e.col)).collect();
        assert_eq!(e, vec![(0, 2), (2, 0)]);
        assert!(GraphShiftOperator::from_triplets(3, &[(0, 1, 1.0), (0, 1, 2.0)]).is_err());
        assert!(GraphShiftOperator::from_triplets(3, &[(0, 3, 1.0)]).is_err());
        assert!(GraphShiftOperator::from_triplets(0, &[]).is_err());
    }

    #[test]
    fn sbm_degenerate_probabilities_give_cliques() {
        let s = generate_sbm(12, 3, 1.0, 0.0, &mut substream(1, "g", &[])).unwrap();
        for i in 0..12 {
            for j in 0..12 {
                let want = if i != j && i / 4 == j / 4 { 1.0 } else { 0.0 };
                assert_eq!(s.get(i, j), want);
            }
        }
    }

    #[test]
    fn sbm_rejects_bad_arguments() {
        let mut r = substream(1, "g", &[]);
        assert!(matches!(generate_sbm(10, 3, 0.8, 0.2, &mut r), Err(Error::CommunitySize { .. })));
        assert!(matches!(generate_sbm(10, 2, 1.2, 0.2, &mut r), Err(Error::InvalidProbability(_))));
        assert!(matches!(generate_sbm(10, 2, 0.2, 0.8, &mut r), Err(Error::InvalidProbability(_))));
        assert!(matches!(generate_sbm(10, 2, 0.8, -0.1, &mut r), Err(Error::InvalidProbability(_))));
    }

    #[test]
    fn sbm_is_deterministic_symmetric_and_loop_free() {
        let a = generate_sbm(100, 10, 0.8, 0.2, &mut substream(5, "g", &[])).unwrap();
        let b = generate_sbm(100, 10, 0.8, 0.2, &mut substream(5, "g", &[])).unwrap();
        assert_eq!(a, b);
        assert!(a.is_symmetric());
        assert!(!a.has_diagonal());
        assert_eq!(a.n(), 100);
    }

    #[test]
    fn geometric_threshold() {
        let one = generate_geometric(&[[0.0, 0.0], [1.0, 0.0]], 1.5).unwrap();
        assert_eq!(one.edges(), vec![(0, 1), (1, 0)]);
        let none = generate_geometric(&[[0.0, 0.0], [2.0, 0.0]], 1.5).unwrap();
        assert_eq!(none.nnz(), 0);
        assert!(generate_geometric(&[[f64::NAN, 0.0]], 1.5).is_err());
        assert!(generate_geometric(&[[0.0, 0.0]], 0.0).is_err());
    }

    #[test]
    fn known_spectra() {
        let k3 = GraphShiftOperator::from_undirected_edges(3, &[(0, 1), (0, 2), (1, 2)]).unwrap();
        let nk3 = k3.normalize_by_spectral_radius().unwrap();
        for e in nk3.entries() {
            assert!((e.value - 0.5).abs() < 1e-10);
        }
        let p2 = path(2).normalize_by_spectral_radius().unwrap();
        for e in p2.entries() {
            assert!((e.value - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn normalization_errors() {
        let empty = GraphShiftOperator::from_triplets(3, &[]).unwrap();
        assert!(matches!(empty.normalize_by_spectral_radius(), Err(Error::ZeroSpectralRadius(_))));
        let asym = GraphShiftOperator::from_triplets(2, &[(0, 1, 1.0)]).unwrap();
        assert!(asym.normalize_by_spectral_radius().is_err());
    }

    #[test]
    fn delta_signal() {
        assert_eq!(kronecker_delta(3, 1).unwrap().as_slice(), &[0.0, 1.0, 0.0]);
        assert_eq!(kronecker_delta(1, 0).unwrap().as_slice(), &[1.0]);
        assert!(kronecker_delta(3, 3).is_err());
    }

    #[test]
    fn shift_on_path() {
        let s = path(3);
        let x = GraphSignal::from_column(vec![1.0, 0.0, 0.0]).unwrap();
        assert_eq!(ideal_shift(&s, &x).unwrap().as_slice(), &[0.0, 1.0, 0.0]);
        let z = GraphSignal::zeros(3, 2);
        assert_eq!(ideal_shift(&s, &z).unwrap(), z);
        assert!(ideal_shift(&s, &GraphSignal::zeros(4, 1)).is_err());
    }

    #[test]
    fn edge_list_round_trip() {
        let s = generate_sbm(20, 2, 0.8, 0.2, &mut substream(3, "g", &[]))
            .unwrap()
            .normalize_by_spectral_radius()
            .unwrap();
        let back = GraphShiftOperator::parse_edge_list(&s.to_edge_list()).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn edge_list_errors() {
        assert!(GraphShiftOperator::parse_edge_list("").is_err());
        assert!(GraphShiftOperator::parse_edge_list("0 1 1\n").is_err());
        assert!(GraphShiftOperator::parse_edge_list("n=2\n0 2 1\n").is_err());
        assert!(GraphShiftOperator::parse_edge_list("n=2\n0 1\n").is_err());
        assert!(GraphShiftOperator::parse_edge_list("n=2\n0 1 inf\n").is_err());
        let ok = GraphShiftOperator::parse_edge_list("# comment\nn=2\n\n0 1 1.5\n1 0 1.5\n").unwrap();
        assert_eq!(ok.get(0, 1), 1.5);
    }
}
