//! Server consensus weights and the random network events of a trial.

use nalgebra::DMatrix;
use rand::Rng;

use crate::{Error, Real, Result};

#[derive(Debug, Clone)]
pub struct WeightMatrix<T: Real> {
    pub w: DMatrix<T>,
    pub mu: T,
    pub nu_min: T,
}

/// Symmetric adjacency of the server graph. Self-loops are implied.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adjacency {
    n: usize,
    edges: Vec<bool>,
}

impl Adjacency {
    pub fn complete(n: usize) -> Self {
        Self {
            n,
            edges: vec![true; n * n],
        }
    }

    /// Graph on `n` nodes with the given undirected edges (0-based).
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adj = Self {
            n,
            edges: vec![false; n * n],
        };
        for i in 0..n {
            adj.edges[i * n + i] = true;
        }
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidArgument(format!(
                    "edge ({a}, {b}) references a server outside 0..{n}"
                )));
            }
            adj.edges[a * n + b] = true;
            adj.edges[b * n + a] = true;
        }
        Ok(adj)
    }

    pub fn from_matrix(m: &[Vec<bool>]) -> Result<Self> {
        let n = m.len();
        let mut edges = vec![false; n * n];
        for (i, row) in m.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Shape(format!("adjacency row {i} has {} entries", row.len())));
            }
            for (j, &e) in row.iter().enumerate() {
                if e != m[j][i] {
                    return Err(Error::InvalidArgument(format!(
                        "adjacency is not symmetric at ({i}, {j})"
                    )));
                }
                edges[i * n + j] = e || i == j;
            }
        }
        Ok(Self { n, edges })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn has(&self, i: usize, j: usize) -> bool {
        self.edges[i * self.n + j]
    }

    pub fn is_complete(&self) -> bool {
        self.edges.iter().all(|&e| e)
    }

    /// Neighbour count including the self-loop.
    pub fn degree(&self, i: usize) -> usize {
        (0..self.n).filter(|&j| self.has(i, j)).count()
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return false;
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..self.n {
                if self.has(i, j) && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Copy with each off-diagonal edge removed independently with probability `p`.
    pub fn dropout<R: Rng + ?Sized>(&self, rng: &mut R, p: f64) -> Self {
        let mut out = self.clone();
        for i in 0..self.n {
            for j in i + 1..self.n {
                if self.has(i, j) && rng.random::<f64>() < p {
                    out.edges[i * self.n + j] = false;
                    out.edges[j * self.n + i] = false;
                }
            }
        }
        out
    }
}

fn metropolis<T: Real>(adj: &Adjacency, mu: T) -> DMatrix<T> {
    let n = adj.len();
    let scale = T::one() - mu;
    if adj.is_complete() {
        return DMatrix::from_element(n, n, scale / T::lit(n as f64));
    }
    let deg: Vec<usize> = (0..n).map(|i| adj.degree(i)).collect();
    let mut w = DMatrix::<T>::zeros(n, n);
    for i in 0..n {
        let mut off = T::zero();
        for j in 0..n {
            if i != j && adj.has(i, j) {
                let v = T::one() / T::lit(deg[i].max(deg[j]) as f64);
                w[(i, j)] = v;
                off += v;
            }
        }
        w[(i, i)] = T::one() - off;
    }
    w * scale
}

fn nu_min<T: Real>(w: &DMatrix<T>) -> T {
    w.iter()
        .copied()
        .filter(|&v| v > T::zero())
        .fold(T::max_value().unwrap_or(T::one()), |a, b| a.min(b))
}

/// Consensus weights with row and column sums `1 - mu`.
///
/// The complete graph gets the uniform matrix `(1 - mu)/n`; any other
/// connected graph gets Metropolis weights `min(1/deg_i, 1/deg_j)` on edges
/// (degrees counting the self-loop), the diagonal taking the remainder,
/// scaled by `1 - mu`.
pub fn build_weight_matrix<T: Real>(adj: &Adjacency, mu: T) -> Result<WeightMatrix<T>> {
    if !(mu > T::zero() && mu < T::one()) {
        return Err(Error::InvalidArgument(format!(
            "leakage mu must lie in (0, 1), got {mu}"
        )));
    }
    if !adj.is_connected() {
        return Err(Error::Disconnected);
    }
    let w = metropolis(adj, mu);
    let nu_min = nu_min(&w);
    Ok(WeightMatrix { w, mu, nu_min })
}

/// Weights for one iteration's realised graph, which may be disconnected.
pub fn realised_weight_matrix<T: Real>(adj: &Adjacency, mu: T) -> WeightMatrix<T> {
    let w = metropolis(adj, mu);
    let nu_min = nu_min(&w);
    WeightMatrix { w, mu, nu_min }
}

/// Index drawn with probabilities `gamma` (entry 0 means no partition).
pub fn sample_partition_assignment<R: Rng + ?Sized>(rng: &mut R, gamma: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &g) in gamma.iter().enumerate() {
        acc += g;
        if u < acc {
            return i;
        }
    }
    // rounding in the cumulative sum: fall back to the last positive weight
    gamma.iter().rposition(|&g| g > 0.0).unwrap_or(0)
}

/// Each of `n_workers` straggles independently with probability `pi`.
pub fn sample_stragglers<R: Rng + ?Sized>(rng: &mut R, pi: f64, n_workers: usize) -> Vec<usize> {
    (0..n_workers).filter(|_| rng.random::<f64>() < pi).collect()
}

/// Delay uniform on `0..=min(h, k)`.
pub fn sample_delay<R: Rng + ?Sized>(rng: &mut R, h: usize, k: usize) -> usize {
    let top = h.min(k);
    if top == 0 {
        0
    } else {
        rng.random_range(0..=top)
    }
}

pub fn validate_gamma(gamma: &[f64]) -> Result<()> {
    if gamma.len() < 2 {
        return Err(Error::InvalidArgument(
            "partition probabilities need an entry for 'none' and at least one partition".into(),
        ));
    }
    if gamma.iter().any(|&g| !(g >= 0.0)) {
        return Err(Error::InvalidArgument(
            "partition probabilities must be nonnegative".into(),
        ));
    }
    let s: f64 = gamma.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "partition probabilities must sum to 1, got {s}"
        )));
    }
    Ok(())
}

/// `gamma_0` for "no partition", the rest split evenly over `p` partitions.
pub fn uniform_gamma(gamma0: f64, p: usize) -> Vec<f64> {
    let mut g = vec![(1.0 - gamma0) / p as f64; p + 1];
    g[0] = gamma0;
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    fn check_sums(w: &DMatrix<f64>, mu: f64) {
        for i in 0..w.nrows() {
            assert!((w.row(i).sum() - (1.0 - mu)).abs() < 1e-12);
            assert!((w.column(i).sum() - (1.0 - mu)).abs() < 1e-12);
        }
    }

    #[test]
    fn complete_graph_uniform() {
        let wm = build_weight_matrix::<f64>(&Adjacency::complete(5), 0.05).unwrap();
        assert!(wm.w.iter().all(|&v| (v - 0.19).abs() < 1e-15));
        check_sums(&wm.w, 0.05);
        let one = build_weight_matrix::<f64>(&Adjacency::complete(1), 0.05).unwrap();
        assert!((one.w[(0, 0)] - 0.95).abs() < 1e-15);
    }

    #[test]
    fn path_graph() {
        let adj = Adjacency::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let wm = build_weight_matrix(&adj, 0.1).unwrap();
        assert_eq!(wm.w[(0, 2)], 0.0);
        assert_eq!(wm.w, wm.w.transpose());
        check_sums(&wm.w, 0.1);
        assert!(wm.w.iter().filter(|&&v| v > 0.0).all(|&v| v >= wm.nu_min));
    }

    #[test]
    fn rejects_disconnected_and_bad_mu() {
        let adj = Adjacency::from_edges(3, &[(0, 1)]).unwrap();
        assert!(matches!(build_weight_matrix(&adj, 0.1), Err(Error::Disconnected)));
        assert!(build_weight_matrix(&Adjacency::complete(3), 0.0).is_err());
        assert!(build_weight_matrix(&Adjacency::complete(3), 1.0).is_err());
    }

    #[test]
    fn rejects_asymmetric() {
        let m = vec![vec![true, true], vec![false, true]];
        assert!(Adjacency::from_matrix(&m).is_err());
    }

    #[test]
    fn partition_draws() {
        let mut r = rng::from_seed(1);
        for _ in 0..100 {
            assert_eq!(sample_partition_assignment(&mut r, &[1.0, 0.0, 0.0]), 0);
            assert_eq!(sample_partition_assignment(&mut r, &[0.0, 1.0]), 1);
        }
        let gamma = uniform_gamma(0.05, 5);
        validate_gamma(&gamma).unwrap();
        let draws = 100_000;
        let mut counts = [0usize; 6];
        for _ in 0..draws {
            counts[sample_partition_assignment(&mut r, &gamma)] += 1;
        }
        for (i, &c) in counts.iter().enumerate() {
            let p = gamma[i];
            let sd = (draws as f64 * p * (1.0 - p)).sqrt();
            assert!((c as f64 - draws as f64 * p).abs() < 3.0 * sd, "{i}: {c}");
        }
    }

    #[test]
    fn gamma_validation() {
        assert!(validate_gamma(&[0.5, 0.6]).is_err());
        assert!(validate_gamma(&[-0.1, 1.1]).is_err());
        assert!(validate_gamma(&[1.0]).is_err());
    }

    #[test]
    fn straggler_and_delay_draws() {
        let mut r = rng::from_seed(2);
        for k in 0..50 {
            assert!(sample_stragglers(&mut r, 0.0, 5).is_empty());
            assert_eq!(sample_delay(&mut r, 0, k), 0);
        }
        let draws = 100_000;
        let total: usize = (0..draws).map(|_| sample_stragglers(&mut r, 0.3, 5).len()).sum();
        let mean = total as f64 / draws as f64;
        let sd = (5.0 * 0.3 * 0.7 / draws as f64).sqrt();
        assert!((mean - 1.5).abs() < 3.0 * sd, "{mean}");
        for k in 0..200 {
            let d = sample_delay(&mut r, 7, k);
            assert!(d <= 7 && d <= k);
        }
    }

    #[test]
    fn streams_do_not_interfere() {
        let partitions = |extra: usize| {
            let mut sp = rng::substream(3, 0, rng::PARTITION);
            let mut ss = rng::substream(3, 0, rng::STRAGGLERS);
            let gamma = uniform_gamma(0.1, 3);
            (0..100)
                .map(|_| {
                    for _ in 0..extra {
                        sample_stragglers(&mut ss, 0.5, 4);
                    }
                    sample_partition_assignment(&mut sp, &gamma)
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(partitions(0), partitions(3));
    }

    proptest! {
        #[test]
        fn weight_invariants_random_graphs(n in 1usize..=12, seed in 0u64..1000, mu in 0.01f64..0.99) {
            let mut r = rng::from_seed(seed);
            // random spanning tree plus extra edges keeps the graph connected
            let mut edges = Vec::new();
            for i in 1..n {
                edges.push((i, r.random_range(0..i)));
            }
            for i in 0..n {
                for j in i + 1..n {
                    if r.random::<f64>() < 0.3 { edges.push((i, j)); }
                }
            }
            let adj = Adjacency::from_edges(n, &edges).unwrap();
            let wm = build_weight_matrix(&adj, mu).unwrap();
            for i in 0..n {
                prop_assert!((wm.w.row(i).sum() - (1.0 - mu)).abs() < 1e-12);
                prop_assert!((wm.w.column(i).sum() - (1.0 - mu)).abs() < 1e-12);
                for j in 0..n {
                    let v = wm.w[(i, j)];
                    prop_assert!(v >= 0.0);
                    if !adj.has(i, j) { prop_assert_eq!(v, 0.0); }
                    if v > 0.0 { prop_assert!(v >= wm.nu_min); }
                }
            }
        }
    }
}
