//! Partitioned least-squares objective `f(x) = ||G x - y||^2`.
//!
//! Rows of `G` are grouped into `p` partitions; each replica of a partition
//! splits the partition's rows into `n_r` contiguous subpartition blocks.
//! No one-half factor is used, so every gradient carries a factor 2.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{rng, Error, Real, Result};

/// Row ranges indexed `[partition][replica][subpartition]`.
pub type Layout = Vec<Vec<Vec<Range<usize>>>>;

#[derive(Debug, Clone)]
pub struct PartitionedProblem<T: Real> {
    pub g: DMatrix<T>,
    pub y: DVector<T>,
    pub x_o: DVector<T>,
    pub layout: Layout,
    lipschitz: Vec<T>,
    lipschitz_global: T,
    /// `(2 G_b^T G_b, 2 G_b^T y_b)` per block, when cheaper than two passes.
    gram: Option<Vec<(DMatrix<T>, DVector<T>)>>,
    gram_full: (DMatrix<T>, DVector<T>),
    block_offsets: Vec<Vec<usize>>,
}

/// Equal-size layout with one replica per partition.
pub fn uniform_layout(p: usize, n_r: usize, m_bar: usize) -> Layout {
    (0..p)
        .map(|i| {
            let base = i * n_r * m_bar;
            vec![(0..n_r)
                .map(|l| base + l * m_bar..base + (l + 1) * m_bar)
                .collect()]
        })
        .collect()
}

/// Standard-normal `G` (M x N, M = p n_r m_bar), `x_o` uniform on [-1, 1],
/// `y = G x_o`.
pub fn generate_least_squares<T: Real>(
    n: usize,
    m_bar: usize,
    p: usize,
    n_r: usize,
    seed: u64,
) -> Result<PartitionedProblem<T>> {
    generate_least_squares_scaled(n, m_bar, p, n_r, seed, 1.0)
}

/// As [`generate_least_squares`] with every entry of `G` multiplied by `scale`.
pub fn generate_least_squares_scaled<T: Real>(
    n: usize,
    m_bar: usize,
    p: usize,
    n_r: usize,
    seed: u64,
    scale: f64,
) -> Result<PartitionedProblem<T>> {
    if n == 0 || m_bar == 0 || p == 0 || n_r == 0 {
        return Err(Error::InvalidArgument(
            "problem dimensions must be positive".into(),
        ));
    }
    let m = p * n_r * m_bar;
    if m < n {
        return Err(Error::InvalidArgument(format!(
            "system must be overdetermined: M = {m} rows < N = {n} unknowns"
        )));
    }
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "measurement scale must be positive, got {scale}"
        )));
    }
    let mut stream = rng::substream(seed, 0, rng::PROBLEM);
    let mut g = DMatrix::<T>::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            let z: f64 = StandardNormal.sample(&mut stream);
            g[(i, j)] = T::lit(z * scale);
        }
    }
    let x_o = DVector::<T>::from_iterator(
        n,
        (0..n).map(|_| T::lit(stream.random_range(-1.0..=1.0))),
    );
    let y = &g * &x_o;
    PartitionedProblem::from_parts(g, y, x_o, uniform_layout(p, n_r, m_bar))
}

fn sym_eig_extremes<T: Real>(m: DMatrix<T>) -> (T, T) {
    let ev = m.symmetric_eigenvalues();
    (ev.min(), ev.max())
}

impl<T: Real> PartitionedProblem<T> {
    pub fn from_parts(g: DMatrix<T>, y: DVector<T>, x_o: DVector<T>, layout: Layout) -> Result<Self> {
        let (m, n) = g.shape();
        if y.len() != m || x_o.len() != n {
            return Err(Error::Shape(format!(
                "G is {m}x{n}, y has {} entries, x_o has {}",
                y.len(),
                x_o.len()
            )));
        }
        if layout.is_empty() {
            return Err(Error::InvalidArgument("layout has no partitions".into()));
        }
        let mut covered = vec![false; m];
        for (i, reps) in layout.iter().enumerate() {
            if reps.is_empty() || reps.iter().any(|r| r.is_empty()) {
                return Err(Error::InvalidArgument(format!(
                    "partition {i} has an empty replica"
                )));
            }
            let rows0 = Self::replica_rows(&reps[0]);
            for (r, blocks) in reps.iter().enumerate() {
                if Self::replica_rows(blocks) != rows0 {
                    return Err(Error::InvalidArgument(format!(
                        "replica {r} of partition {i} does not hold the partition's rows"
                    )));
                }
                for b in blocks {
                    if b.is_empty() || b.end > m {
                        return Err(Error::InvalidArgument(format!(
                            "block {b:?} of partition {i} is out of range"
                        )));
                    }
                }
            }
            for row in rows0 {
                if covered[row] {
                    return Err(Error::InvalidArgument(format!(
                        "row {row} is assigned to more than one partition"
                    )));
                }
                covered[row] = true;
            }
        }
        if covered.iter().any(|c| !c) {
            return Err(Error::InvalidArgument(
                "layout does not cover every row of G".into(),
            ));
        }

        let two = T::lit(2.0);
        let mut block_offsets = Vec::new();
        let mut blocks = Vec::new();
        for reps in &layout {
            let mut offs = Vec::new();
            for b in reps {
                offs.push(blocks.len());
                blocks.extend(b.iter().cloned());
            }
            block_offsets.push(offs);
        }
        let use_gram = blocks.iter().all(|b| 2 * b.len() >= n);
        let gram = use_gram.then(|| {
            blocks
                .iter()
                .map(|b| {
                    let gb = g.rows(b.start, b.len());
                    let yb = y.rows(b.start, b.len());
                    (gb.tr_mul(&gb) * two, gb.tr_mul(&yb) * two)
                })
                .collect()
        });
        let gram_full = (g.tr_mul(&g) * two, g.tr_mul(&y) * two);

        let mut lipschitz = Vec::with_capacity(layout.len());
        for reps in &layout {
            let mut q = DMatrix::<T>::zeros(n, n);
            for b in &reps[0] {
                let gb = g.rows(b.start, b.len());
                q += gb.tr_mul(&gb);
            }
            let (_, max) = sym_eig_extremes(q);
            lipschitz.push(two * max);
        }
        let lipschitz_global = lipschitz.iter().fold(T::zero(), |a, &b| a.max(b));

        Ok(Self {
            g,
            y,
            x_o,
            layout,
            lipschitz,
            lipschitz_global,
            gram,
            gram_full,
            block_offsets,
        })
    }

    fn replica_rows(blocks: &[Range<usize>]) -> Vec<usize> {
        let mut rows: Vec<usize> = blocks.iter().flat_map(|b| b.clone()).collect();
        rows.sort_unstable();
        rows
    }

    pub fn dim(&self) -> usize {
        self.g.ncols()
    }

    pub fn n_rows(&self) -> usize {
        self.g.nrows()
    }

    pub fn n_partitions(&self) -> usize {
        self.layout.len()
    }

    pub fn n_replicas(&self, part: usize) -> usize {
        self.layout[part].len()
    }

    pub fn n_subpartitions(&self, part: usize, replica: usize) -> usize {
        self.layout[part][replica].len()
    }

    fn block(&self, part: usize, replica: usize, sub: usize) -> Result<Range<usize>> {
        self.layout
            .get(part)
            .and_then(|r| r.get(replica))
            .and_then(|b| b.get(sub))
            .cloned()
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "no subpartition ({part}, {replica}, {sub}) in the layout"
                ))
            })
    }

    fn check_point(&self, x: &DVector<T>) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Shape(format!(
                "point has length {}, expected {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    fn rows_gradient(&self, rows: Range<usize>, x: &DVector<T>) -> DVector<T> {
        let gb = self.g.rows(rows.start, rows.len());
        let r = gb * x - self.y.rows(rows.start, rows.len());
        gb.tr_mul(&r) * T::lit(2.0)
    }

    /// `f(x) = ||G x - y||^2`.
    pub fn objective(&self, x: &DVector<T>) -> T {
        (&self.g * x - &self.y).norm_squared()
    }

    /// `2 G_b^T (G_b x - y_b)` for block `(part, replica, sub)`.
    pub fn subpartition_gradient(
        &self,
        part: usize,
        replica: usize,
        sub: usize,
        x: &DVector<T>,
    ) -> Result<DVector<T>> {
        let b = self.block(part, replica, sub)?;
        self.check_point(x)?;
        Ok(self.rows_gradient(b, x))
    }

    /// Same value as [`Self::subpartition_gradient`], written into `out`
    /// through whichever of the Gram or two-pass forms is cheaper. Indices are
    /// not checked.
    pub fn subpartition_gradient_into(
        &self,
        part: usize,
        replica: usize,
        sub: usize,
        x: &DVector<T>,
        out: &mut DVector<T>,
    ) {
        let idx = self.block_offsets[part][replica] + sub;
        match &self.gram {
            Some(gram) => {
                let (q, c) = &gram[idx];
                out.copy_from(c);
                out.gemv(T::one(), q, x, -T::one());
            }
            None => {
                let b = self.layout[part][replica][sub].clone();
                out.copy_from(&self.rows_gradient(b, x));
            }
        }
    }

    /// Gradient of partition `part`: `2 G_i^T (G_i x - y_i)`.
    pub fn partition_gradient(&self, part: usize, x: &DVector<T>) -> Result<DVector<T>> {
        self.check_point(x)?;
        let reps = self.layout.get(part).ok_or_else(|| {
            Error::InvalidArgument(format!("partition {part} out of range"))
        })?;
        let mut out = DVector::zeros(self.dim());
        for b in &reps[0] {
            out += self.rows_gradient(b.clone(), x);
        }
        Ok(out)
    }

    /// `2 G^T (G x - y)`.
    pub fn full_gradient(&self, x: &DVector<T>) -> DVector<T> {
        let r = &self.g * x - &self.y;
        self.g.tr_mul(&r) * T::lit(2.0)
    }

    /// Full gradient from the precomputed normal-equation form.
    pub fn full_gradient_into(&self, x: &DVector<T>, out: &mut DVector<T>) {
        let (q, c) = &self.gram_full;
        out.copy_from(c);
        out.gemv(T::one(), q, x, -T::one());
    }

    /// Coded gradient of worker `w`: `sum_l B[w, l] grad f_l(x)`.
    pub fn coded_worker_gradient(
        &self,
        scheme: &crate::codec::CodingScheme<T>,
        part: usize,
        replica: usize,
        w: usize,
        x: &DVector<T>,
    ) -> Result<DVector<T>> {
        let n_sub = self.layout.get(part).and_then(|r| r.get(replica)).map(|b| b.len());
        if n_sub != Some(scheme.n_workers) || w >= scheme.n_workers {
            return Err(Error::InvalidArgument(format!(
                "worker {w} of partition {part} replica {replica} does not match the scheme"
            )));
        }
        let mut out = DVector::zeros(self.dim());
        for l in scheme.encoder_support(w) {
            let coef = scheme.b[(w, l)];
            if coef != T::zero() {
                out.axpy(coef, &self.subpartition_gradient(part, replica, l, x)?, T::one());
            }
        }
        Ok(out)
    }

    /// Minimizer of `f` from the normal equations.
    pub fn optimum(&self) -> Result<DVector<T>> {
        let (q, c) = &self.gram_full;
        let (min, max) = sym_eig_extremes(q.clone());
        let ratio = if max > T::zero() { min / max } else { T::zero() };
        if ratio <= T::default_epsilon() * T::lit(1e3) {
            return Err(Error::RankDeficient {
                ratio: ratio.as_f64(),
            });
        }
        q.clone()
            .cholesky()
            .map(|ch| ch.solve(c))
            .ok_or(Error::RankDeficient {
                ratio: ratio.as_f64(),
            })
    }

    /// Per-partition `L_i = 2 sigma_max(G_i)^2` and their maximum.
    pub fn lipschitz(&self) -> (&[T], T) {
        (&self.lipschitz, self.lipschitz_global)
    }

    /// Minimizer of subpartition block `(part, replica, sub)` closest to `anchor`.
    pub fn subpartition_minimizer(
        &self,
        part: usize,
        replica: usize,
        sub: usize,
        anchor: &DVector<T>,
    ) -> Result<DVector<T>> {
        let b = self.block(part, replica, sub)?;
        self.check_point(anchor)?;
        let gb = self.g.rows(b.start, b.len()).into_owned();
        let yb = self.y.rows(b.start, b.len()).into_owned();
        closest_minimizer(gb, &yb, anchor).ok_or_else(|| {
            Error::Precondition(format!(
                "subpartition block ({part}, {replica}, {sub}) is rank deficient"
            ))
        })
    }

    /// Minimizer of `f_i` (replica 0 rows) closest to `anchor`.
    pub fn partition_minimizer(&self, part: usize, anchor: &DVector<T>) -> Result<DVector<T>> {
        self.check_point(anchor)?;
        let blocks = self
            .layout
            .get(part)
            .and_then(|r| r.first())
            .ok_or_else(|| Error::InvalidArgument(format!("no partition {part} in the layout")))?;
        let rows: Vec<usize> = blocks.iter().flat_map(|b| b.clone()).collect();
        let gb = self.g.select_rows(&rows);
        let yb = self.y.select_rows(&rows);
        closest_minimizer(gb, &yb, anchor).ok_or_else(|| {
            Error::Precondition(format!("partition {part} is rank deficient"))
        })
    }

    /// `max_i ||x* - xbar^(i)||` over partition minimizers closest to `x_star`.
    pub fn partition_minimizer_gap(&self, x_star: &DVector<T>) -> Result<T> {
        let mut gap = T::zero();
        for i in 0..self.n_partitions() {
            gap = gap.max((x_star - self.partition_minimizer(i, x_star)?).norm());
        }
        Ok(gap)
    }

    /// `max ||x* - x^{l,r}||` over all subpartition blocks, each minimizer
    /// taken closest to `x_star`.
    pub fn subpartition_minimizer_gap(&self, x_star: &DVector<T>) -> Result<T> {
        let mut gap = T::zero();
        for (i, reps) in self.layout.iter().enumerate() {
            for (r, blocks) in reps.iter().enumerate() {
                for l in 0..blocks.len() {
                    let xl = self.subpartition_minimizer(i, r, l, x_star)?;
                    gap = gap.max((x_star - xl).norm());
                }
            }
        }
        Ok(gap)
    }
}

/// Least-squares minimizer of `||G x - y||` closest to `anchor`: a thin QR
/// for tall blocks, the minimum-norm step for wide ones.
fn closest_minimizer<T: Real>(g: DMatrix<T>, y: &DVector<T>, anchor: &DVector<T>) -> Option<DVector<T>> {
    let r = &g * anchor - y;
    let step = if g.nrows() >= g.ncols() {
        let qr = g.qr();
        qr.r().solve_upper_triangular(&qr.q().tr_mul(&r))
    } else {
        (&g * g.transpose())
            .cholesky()
            .map(|ch| g.tr_mul(&ch.solve(&r)))
    };
    step.map(|st| anchor - st)
}
