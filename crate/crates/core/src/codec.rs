//! Gradient-coding encoder/decoder pairs.
//!
//! Workers and subpartitions are indexed from 0. Worker `w` of a replica holds
//! subpartitions `w, w+1, .., w+s (mod n)` and sends the combination given by
//! row `w` of `B`. Row `t` of `A` decodes from the surviving set `I_t`, the
//! `t`-th `(n-s)`-subset of `0..n` in lexicographic order.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::{rng, Error, Real, Result};

/// Rejection threshold for the per-row condition estimate.
pub const MAX_CONDITION: f64 = 1e8;
/// Number of fresh draws of `H` allowed after the first.
pub const MAX_RETRIES: usize = 16;

#[derive(Debug, Clone)]
pub struct CodingScheme<T: Real> {
    pub n_workers: usize,
    pub s: usize,
    pub b: DMatrix<T>,
    pub a: DMatrix<T>,
    /// Support of each row of `A`, sorted.
    pub row_supports: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FitSelection {
    pub fit_index: usize,
    pub fit_support: Vec<usize>,
    pub usable_workers: Vec<usize>,
}

/// Columns of row `w` of a cyclic encoder, leading entry first.
pub fn cyclic_support(n: usize, s: usize, w: usize) -> Vec<usize> {
    (0..=s).map(|t| (w + t) % n).collect()
}

fn condition_estimate<T: Real>(m: &DMatrix<T>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.max().as_f64();
    let min = sv.min().as_f64();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Cyclic encoder with `s+1` nonzeros per row, drawn from `rng_seed`.
///
/// An auxiliary `H` (s x n, standard normal, last column the negated row sum)
/// is drawn; row `i` is `1` at column `i` and the remaining `s` coefficients
/// solve `-H[:, j(1..)] c = H[:, j(0)]`. A draw whose worst per-row system has
/// condition estimate above [`MAX_CONDITION`] is replaced by the next `H` in
/// the stream.
pub fn build_cyclic_encoder<T: Real>(n: usize, s: usize, rng_seed: u64) -> Result<DMatrix<T>> {
    if n == 0 {
        return Err(Error::InvalidArgument("n_workers must be positive".into()));
    }
    if s >= n {
        return Err(Error::InvalidArgument(format!(
            "straggler budget s={s} must be below n_workers={n}"
        )));
    }
    if s == 0 {
        return Ok(DMatrix::identity(n, n));
    }
    let mut stream = rng::from_seed(rng_seed);
    let mut worst = 0.0f64;
    'draw: for _ in 0..=MAX_RETRIES {
        let mut h = DMatrix::<T>::zeros(s, n);
        for c in 0..n - 1 {
            for r in 0..s {
                let z: f64 = StandardNormal.sample(&mut stream);
                h[(r, c)] = T::lit(z);
            }
        }
        for r in 0..s {
            let mut acc = T::zero();
            for c in 0..n - 1 {
                acc += h[(r, c)];
            }
            h[(r, n - 1)] = -acc;
        }

        let mut b = DMatrix::<T>::zeros(n, n);
        for i in 0..n {
            let j = cyclic_support(n, s, i);
            let mut m = DMatrix::<T>::zeros(s, s);
            for (col, &jc) in j[1..].iter().enumerate() {
                for r in 0..s {
                    m[(r, col)] = -h[(r, jc)];
                }
            }
            let rhs = DVector::<T>::from_fn(s, |r, _| h[(r, j[0])]);
            let cond = condition_estimate(&m);
            if !(cond <= MAX_CONDITION) {
                worst = worst.max(cond);
                continue 'draw;
            }
            let Some(coef) = m.lu().solve(&rhs) else {
                worst = f64::INFINITY;
                continue 'draw;
            };
            b[(i, j[0])] = T::one();
            for (t, &jc) in j[1..].iter().enumerate() {
                b[(i, jc)] = coef[t];
            }
        }
        return Ok(b);
    }
    Err(Error::IllConditionedEncoder {
        retries: MAX_RETRIES,
        condition: worst,
    })
}

/// Lexicographic `k`-subsets of `0..n`.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < n - k + i {
                cur[i] += 1;
                for t in i + 1..k {
                    cur[t] = cur[t - 1] + 1;
                }
                break;
            }
        }
    }
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Decoder for `B`: one row per surviving set `I` with `|I| = n - s`, where
/// `a(I)` solves `a(I) B(I,:) = 1` in the least-squares sense. A submatrix
/// whose condition estimate exceeds [`MAX_CONDITION`] counts as singular.
pub fn build_decoder<T: Real>(b: &DMatrix<T>, s: usize) -> Result<(DMatrix<T>, Vec<Vec<usize>>)> {
    let n = b.nrows();
    if b.ncols() != n {
        return Err(Error::Shape(format!(
            "encoder must be square, got {}x{}",
            n,
            b.ncols()
        )));
    }
    if s >= n {
        return Err(Error::InvalidArgument(format!(
            "straggler budget s={s} must be below n_workers={n}"
        )));
    }
    let sets = subsets(n, n - s);
    let mut a = DMatrix::<T>::zeros(sets.len(), n);
    let ones = DVector::<T>::from_element(n, T::one());
    let rank_tol = T::lit(1.0 / MAX_CONDITION);
    for (row, set) in sets.iter().enumerate() {
        // x * B(I,:) = 1  <=>  B(I,:)^T x^T = 1, solved through a thin QR
        let bt = b.select_rows(set.iter()).transpose();
        let sv = bt.clone().svd(false, false).singular_values;
        let smax = sv.max();
        let smin = sv.min();
        if smax == T::zero() || smin <= rank_tol * smax {
            return Err(Error::SingularSubmatrix {
                subset: set.clone(),
            });
        }
        let qr = bt.qr();
        let rhs = qr.q().tr_mul(&ones);
        let x = qr
            .r()
            .solve_upper_triangular(&rhs)
            .ok_or_else(|| Error::SingularSubmatrix {
                subset: set.clone(),
            })?;
        for (t, &w) in set.iter().enumerate() {
            a[(row, w)] = x[t];
        }
    }
    Ok((a, sets))
}

/// Whether `max |(A B)_ij - 1| <= tol`, together with that deviation.
pub fn verify_scheme<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>, tol: T) -> Result<(bool, T)> {
    if a.ncols() != b.nrows() {
        return Err(Error::Shape(format!(
            "A is {}x{} but B is {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let ab = a * b;
    let dev = ab
        .iter()
        .fold(T::zero(), |m, &v| m.max((v - T::one()).abs()));
    Ok((dev <= tol, dev))
}

/// Decoder row whose support meets `connected` the most; lowest index on ties.
pub fn select_fit_row(supports: &[Vec<usize>], connected: &[usize]) -> FitSelection {
    let mut best = 0;
    let mut best_count = 0;
    for (t, sup) in supports.iter().enumerate() {
        let count = sup.iter().filter(|w| connected.contains(w)).count();
        if count > best_count {
            best = t;
            best_count = count;
        }
    }
    let fit_support = supports.get(best).cloned().unwrap_or_default();
    let usable_workers = fit_support
        .iter()
        .copied()
        .filter(|w| connected.contains(w))
        .collect();
    FitSelection {
        fit_index: best,
        fit_support,
        usable_workers,
    }
}

/// `sum_{w in usable} A[fit, w] * coded[w]`. Entries of `coded` for workers
/// outside `fit.usable_workers` are ignored; usable workers absent from
/// `coded` contribute zero.
pub fn decode_partition_gradient<'a, T, I>(
    scheme: &CodingScheme<T>,
    fit: &FitSelection,
    coded: I,
    dim: usize,
) -> Result<DVector<T>>
where
    T: Real,
    I: IntoIterator<Item = (usize, &'a DVector<T>)>,
{
    let mut out = DVector::<T>::zeros(dim);
    for (w, g) in coded {
        if g.len() != dim {
            return Err(Error::Shape(format!(
                "coded gradient of worker {w} has length {}, expected {dim}",
                g.len()
            )));
        }
        if fit.usable_workers.contains(&w) {
            out.axpy(scheme.a[(fit.fit_index, w)], g, T::one());
        }
    }
    Ok(out)
}

impl<T: Real> CodingScheme<T> {
    /// Cyclic scheme seeded by `seed`. A singular decoder submatrix triggers a
    /// fresh encoder draw from a derived seed.
    pub fn cyclic(n_workers: usize, s: usize, seed: u64) -> Result<Self> {
        let mut last = None;
        for attempt in 0..=MAX_RETRIES as u64 {
            let enc_seed = if attempt == 0 {
                seed
            } else {
                rng::derive_seed(seed, attempt, rng::ENCODER)
            };
            let b = build_cyclic_encoder::<T>(n_workers, s, enc_seed)?;
            match build_decoder(&b, s) {
                Ok((a, row_supports)) => {
                    return Ok(Self {
                        n_workers,
                        s,
                        b,
                        a,
                        row_supports,
                    })
                }
                Err(e @ Error::SingularSubmatrix { .. }) => last = Some(e),
                Err(e) => return Err(e),
            }
        }
        Err(last.unwrap())
    }

    pub fn from_parts(b: DMatrix<T>, s: usize) -> Result<Self> {
        let (a, row_supports) = build_decoder(&b, s)?;
        Ok(Self {
            n_workers: b.nrows(),
            s,
            b,
            a,
            row_supports,
        })
    }

    /// Columns where row `w` of `B` is nonzero, leading entry first.
    pub fn encoder_support(&self, w: usize) -> Vec<usize> {
        cyclic_support(self.n_workers, self.s, w)
    }

    /// `||A||_inf`: maximum absolute row sum.
    pub fn a_inf_norm(&self) -> T {
        self.a
            .row_iter()
            .map(|r| r.iter().fold(T::zero(), |acc, v| acc + v.abs()))
            .fold(T::zero(), |m, v| m.max(v))
    }

    /// `||B||_{2,inf}`: maximum row l2 norm.
    pub fn b_2inf_norm(&self) -> T {
        self.b
            .row_iter()
            .map(|r| r.norm())
            .fold(T::zero(), |m, v| m.max(v))
    }

    pub fn select_fit(&self, connected: &[usize]) -> FitSelection {
        select_fit_row(&self.row_supports, connected)
    }
}
