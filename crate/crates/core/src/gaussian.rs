//! Exact joint sampling of centred Gaussian vectors through a Cholesky
//! factor of their covariance matrix.
//!
//! The factorization is blocked (right-looking, with `matrixmultiply` doing
//! the trailing updates) and retried with a growing diagonal jitter when the
//! matrix is numerically singular. Sampling draws each replication from its
//! own ChaCha stream, so results do not depend on batching or thread count.

use matrixmultiply::dgemm;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// First relative jitter (times the mean diagonal) tried after a plain
/// factorization fails.
pub const JITTER_START: f64 = 1e-12;
/// Largest relative jitter before the factorization is abandoned.
pub const JITTER_MAX: f64 = 1e-6;

const BLOCK: usize = 96;
/// Replications generated together by one worker.
pub const BATCH: usize = 64;

/// Dense symmetric matrix, row-major, both triangles stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymmetricMatrix {
    /// Fills the matrix from `f(i, j)`, evaluated for `j ≤ i` only.
    pub fn try_from_fn<F>(n: usize, f: F) -> Result<Self>
    where
        F: Fn(usize, usize) -> Result<f64> + Sync,
    {
        let mut data = vec![0.0; n * n];
        if n > 0 {
            data.par_chunks_mut(n)
                .enumerate()
                .try_for_each(|(i, row)| -> Result<()> {
                    for (j, v) in row.iter_mut().enumerate().take(i + 1) {
                        *v = f(i, j)?;
                    }
                    Ok(())
                })?;
        }
        for i in 0..n {
            for j in 0..i {
                data[j * n + i] = data[i * n + j];
            }
        }
        Ok(SymmetricMatrix { n, data })
    }

    pub fn from_fn<F>(n: usize, f: F) -> Self
    where
        F: Fn(usize, usize) -> f64 + Sync,
    {
        Self::try_from_fn(n, |i, j| Ok(f(i, j))).expect("infallible")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    fn submatrix(&self, keep: &[usize]) -> SymmetricMatrix {
        SymmetricMatrix::from_fn(keep.len(), |i, j| self.get(keep[i], keep[j]))
    }
}

/// Lower-triangular `L` with `L Lᵀ = A + ε·mean(diag A)·I`.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    n: usize,
    l: Vec<f64>,
    jitter: f64,
}

impl CholeskyFactor {
    /// Factorizes `a`, first as is, then with relative jitter
    /// `ε = 1e-12, 2e-12, 4e-12, …` up to [`JITTER_MAX`].
    pub fn factorize(a: SymmetricMatrix) -> Result<Self> {
        let n = a.n;
        let diag = a.diagonal();
        let mut l = a.data;
        if n == 0 {
            return Ok(CholeskyFactor { n, l, jitter: 0.0 });
        }
        let mean = diag.iter().sum::<f64>() / n as f64;
        let fail = Error::FactorizationFailed {
            n,
            max_jitter: JITTER_MAX,
        };
        if !(mean.is_finite() && mean > 0.0) || l.iter().any(|v| !v.is_finite()) {
            return Err(fail);
        }
        let mut eps = 0.0;
        loop {
            for (i, d) in diag.iter().enumerate() {
                l[i * n + i] = d + eps * mean;
            }
            if blocked_cholesky(&mut l, n) {
                for i in 0..n {
                    l[i * n + i + 1..(i + 1) * n].fill(0.0);
                }
                return Ok(CholeskyFactor { n, l, jitter: eps });
            }
            eps = if eps == 0.0 { JITTER_START } else { 2.0 * eps };
            if eps > JITTER_MAX {
                return Err(fail);
            }
            // the strict upper triangle still holds the original matrix
            for i in 0..n {
                for j in 0..i {
                    l[i * n + j] = l[j * n + i];
                }
            }
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Relative jitter that was needed (0 when the plain factorization
    /// succeeded).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.l[i * self.n + j]
    }

    /// `out = z Lᵀ` for a row-major batch `z` with `n` columns, i.e. every
    /// row of `out` is `L` applied to the matching row of `z`.
    pub fn correlate(&self, z: &[f64], out: &mut [f64]) {
        let n = self.n;
        if n == 0 {
            return;
        }
        assert_eq!(z.len() % n, 0, "batch is not a whole number of rows");
        assert_eq!(z.len(), out.len(), "batch and output sizes differ");
        let rows = z.len() / n;
        // only columns 0..j0+jb of L's rows j0..j0+jb are nonzero
        for j0 in (0..n).step_by(BLOCK) {
            let jb = BLOCK.min(n - j0);
            // SAFETY: all strided views stay inside `z`, `self.l` and `out`
            // (rows·n elements for z/out, n·n for l) and `out` is not aliased.
            unsafe {
                dgemm(
                    rows,
                    j0 + jb,
                    jb,
                    1.0,
                    z.as_ptr(),
                    n as isize,
                    1,
                    self.l.as_ptr().add(j0 * n),
                    1,
                    n as isize,
                    0.0,
                    out.as_mut_ptr().add(j0),
                    n as isize,
                    1,
                );
            }
        }
    }
}

/// In-place lower Cholesky of the row-major `a`; only the lower triangle is
/// read or written. Returns false on a non-positive pivot.
fn blocked_cholesky(a: &mut [f64], n: usize) -> bool {
    for k0 in (0..n).step_by(BLOCK) {
        let kb = BLOCK.min(n - k0);
        if !diagonal_block(a, n, k0, kb) {
            return false;
        }
        let r0 = k0 + kb;
        if r0 == n {
            break;
        }
        let (head, tail) = a.split_at_mut(r0 * n);
        let head = &*head;
        // panel: solve X · L_kkᵀ = A for rows below the diagonal block
        tail.par_chunks_mut(n).for_each(|row| {
            for j in 0..kb {
                let lj = &head[(k0 + j) * n + k0..(k0 + j) * n + k0 + j + 1];
                let mut s = row[k0 + j];
                for m in 0..j {
                    s -= row[k0 + m] * lj[m];
                }
                row[k0 + j] = s / lj[j];
            }
        });
        let m = n - r0;
        let mut panel = vec![0.0; m * kb];
        for i in 0..m {
            panel[i * kb..(i + 1) * kb].copy_from_slice(&tail[i * n + k0..i * n + k0 + kb]);
        }
        let panel = &panel;
        // trailing update of the lower triangle, one block row per task
        tail.par_chunks_mut(BLOCK * n)
            .enumerate()
            .for_each(|(bi, rows)| {
                let i0 = bi * BLOCK;
                let ib = rows.len() / n;
                let p_i = &panel[i0 * kb..(i0 + ib) * kb];
                if i0 > 0 {
                    // SAFETY: the ib×i0 target block starts at column r0 of
                    // `rows` and ends before column r0 + i0 ≤ n; operands are
                    // slices of `panel` of the stated extents.
                    unsafe {
                        dgemm(
                            ib,
                            kb,
                            i0,
                            -1.0,
                            p_i.as_ptr(),
                            kb as isize,
                            1,
                            panel.as_ptr(),
                            1,
                            kb as isize,
                            1.0,
                            rows.as_mut_ptr().add(r0),
                            n as isize,
                            1,
                        );
                    }
                }
                let mut scratch = vec![0.0; ib * ib];
                // SAFETY: as above, with an ib×ib scratch target.
                unsafe {
                    dgemm(
                        ib,
                        kb,
                        ib,
                        1.0,
                        p_i.as_ptr(),
                        kb as isize,
                        1,
                        p_i.as_ptr(),
                        1,
                        kb as isize,
                        0.0,
                        scratch.as_mut_ptr(),
                        ib as isize,
                        1,
                    );
                }
                for r in 0..ib {
                    let row = &mut rows[r * n + r0 + i0..r * n + r0 + i0 + r + 1];
                    for (v, s) in row.iter_mut().zip(&scratch[r * ib..r * ib + r + 1]) {
                        *v -= s;
                    }
                }
            });
    }
    true
}

fn diagonal_block(a: &mut [f64], n: usize, k0: usize, kb: usize) -> bool {
    for j in 0..kb {
        let jj = k0 + j;
        let mut d = a[jj * n + jj];
        for m in 0..j {
            d -= a[jj * n + k0 + m].powi(2);
        }
        if !(d > 0.0 && d.is_finite()) {
            return false;
        }
        let d = d.sqrt();
        a[jj * n + jj] = d;
        for i in j + 1..kb {
            let ii = k0 + i;
            let mut s = a[ii * n + jj];
            for m in 0..j {
                s -= a[ii * n + k0 + m] * a[jj * n + k0 + m];
            }
            a[ii * n + jj] = s / d;
        }
    }
    true
}

/// Sampler for a centred Gaussian vector with a given covariance matrix.
///
/// Coordinates with exactly zero variance are pinned to zero and left out of
/// the factorization. Replication `r` under seed `s` always draws its
/// normals from ChaCha8 stream `r` keyed by `s`.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    dim: usize,
    active: Option<Vec<usize>>,
    factor: CholeskyFactor,
}

impl GaussianSampler {
    pub fn new(cov: SymmetricMatrix) -> Result<Self> {
        let dim = cov.n;
        let diag = cov.diagonal();
        if let Some(bad) = diag.iter().position(|d| d.is_nan() || *d < 0.0) {
            return Err(Error::DegenerateField(format!(
                "covariance diagonal entry {bad} is {}",
                diag[bad]
            )));
        }
        let keep: Vec<usize> = (0..dim).filter(|&i| diag[i] > 0.0).collect();
        let (active, cov) = if keep.len() == dim {
            (None, cov)
        } else {
            let sub = cov.submatrix(&keep);
            (Some(keep), sub)
        };
        Ok(GaussianSampler {
            dim,
            active,
            factor: CholeskyFactor::factorize(cov)?,
        })
    }

    /// Length of each sampled vector.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn factor(&self) -> &CholeskyFactor {
        &self.factor
    }

    /// Replications `first..first + count` as a row-major `count × dim`
    /// block.
    pub fn sample_batch(&self, seed: u64, first: u64, count: usize) -> Vec<f64> {
        let na = self.factor.n;
        let mut z = vec![0.0; count * na];
        if na > 0 {
            for (r, row) in z.chunks_mut(na).enumerate() {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(first + r as u64);
                for v in row.iter_mut() {
                    *v = StandardNormal.sample(&mut rng);
                }
            }
        }
        let mut x = vec![0.0; count * na];
        self.factor.correlate(&z, &mut x);
        match &self.active {
            None => x,
            Some(keep) => {
                let mut out = vec![0.0; count * self.dim];
                for r in 0..count {
                    for (k, &i) in keep.iter().enumerate() {
                        out[r * self.dim + i] = x[r * na + k];
                    }
                }
                out
            }
        }
    }

    /// One replication.
    pub fn sample(&self, seed: u64, rep: u64) -> Vec<f64> {
        self.sample_batch(seed, rep, 1)
    }

    /// Applies `f` to replications `0..reps` and returns the results in
    /// replication order. Work is split in fixed batches of [`BATCH`].
    pub fn map_reps<T, F>(&self, reps: usize, seed: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&[f64]) -> T + Sync,
    {
        let batches = reps.div_ceil(BATCH);
        let parts: Vec<Vec<T>> = (0..batches)
            .into_par_iter()
            .map(|b| {
                let first = b * BATCH;
                let count = BATCH.min(reps - first);
                let block = self.sample_batch(seed, first as u64, count);
                if self.dim == 0 {
                    (0..count).map(|_| f(&[])).collect()
                } else {
                    block.chunks(self.dim).map(&f).collect()
                }
            })
            .collect();
        parts.into_iter().flatten().collect()
    }
}
