//! Laplacian spectra: a cyclic Jacobi eigensolver, closed-form ring and path
//! spectra, algebraic connectivity, and ensemble statistics over random graphs.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::graphs::{Graph, GraphSpec, LaplacianMatrix};
use crate::rng::derive_seed;

/// Off-diagonal Frobenius threshold relative to `‖A‖_F`.
pub const JACOBI_REL_TOL: f64 = 1e-12;
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Sorted eigenvalues, with eigenvectors stored column-wise (row-major `n × n`,
/// column `a` belongs to eigenvalue `a`) when requested.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Option<Vec<f64>>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Eigenvector `alpha` as an owned vector.
    pub fn eigenvector(&self, alpha: usize) -> Option<Vec<f64>> {
        let n = self.len();
        self.eigenvectors
            .as_ref()
            .map(|v| (0..n).map(|i| v[i * n + alpha]).collect())
    }

    /// CSV with header `index,eigenvalue`, 1-based index.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,eigenvalue\n");
        for (j, x) in self.eigenvalues.iter().enumerate() {
            out.push_str(&format!("{},{}\n", j + 1, crate::output::fmt_f64(*x)));
        }
        out
    }
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
pub fn eig_symmetric(l: &LaplacianMatrix, want_vectors: bool) -> Result<Spectrum> {
    let (values, vectors) = jacobi_eigen(l.dim(), l.as_slice().to_vec(), want_vectors)?;
    Ok(Spectrum {
        eigenvalues: values,
        eigenvectors: vectors,
    })
}

/// Cyclic Jacobi on a dense row-major symmetric matrix. Returns ascending
/// eigenvalues and, optionally, the matching eigenvectors column-wise.
pub fn jacobi_eigen(
    n: usize,
    mut a: Vec<f64>,
    want_vectors: bool,
) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    assert_eq!(a.len(), n * n, "matrix must be n x n");
    let mut v = want_vectors.then(|| {
        let mut id = vec![0.0; n * n];
        for i in 0..n {
            id[i * n + i] = 1.0;
        }
        id
    });

    let frob = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let threshold = JACOBI_REL_TOL * frob;
    let off_norm = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                s += 2.0 * a[p * n + q] * a[p * n + q];
            }
        }
        s.sqrt()
    };

    let mut sweep = 0;
    while off_norm(&a) > threshold {
        if sweep == JACOBI_MAX_SWEEPS {
            return Err(Error::EigenNoConvergence {
                sweeps: JACOBI_MAX_SWEEPS,
            });
        }
        sweep += 1;
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                // Negligible relative to both diagonal entries: drop it.
                if sweep > 4
                    && app.abs() + 100.0 * apq.abs() == app.abs()
                    && aqq.abs() + 100.0 * apq.abs() == aqq.abs()
                {
                    a[p * n + q] = 0.0;
                    a[q * n + p] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut a, n, p, q, c, s);
                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                if let Some(v) = v.as_mut() {
                    for k in 0..n {
                        let vkp = v[k * n + p];
                        let vkq = v[k * n + q];
                        v[k * n + p] = c * vkp - s * vkq;
                        v[k * n + q] = s * vkp + c * vkq;
                    }
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[x * n + x].total_cmp(&a[y * n + y]));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let vectors = v.map(|v| {
        let mut sorted = vec![0.0; n * n];
        for (new, &old) in order.iter().enumerate() {
            for k in 0..n {
                sorted[k * n + new] = v[k * n + old];
            }
        }
        sorted
    });
    Ok((values, vectors))
}

/// Apply the similarity `Jᵀ A J` for the plane rotation in `(p, q)` to all
/// entries outside the `(p, q)` block, which the caller sets directly.
#[inline]
fn rotate(a: &mut [f64], n: usize, p: usize, q: usize, c: f64, s: f64) {
    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let akp = a[k * n + p];
        let akq = a[k * n + q];
        let new_p = c * akp - s * akq;
        let new_q = s * akp + c * akq;
        a[k * n + p] = new_p;
        a[p * n + k] = new_p;
        a[k * n + q] = new_q;
        a[q * n + k] = new_q;
    }
}

/// `Λ_j = 2K − Σ_{k=1..K} 2 cos(2πk(j−1)/N)`, sorted ascending.
pub fn ring_spectrum_closed_form(n: usize, k: usize) -> Result<Vec<f64>> {
    if n < 3 || k < 1 || k > (n - 1) / 2 {
        return Err(invalid(format!(
            "ring spectrum needs n >= 3 and 1 <= k <= (n-1)/2, got n={n}, k={k}"
        )));
    }
    let mut out: Vec<f64> = (0..n)
        .map(|j| {
            if j == 0 {
                return 0.0;
            }
            let s: f64 = (1..=k)
                .map(|m| 2.0 * (2.0 * PI * (m * j) as f64 / n as f64).cos())
                .sum();
            2.0 * k as f64 - s
        })
        .collect();
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// `Λ_j = 2 − 2 cos(π(j−1)/N)`, ascending in `j`.
pub fn path_spectrum_closed_form(n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(invalid(format!("path spectrum needs n >= 2, got {n}")));
    }
    Ok((0..n)
        .map(|j| 2.0 - 2.0 * (PI * j as f64 / n as f64).cos())
        .collect())
}

/// Second-smallest eigenvalue.
pub fn algebraic_connectivity(s: &Spectrum) -> Result<f64> {
    if s.len() < 2 {
        return Err(invalid("algebraic connectivity needs at least two nodes"));
    }
    Ok(s.eigenvalues[1])
}

/// `λ₂ ≤ 2|E| / (N − 1)` up to `tol`.
pub fn check_connectivity_bound(g: &Graph, s: &Spectrum, tol: f64) -> Result<bool> {
    let lambda2 = algebraic_connectivity(s)?;
    let bound = 2.0 * g.n_edges() as f64 / (g.n_nodes() - 1) as f64;
    Ok(lambda2 <= bound + tol)
}

/// Per-index running mean and second moment (Welford), mergeable in any grouping.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralStats {
    pub realizations: usize,
    pub mean: Vec<f64>,
    /// Sum of squared deviations from the mean, per index.
    m2: Vec<f64>,
}

impl SpectralStats {
    pub fn new(n: usize) -> Self {
        Self {
            realizations: 0,
            mean: vec![0.0; n],
            m2: vec![0.0; n],
        }
    }

    pub fn push(&mut self, sorted_eigenvalues: &[f64]) {
        assert_eq!(sorted_eigenvalues.len(), self.mean.len());
        self.realizations += 1;
        let count = self.realizations as f64;
        for ((m, m2), &x) in self
            .mean
            .iter_mut()
            .zip(&mut self.m2)
            .zip(sorted_eigenvalues)
        {
            let delta = x - *m;
            *m += delta / count;
            *m2 += delta * (x - *m);
        }
    }

    /// Chan et al. pairwise combination.
    pub fn merge(&mut self, other: &SpectralStats) {
        assert_eq!(self.mean.len(), other.mean.len());
        if other.realizations == 0 {
            return;
        }
        if self.realizations == 0 {
            *self = other.clone();
            return;
        }
        let na = self.realizations as f64;
        let nb = other.realizations as f64;
        let total = na + nb;
        for i in 0..self.mean.len() {
            let delta = other.mean[i] - self.mean[i];
            self.mean[i] += delta * nb / total;
            self.m2[i] += other.m2[i] + delta * delta * na * nb / total;
        }
        self.realizations += other.realizations;
    }

    /// Population variance per index.
    pub fn variance(&self) -> Vec<f64> {
        let n = self.realizations.max(1) as f64;
        self.m2.iter().map(|m2| m2 / n).collect()
    }

    /// CSV with header `index,mean,variance,realizations`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,mean,variance,realizations\n");
        for (j, (m, v)) in self.mean.iter().zip(self.variance()).enumerate() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                j + 1,
                crate::output::fmt_f64(*m),
                crate::output::fmt_f64(v),
                self.realizations
            ));
        }
        out
    }
}

/// Sorted spectra of `realizations` graphs drawn from `spec`, realization `r`
/// seeded with `derive_seed(master_seed, r)`. Returned in realization order.
pub fn ensemble_spectra(
    spec: &GraphSpec,
    realizations: usize,
    master_seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if realizations == 0 {
        return Err(invalid("realizations must be >= 1"));
    }
    (0..realizations)
        .into_par_iter()
        .map(|r| {
            let g = spec
                .with_seed(derive_seed(master_seed, r as u64))
                .generate()?;
            Ok(eig_symmetric(&g.laplacian(), false)?.eigenvalues)
        })
        .collect()
}

/// Per-index mean and variance of the sorted spectrum over an ensemble.
///
/// Spectra are computed in parallel and folded in realization order, so the
/// result does not depend on the thread count.
pub fn ensemble_spectrum_stats(
    spec: &GraphSpec,
    realizations: usize,
    master_seed: u64,
) -> Result<SpectralStats> {
    let spectra = ensemble_spectra(spec, realizations, master_seed)?;
    Ok(stats_from_spectra(&spectra))
}

pub fn stats_from_spectra(spectra: &[Vec<f64>]) -> SpectralStats {
    let n = spectra.first().map_or(0, Vec::len);
    let mut stats = SpectralStats::new(n);
    for s in spectra {
        stats.push(s);
    }
    stats
}
