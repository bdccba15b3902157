//! Finite-difference discretization of the 1-D SKT system with zero-flux boundaries
//! and its identification with the path-graph network model.

use serde::{Deserialize, Serialize};

use crate::dynamics::NetworkState;
use crate::error::{invalid, Error, Result};
use crate::graphs::{gen_path, Graph};
use crate::stability::SktParams;

/// SKT system on `[0, ℓ]` sampled at `n` mesh nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeParams {
    /// Reaction and (unscaled) diffusion coefficients.
    pub skt: SktParams,
    pub ell: f64,
    pub n: usize,
}

impl PdeParams {
    pub fn new(skt: SktParams, ell: f64, n: usize) -> Result<Self> {
        let p = Self { skt, ell, n };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(invalid(format!("mesh needs n >= 2 nodes, got {}", self.n)));
        }
        if !(self.ell > 0.0 && self.ell.is_finite()) {
            return Err(invalid(format!(
                "domain length must be positive, got {}",
                self.ell
            )));
        }
        self.skt.validate()
    }

    /// Mesh size `ℓ/(n−1)`.
    pub fn h(&self) -> f64 {
        self.ell / (self.n - 1) as f64
    }

    /// Diffusion coefficients multiplied by `1/h²`, reaction unchanged.
    pub fn scaled_params(&self) -> SktParams {
        let h = self.h();
        self.skt.scale_diffusion(1.0 / (h * h))
    }
}

/// Network form of the discretized system: scaled coefficients and the path graph.
pub fn discretize_skt_1d(p: &PdeParams) -> Result<(SktParams, Graph)> {
    p.validate()?;
    Ok((p.scaled_params(), gen_path(p.n)?))
}

/// Three-point stencil `(w_{i−1} − 2w_i + w_{i+1})/h²` on the diffusion potentials,
/// with ghost values `w_{−1} = w_0` and `w_n = w_{n−1}`.
pub fn stencil_rhs(state: &NetworkState, p: &PdeParams) -> Result<(Vec<f64>, Vec<f64>)> {
    p.validate()?;
    let n = p.n;
    for len in [state.u.len(), state.v.len()] {
        if len != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: len,
            });
        }
    }
    let s = p.scaled_params();
    let (u, v) = (&state.u, &state.v);
    let wu: Vec<f64> = (0..n)
        .map(|i| s.d1 * u[i] + s.d11 * (u[i] * u[i]) + s.d12 * (v[i] * u[i]))
        .collect();
    let wv: Vec<f64> = (0..n)
        .map(|i| s.d2 * v[i] + s.d22 * (v[i] * v[i]) + s.d21 * (u[i] * v[i]))
        .collect();
    // With a mirrored ghost value the boundary stencil reduces to a one-sided difference.
    let second_difference = |w: &[f64], i: usize| {
        if i == 0 {
            w[1] - w[0]
        } else if i + 1 == n {
            w[n - 2] - w[n - 1]
        } else {
            w[i - 1] - 2.0 * w[i] + w[i + 1]
        }
    };
    let mut du = vec![0.0; n];
    let mut dv = vec![0.0; n];
    for i in 0..n {
        du[i] = s.f(u[i], v[i]) + second_difference(&wu, i);
        dv[i] = s.g(u[i], v[i]) + second_difference(&wv, i);
    }
    Ok((du, dv))
}

/// `(π j / ℓ)²`, `j = 0..count`: Neumann eigenvalues of `−∂ₓₓ` on `[0, ℓ]`.
pub fn continuum_eigenvalues(ell: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|j| {
            let k = std::f64::consts::PI * j as f64 / ell;
            k * k
        })
        .collect()
}
