//! Nonlinear network dynamics: right-hand sides of the SKT and general
//! cross-diffusion models, time integration, and pattern diagnostics.

mod integrator;

pub use integrator::{integrate, integrate_observed, IntegratorConfig, SimulationResult};

use rand::Rng as _;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::graphs::LaplacianMatrix;
use crate::rng;
use crate::spectra::Spectrum;
use crate::stability::{GeneralModel, SktParams};

/// Node states `(u_i, v_i)` at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkState {
    pub t: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl NetworkState {
    pub fn new(t: f64, u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if u.len() != v.len() {
            return Err(Error::DimensionMismatch {
                expected: u.len(),
                found: v.len(),
            });
        }
        if u.iter().chain(&v).any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteState { t });
        }
        Ok(Self { t, u, v })
    }

    pub fn homogeneous(n: usize, u: f64, v: f64) -> Self {
        Self {
            t: 0.0,
            u: vec![u; n],
            v: vec![v; n],
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.u.len()
    }

    pub fn min_entry(&self) -> f64 {
        self.u
            .iter()
            .chain(&self.v)
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// A two-species system on `n_nodes()` nodes.
pub trait NetworkModel: Sync {
    fn n_nodes(&self) -> usize;

    /// Write `(u̇, v̇)` for the state `(u, v)`.
    fn rhs(&self, u: &[f64], v: &[f64], du: &mut [f64], dv: &mut [f64]);
}

/// SKT competition model on a graph.
#[derive(Debug, Clone)]
pub struct SktNetwork {
    pub params: SktParams,
    pub laplacian: LaplacianMatrix,
}

impl SktNetwork {
    pub fn new(params: SktParams, laplacian: LaplacianMatrix) -> Result<Self> {
        params.validate()?;
        Ok(Self { params, laplacian })
    }
}

impl NetworkModel for SktNetwork {
    fn n_nodes(&self) -> usize {
        self.laplacian.dim()
    }

    fn rhs(&self, u: &[f64], v: &[f64], du: &mut [f64], dv: &mut [f64]) {
        let p = &self.params;
        // Diffusion potentials: L is applied once to each.
        let wu: Vec<f64> = u
            .iter()
            .zip(v)
            .map(|(&u, &v)| p.d1 * u + p.d11 * (u * u) + p.d12 * (v * u))
            .collect();
        let wv: Vec<f64> = u
            .iter()
            .zip(v)
            .map(|(&u, &v)| p.d2 * v + p.d22 * (v * v) + p.d21 * (u * v))
            .collect();
        for i in 0..u.len() {
            du[i] = p.f(u[i], v[i]) - self.laplacian.apply_row(i, &wu);
            dv[i] = p.g(u[i], v[i]) - self.laplacian.apply_row(i, &wv);
        }
    }
}

/// General cross-diffusion model on a graph.
#[derive(Debug, Clone)]
pub struct GeneralNetwork {
    pub model: GeneralModel,
    pub laplacian: LaplacianMatrix,
}

impl GeneralNetwork {
    pub fn new(model: GeneralModel, laplacian: LaplacianMatrix) -> Result<Self> {
        model.validate()?;
        Ok(Self { model, laplacian })
    }
}

impl NetworkModel for GeneralNetwork {
    fn n_nodes(&self) -> usize {
        self.laplacian.dim()
    }

    fn rhs(&self, phi: &[f64], psi: &[f64], dphi: &mut [f64], dpsi: &mut [f64]) {
        let m = &self.model;
        let wu: Vec<f64> = phi
            .iter()
            .zip(psi)
            .map(|(&x, &y)| m.d1 * x + m.d11 * (m.s1.eval(x) * x) + m.d12 * (m.c1.eval(y) * x))
            .collect();
        let wv: Vec<f64> = phi
            .iter()
            .zip(psi)
            .map(|(&x, &y)| m.d2 * y + m.d22 * (m.s2.eval(y) * y) + m.d21 * (m.c2.eval(x) * y))
            .collect();
        for i in 0..phi.len() {
            dphi[i] = (m.f)(phi[i], psi[i]) - self.laplacian.apply_row(i, &wu);
            dpsi[i] = (m.g)(phi[i], psi[i]) - self.laplacian.apply_row(i, &wv);
        }
    }
}

fn check_dims(state: &NetworkState, n: usize) -> Result<()> {
    for len in [state.u.len(), state.v.len()] {
        if len != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: len,
            });
        }
    }
    Ok(())
}

/// Evaluate a model's right-hand side at `state`.
pub fn eval_rhs(model: &impl NetworkModel, state: &NetworkState) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = model.n_nodes();
    check_dims(state, n)?;
    let mut du = vec![0.0; n];
    let mut dv = vec![0.0; n];
    model.rhs(&state.u, &state.v, &mut du, &mut dv);
    Ok((du, dv))
}

/// SKT network right-hand side:
/// `u̇_i = f(u_i, v_i) − d1 (L u)_i − D11 (L u²)_i − D12 (L uv)_i`, symmetrically for `v`.
pub fn rhs_skt(
    state: &NetworkState,
    p: &SktParams,
    l: &LaplacianMatrix,
) -> Result<(Vec<f64>, Vec<f64>)> {
    eval_rhs(&SktNetwork::new(*p, l.clone())?, state)
}

pub fn rhs_general(
    state: &NetworkState,
    m: &GeneralModel,
    l: &LaplacianMatrix,
) -> Result<(Vec<f64>, Vec<f64>)> {
    eval_rhs(&GeneralNetwork::new(m.clone(), l.clone())?, state)
}

pub fn rhs_inf_norm(du: &[f64], dv: &[f64]) -> f64 {
    du.iter().chain(dv).fold(0.0, |m, x| m.max(x.abs()))
}

/// Default relative perturbation amplitude.
pub const DEFAULT_PERTURBATION: f64 = 1e-2;

/// `u_i = u*(1 + ε_i)`, `v_i = v*(1 + η_i)` with `ε, η` i.i.d. uniform on
/// `[−magnitude, magnitude]`; all `ε` are drawn before the `η`.
pub fn perturb_homogeneous(
    u_star: f64,
    v_star: f64,
    n: usize,
    magnitude: f64,
    seed: u64,
) -> Result<NetworkState> {
    if !(0.0..1.0).contains(&magnitude) {
        return Err(invalid(format!(
            "relative perturbation magnitude must lie in [0, 1), got {magnitude}"
        )));
    }
    if magnitude == 0.0 {
        return Ok(NetworkState::homogeneous(n, u_star, v_star));
    }
    let mut rng = rng::rng_from_seed(seed);
    let u = (0..n)
        .map(|_| u_star * (1.0 + rng.random_range(-magnitude..=magnitude)))
        .collect();
    let v = (0..n)
        .map(|_| v_star * (1.0 + rng.random_range(-magnitude..=magnitude)))
        .collect();
    Ok(NetworkState { t: 0.0, u, v })
}

/// Numerical slack below zero tolerated by the positivity check, in units of `abs_tol`.
pub const POSITIVITY_SLACK: f64 = 10.0;

/// True iff every sampled entry is at least `−10·abs_tol`.
pub fn check_positivity(trajectory: &[NetworkState], abs_tol: f64) -> bool {
    let floor = -POSITIVITY_SLACK * abs_tol;
    trajectory.iter().all(|s| s.min_entry() >= floor)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PatternMetrics {
    /// `max_i |u_i − ū| + max_i |v_i − v̄|`.
    pub heterogeneity: f64,
    pub total_u: f64,
    pub total_v: f64,
    /// Percent change of `Σ u_i` relative to `N u*`.
    pub pct_change_u: f64,
    pub pct_change_v: f64,
}

pub fn pattern_metrics(state: &NetworkState, u_star: f64, v_star: f64) -> PatternMetrics {
    let n = state.n_nodes() as f64;
    let total_u: f64 = state.u.iter().sum();
    let total_v: f64 = state.v.iter().sum();
    let spread = |xs: &[f64], mean: f64| xs.iter().fold(0.0f64, |m, x| m.max((x - mean).abs()));
    PatternMetrics {
        heterogeneity: spread(&state.u, total_u / n) + spread(&state.v, total_v / n),
        total_u,
        total_v,
        pct_change_u: 100.0 * (total_u - n * u_star) / (n * u_star),
        pct_change_v: 100.0 * (total_v - n * v_star) / (n * v_star),
    }
}

/// Projections `(c_α, b_α)` of `(u − u*, v − v*)` on each Laplacian eigenvector.
pub fn mode_amplitudes(
    state: &NetworkState,
    u_star: f64,
    v_star: f64,
    spectrum: &Spectrum,
) -> Result<Vec<(f64, f64)>> {
    let vecs = spectrum
        .eigenvectors
        .as_ref()
        .ok_or(Error::MissingEigenvectors)?;
    let n = spectrum.len();
    check_dims(state, n)?;
    let mut out = vec![(0.0, 0.0); n];
    for i in 0..n {
        let du = state.u[i] - u_star;
        let dv = state.v[i] - v_star;
        let row = &vecs[i * n..(i + 1) * n];
        for (amp, &w) in out.iter_mut().zip(row) {
            amp.0 += w * du;
            amp.1 += w * dv;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{gen_path, gen_ring, Graph};
    use crate::spectra::eig_symmetric;
    use crate::stability::{CouplingFn, Equilibrium};

    fn random_state(n: usize, seed: u64) -> NetworkState {
        let mut r = rng::rng_from_seed(seed);
        NetworkState {
            t: 0.0,
            u: (0..n).map(|_| r.random_range(0.0..3.0)).collect(),
            v: (0..n).map(|_| r.random_range(0.0..1.0)).collect(),
        }
    }

    #[test]
    fn homogeneous_equilibrium_is_fixed_point() {
        let p = SktParams::table1();
        let eq = Equilibrium::skt(&p).unwrap();
        for g in [
            gen_ring(20, 3).unwrap(),
            gen_path(7).unwrap(),
            Graph::complete(6).unwrap(),
        ] {
            let s = NetworkState::homogeneous(g.n_nodes(), eq.u_star, eq.v_star);
            let (du, dv) = rhs_skt(&s, &p, &g.laplacian()).unwrap();
            assert!(rhs_inf_norm(&du, &dv) < 1e-14);
        }
    }

    #[test]
    fn isolated_node_is_single_node_dynamics() {
        let p = SktParams::table1();
        let l = Graph::new(1, []).unwrap().laplacian();
        let s = NetworkState::new(0.0, vec![0.7], vec![0.4]).unwrap();
        let (du, dv) = rhs_skt(&s, &p, &l).unwrap();
        assert_eq!(du[0], p.f(0.7, 0.4));
        assert_eq!(dv[0], p.g(0.7, 0.4));
    }

    #[test]
    fn skt_matches_general_instantiation() {
        let p = SktParams {
            d11: 0.2,
            d22: 0.1,
            d21: 0.4,
            ..SktParams::table1()
        };
        let l = gen_ring(5, 1).unwrap().laplacian();
        let m = GeneralModel::from_skt(&p);
        for seed in 0..20 {
            let s = random_state(5, seed);
            let (a_u, a_v) = rhs_skt(&s, &p, &l).unwrap();
            let (b_u, b_v) = rhs_general(&s, &m, &l).unwrap();
            for i in 0..5 {
                assert!((a_u[i] - b_u[i]).abs() <= 1e-14);
                assert!((a_v[i] - b_v[i]).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn general_model_limits() {
        let p = SktParams::table1();
        let l = gen_ring(8, 2).unwrap().laplacian();
        let s = random_state(8, 3);
        let mut m = GeneralModel::from_skt(&p);
        (m.d1, m.d2, m.d11, m.d22, m.d12, m.d21) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let (du, dv) = rhs_general(&s, &m, &l).unwrap();
        for i in 0..8 {
            assert_eq!(du[i], p.f(s.u[i], s.v[i]));
            assert_eq!(dv[i], p.g(s.u[i], s.v[i]));
        }

        // Constant couplings collapse to linear diffusion with the summed coefficient.
        let mut m = GeneralModel::from_skt(&p);
        (m.d1, m.d11, m.d12) = (0.1, 0.2, 0.3);
        (m.d2, m.d22, m.d21) = (0.05, 0.0, 0.4);
        for c in [&mut m.s1, &mut m.s2, &mut m.c1, &mut m.c2] {
            *c = CouplingFn::constant(1.0);
        }
        let (du, dv) = rhs_general(&s, &m, &l).unwrap();
        let mut lu = vec![0.0; 8];
        let mut lv = vec![0.0; 8];
        l.apply(&s.u, &mut lu);
        l.apply(&s.v, &mut lv);
        for i in 0..8 {
            assert!((du[i] - (p.f(s.u[i], s.v[i]) - 0.6 * lu[i])).abs() < 1e-13);
            assert!((dv[i] - (p.g(s.u[i], s.v[i]) - 0.45 * lv[i])).abs() < 1e-13);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let l = gen_ring(5, 1).unwrap().laplacian();
        let s = NetworkState::homogeneous(4, 1.0, 1.0);
        assert!(matches!(
            rhs_skt(&s, &SktParams::table1(), &l),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(NetworkState::new(0.0, vec![1.0], vec![1.0, 2.0]).is_err());
        assert!(NetworkState::new(0.0, vec![f64::NAN], vec![1.0]).is_err());
    }

    #[test]
    fn perturbation_properties() {
        let s = perturb_homogeneous(1.625, 0.125, 50, 0.0, 1).unwrap();
        assert_eq!(s, NetworkState::homogeneous(50, 1.625, 0.125));
        for seed in 0..10 {
            let s = perturb_homogeneous(1.625, 0.125, 100, DEFAULT_PERTURBATION, seed).unwrap();
            assert!(s.min_entry() > 0.0);
            assert!(s
                .u
                .iter()
                .all(|&u| (u / 1.625 - 1.0).abs() <= DEFAULT_PERTURBATION + 1e-15));
        }
        let a = perturb_homogeneous(1.0, 1.0, 4000, 0.1, 1).unwrap();
        let b = perturb_homogeneous(1.0, 1.0, 4000, 0.1, 2).unwrap();
        assert_ne!(a, b);
        assert_eq!(a, perturb_homogeneous(1.0, 1.0, 4000, 0.1, 1).unwrap());
        // Uniform on [-0.1, 0.1]: mean 0, variance 0.01/3; standard errors ~1e-3 and ~7e-5.
        for s in [&a, &b] {
            let n = s.u.len() as f64;
            let mean = s.u.iter().map(|x| x - 1.0).sum::<f64>() / n;
            let var = s.u.iter().map(|x| (x - 1.0 - mean).powi(2)).sum::<f64>() / n;
            assert!(mean.abs() < 5e-3, "{mean}");
            assert!((var - 0.01 / 3.0).abs() < 4e-4, "{var}");
        }
        assert!(perturb_homogeneous(1.0, 1.0, 5, 1.0, 0).is_err());
        assert!(perturb_homogeneous(1.0, 1.0, 5, -0.1, 0).is_err());
    }

    #[test]
    fn positivity_check() {
        let good = NetworkState::homogeneous(3, 1.0, 0.0);
        let mut bad = good.clone();
        bad.v[1] = -1.0;
        assert!(check_positivity(std::slice::from_ref(&good), 1e-10));
        assert!(!check_positivity(&[good.clone(), bad], 1e-10));
        let mut slack = good;
        slack.u[0] = -5e-10;
        assert!(check_positivity(&[slack], 1e-10));
    }

    #[test]
    fn metrics() {
        let s = NetworkState::homogeneous(10, 1.625, 0.125);
        let m = pattern_metrics(&s, 1.625, 0.125);
        assert_eq!(m.heterogeneity, 0.0);
        assert!(m.pct_change_u.abs() < 1e-12 && m.pct_change_v.abs() < 1e-12);

        let s = NetworkState::new(0.0, vec![1.0, 2.0, 3.0], vec![0.5, 0.5, 2.0]).unwrap();
        let m = pattern_metrics(&s, 2.0, 1.0);
        assert_eq!(m.total_u, s.u.iter().fold(0.0, |a, b| a + b));
        assert_eq!(m.total_v, 3.0);
        assert!((m.heterogeneity - (1.0 + 1.0)).abs() < 1e-15);
        assert!(m.pct_change_u.abs() < 1e-12);
        assert!(m.pct_change_v.abs() < 1e-12);
    }

    #[test]
    fn mode_projection() {
        let g = gen_ring(12, 2).unwrap();
        let spec = eig_symmetric(&g.laplacian(), true).unwrap();
        let (us, vs) = (1.625, 0.125);

        let s = NetworkState::homogeneous(12, 1.7, vs);
        let amps = mode_amplitudes(&s, us, vs, &spec).unwrap();
        assert!((amps[0].0.abs() - 12f64.sqrt() * 0.075).abs() < 1e-12);
        assert!(amps[1..]
            .iter()
            .all(|a| a.0.abs() < 1e-12 && a.1.abs() < 1e-12));

        let eps = 1e-3;
        let v3 = spec.eigenvector(3).unwrap();
        let mut s = NetworkState::homogeneous(12, us, vs);
        for (u, w) in s.u.iter_mut().zip(&v3) {
            *u += eps * w;
        }
        let amps = mode_amplitudes(&s, us, vs, &spec).unwrap();
        for (a, &(c, b)) in amps.iter().enumerate() {
            let expected = if a == 3 { eps } else { 0.0 };
            assert!((c - expected).abs() < 1e-12, "mode {a}: {c}");
            assert!(b.abs() < 1e-15);
        }

        let no_vectors = eig_symmetric(&g.laplacian(), false).unwrap();
        assert!(matches!(
            mode_amplitudes(&s, us, vs, &no_vectors),
            Err(Error::MissingEigenvectors)
        ));
    }
}
