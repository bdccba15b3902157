//! Linear stability of the homogeneous coexistence state.
//!
//! Each Laplacian eigenvalue `Λ` contributes an independent 2×2 linear system
//! with characteristic matrix `M_Λ = J* − Λ D*`. Since `tr M_Λ < 0` under weak
//! competition, a mode is unstable exactly when `det M_Λ < 0`, which is a
//! quadratic in `Λ`; its positive roots bound the instability region.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Row-major 2×2 real matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Matrix2(pub [[f64; 2]; 2]);

impl Matrix2 {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self([[a, b], [c, d]])
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn det(&self) -> f64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn scaled_sub(&self, lambda: f64, other: &Matrix2) -> Matrix2 {
        let mut m = self.0;
        for (row, orow) in m.iter_mut().zip(other.0.iter()) {
            for (x, y) in row.iter_mut().zip(orow) {
                *x -= lambda * y;
            }
        }
        Matrix2(m)
    }

    /// Largest real part among the two eigenvalues.
    pub fn max_real_eigenvalue(&self) -> f64 {
        let half_tr = 0.5 * self.trace();
        let disc = half_tr * half_tr - self.det();
        if disc >= 0.0 {
            half_tr + disc.sqrt()
        } else {
            half_tr
        }
    }
}

/// Single-node rates and network diffusion coefficients of the SKT model.
///
/// `d1`, `d2` are the linear diffusion rates, `d11`, `d22` self-diffusion and
/// `d12`, `d21` cross-diffusion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SktParams {
    pub r1: f64,
    pub r2: f64,
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    pub d1: f64,
    pub d2: f64,
    pub d11: f64,
    pub d22: f64,
    pub d12: f64,
    pub d21: f64,
}

impl Default for SktParams {
    fn default() -> Self {
        Self::table1()
    }
}

impl SktParams {
    /// Reference weak-competition parameter set with `d = 0.03`, `D12 = 3`, `D21 = 0`.
    pub fn table1() -> Self {
        Self {
            r1: 5.0,
            r2: 2.0,
            a1: 3.0,
            a2: 3.0,
            b1: 1.0,
            b2: 1.0,
            d1: 0.03,
            d2: 0.03,
            d11: 0.0,
            d22: 0.0,
            d12: 3.0,
            d21: 0.0,
        }
    }

    pub fn with_linear_diffusion(mut self, d: f64) -> Self {
        self.d1 = d;
        self.d2 = d;
        self
    }

    pub fn with_cross_diffusion(mut self, d12: f64, d21: f64) -> Self {
        self.d12 = d12;
        self.d21 = d21;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            ("r1", self.r1),
            ("r2", self.r2),
            ("a1", self.a1),
            ("a2", self.a2),
            ("b1", self.b1),
            ("b2", self.b2),
            ("d1", self.d1),
            ("d2", self.d2),
            ("d11", self.d11),
            ("d22", self.d22),
            ("d12", self.d12),
            ("d21", self.d21),
        ];
        for (name, x) in all {
            if !x.is_finite() || x < 0.0 {
                return Err(invalid(format!(
                    "{name} must be finite and nonnegative, got {x}"
                )));
            }
        }
        Ok(())
    }

    /// `a1·a2 − b1·b2`.
    pub fn competition_determinant(&self) -> f64 {
        self.a1 * self.a2 - self.b1 * self.b2
    }

    pub fn is_weak_competition(&self) -> bool {
        self.competition_determinant() > 0.0
    }

    #[inline]
    pub fn f(&self, u: f64, v: f64) -> f64 {
        self.r1 * u - self.a1 * u * u - self.b1 * u * v
    }

    #[inline]
    pub fn g(&self, u: f64, v: f64) -> f64 {
        self.r2 * v - self.b2 * u * v - self.a2 * v * v
    }

    /// Multiply every diffusion coefficient by `factor`.
    pub fn scale_diffusion(mut self, factor: f64) -> Self {
        self.d1 *= factor;
        self.d2 *= factor;
        self.d11 *= factor;
        self.d22 *= factor;
        self.d12 *= factor;
        self.d21 *= factor;
        self
    }
}

/// Solve `r1 = a1 u + b1 v`, `r2 = b2 u + a2 v`; both components must be positive.
pub fn coexistence_equilibrium(p: &SktParams) -> Result<(f64, f64)> {
    let det = p.competition_determinant();
    if det == 0.0 {
        return Err(Error::DegenerateCompetition);
    }
    let u = (p.r1 * p.a2 - p.b1 * p.r2) / det;
    let v = (p.a1 * p.r2 - p.b2 * p.r1) / det;
    if u <= 0.0 || v <= 0.0 {
        return Err(Error::NoCoexistence { u, v });
    }
    Ok((u, v))
}

/// `J* = [[−a1 u*, −b1 u*], [−b2 v*, −a2 v*]]`.
pub fn jacobian_at_equilibrium(p: &SktParams, u: f64, v: f64) -> Matrix2 {
    Matrix2::new(-p.a1 * u, -p.b1 * u, -p.b2 * v, -p.a2 * v)
}

/// Linearization of the SKT diffusion terms at `(u*, v*)`:
/// `[[d1 + 2 D11 u* + D12 v*, D12 u*], [D21 v*, d2 + 2 D22 v* + D21 u*]]`.
pub fn diffusion_linearization_skt(p: &SktParams, u: f64, v: f64) -> Matrix2 {
    Matrix2::new(
        p.d1 + 2.0 * p.d11 * u + p.d12 * v,
        p.d12 * u,
        p.d21 * v,
        p.d2 + 2.0 * p.d22 * v + p.d21 * u,
    )
}

/// `M_Λ = J* − Λ D*`.
pub fn characteristic_matrix(j: &Matrix2, d: &Matrix2, lambda: f64) -> Result<Matrix2> {
    if lambda.is_nan() || lambda < 0.0 {
        return Err(invalid(format!(
            "Laplacian eigenvalue must be >= 0, got {lambda}"
        )));
    }
    Ok(j.scaled_sub(lambda, d))
}

/// Largest real part of the eigenvalues of `J* − Λ D*`: the linear growth rate of mode `Λ`.
pub fn dispersion_growth_rate(j: &Matrix2, d: &Matrix2, lambda: f64) -> f64 {
    j.scaled_sub(lambda, d).max_real_eigenvalue()
}

/// Coexistence state with its linearization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Equilibrium {
    pub u_star: f64,
    pub v_star: f64,
    pub jacobian: Matrix2,
    pub diffusion: Matrix2,
}

impl Equilibrium {
    /// Coexistence state of the SKT network model. Strong competition is rejected.
    pub fn skt(p: &SktParams) -> Result<Self> {
        p.validate()?;
        let (u, v) = coexistence_equilibrium(p)?;
        if !p.is_weak_competition() {
            return Err(Error::StrongCompetition);
        }
        Ok(Self {
            u_star: u,
            v_star: v,
            jacobian: jacobian_at_equilibrium(p, u, v),
            diffusion: diffusion_linearization_skt(p, u, v),
        })
    }

    pub fn trace_j(&self) -> f64 {
        self.jacobian.trace()
    }

    pub fn det_j(&self) -> f64 {
        self.jacobian.det()
    }
}

/// Coefficients of `det M_Λ` as a polynomial in the common linear diffusion
/// rate `d`: `A_Λ d² + B_Λ d + C_Λ`. Writing `D* = d I + E`,
/// `A_Λ = Λ²`, `B_Λ = Λ² tr E − Λ tr J*`, `C_Λ = Λ² det E − κ Λ + det J*`.
/// With no self-diffusion `det E = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearDiffusionExpansion {
    pub trace_e: f64,
    pub det_e: f64,
    pub trace_j: f64,
    pub det_j: f64,
    pub kappa: f64,
}

impl LinearDiffusionExpansion {
    /// `(A_Λ, B_Λ, C_Λ)`.
    pub fn coefficients(&self, lambda: f64) -> (f64, f64, f64) {
        let l2 = lambda * lambda;
        (
            l2,
            l2 * self.trace_e - lambda * self.trace_j,
            l2 * self.det_e - self.kappa * lambda + self.det_j,
        )
    }

    pub fn eval(&self, lambda: f64, d: f64) -> f64 {
        let (a, b, c) = self.coefficients(lambda);
        (a * d + b) * d + c
    }
}

/// Both expansions of `det M_Λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeterminantPolynomials {
    /// `v*(b2 u* − a2 v*)`.
    pub alpha: f64,
    /// `u*(b1 v* − a1 u*)`.
    pub beta: f64,
    /// `D12 α + D21 β − 2 u* v* (a1 D22 + a2 D11)`: the part of the `Λ¹`
    /// coefficient not multiplied by linear diffusion.
    pub kappa: f64,
    /// `det M_Λ = qa Λ² + qb Λ + qc`.
    pub qa: f64,
    pub qb: f64,
    pub qc: f64,
    /// Present when `d1 == d2`.
    pub in_d: Option<LinearDiffusionExpansion>,
}

impl DeterminantPolynomials {
    pub fn eval_lambda(&self, lambda: f64) -> f64 {
        (self.qa * lambda + self.qb) * lambda + self.qc
    }
}

pub fn det_polynomials(p: &SktParams, eq: &Equilibrium) -> DeterminantPolynomials {
    let (u, v) = (eq.u_star, eq.v_star);
    let j = &eq.jacobian;
    let d = &eq.diffusion;
    let alpha = v * (p.b2 * u - p.a2 * v);
    let beta = u * (p.b1 * v - p.a1 * u);
    let kappa = p.d12 * alpha + p.d21 * beta - 2.0 * u * v * (p.a1 * p.d22 + p.a2 * p.d11);
    // det(J − ΛD) = det D Λ² − (J11 D22 + J22 D11 − J12 D21 − J21 D12) Λ + det J
    let qa = d.det();
    let qb = -(j.0[0][0] * d.0[1][1] + j.0[1][1] * d.0[0][0]
        - j.0[0][1] * d.0[1][0]
        - j.0[1][0] * d.0[0][1]);
    let qc = j.det();
    let in_d = (p.d1 == p.d2).then(|| {
        let e = Matrix2::new(d.0[0][0] - p.d1, d.0[0][1], d.0[1][0], d.0[1][1] - p.d2);
        LinearDiffusionExpansion {
            trace_e: e.trace(),
            det_e: e.det(),
            trace_j: j.trace(),
            det_j: qc,
            kappa,
        }
    });
    DeterminantPolynomials {
        alpha,
        beta,
        kappa,
        qa,
        qb,
        qc,
        in_d,
    }
}

/// Grid step used to cross-check the quadratic roots.
pub const SCAN_STEP: f64 = 1e-3;

/// Threshold, instability region and determinant coefficients.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstabilityReport {
    pub u_star: f64,
    pub v_star: f64,
    pub trace_j: f64,
    pub det_j: f64,
    pub alpha: f64,
    pub beta: f64,
    /// `det J* / κ`, present iff `κ > 0`.
    pub lambda_star: Option<f64>,
    /// Ω* lower end.
    pub lambda_star_1: Option<f64>,
    /// Ω* upper end; `+∞` when `det D* = 0` and the region is unbounded.
    pub lambda_star_2: Option<f64>,
    pub polynomials: DeterminantPolynomials,
    /// Whether a sign-change scan of `det M_Λ` found the region endpoints.
    pub scan_verified: bool,
    pub unstable_modes: Vec<usize>,
}

impl InstabilityReport {
    pub fn region(&self) -> Option<(f64, f64)> {
        self.lambda_star_1.zip(self.lambda_star_2)
    }

    /// JSON object with absent values as `null`.
    pub fn to_json(&self) -> serde_json::Value {
        let num = |x: Option<f64>| x.filter(|v| v.is_finite());
        serde_json::json!({
            "u_star": self.u_star,
            "v_star": self.v_star,
            "trace_J": self.trace_j,
            "det_J": self.det_j,
            "alpha": self.alpha,
            "beta": self.beta,
            "lambda_star": num(self.lambda_star),
            "lambda_star_1": num(self.lambda_star_1),
            "lambda_star_2": num(self.lambda_star_2),
            "unstable_modes": self.unstable_modes,
        })
    }
}

/// Positive roots of `qa x² + qb x + qc` bounding the negative part, when
/// `qc > 0` (stable at `Λ = 0`).
fn negative_interval(qa: f64, qb: f64, qc: f64) -> Option<(f64, f64)> {
    if qa == 0.0 {
        // Linear: negative for Λ > qc / (−qb) when qb < 0.
        return (qb < 0.0).then(|| (qc / -qb, f64::INFINITY));
    }
    if qa < 0.0 {
        return None;
    }
    let disc = qb * qb - 4.0 * qa * qc;
    if disc <= 0.0 || qb >= 0.0 {
        return None;
    }
    // Larger-magnitude root first, the other from the product of the roots.
    let q = -0.5 * (qb - disc.sqrt());
    let r_big = q / qa;
    let r_small = qc / q;
    let (lo, hi) = if r_small < r_big {
        (r_small, r_big)
    } else {
        (r_big, r_small)
    };
    (lo > 0.0).then_some((lo, hi))
}

/// Points where `det M_Λ` changes sign on the grid `0, step, 2·step, …, lambda_max`.
/// Each returned value is the midpoint of the bracketing grid cell.
pub fn scan_sign_changes(j: &Matrix2, d: &Matrix2, lambda_max: f64, step: f64) -> Vec<f64> {
    let steps = (lambda_max / step).ceil() as usize;
    let mut out = Vec::new();
    let mut prev = j.det();
    for k in 1..=steps {
        let lambda = k as f64 * step;
        let cur = j.scaled_sub(lambda, d).det();
        if (prev < 0.0) != (cur < 0.0) {
            out.push(lambda - 0.5 * step);
        }
        prev = cur;
    }
    out
}

pub fn instability_region(p: &SktParams, eq: &Equilibrium) -> InstabilityReport {
    let poly = det_polynomials(p, eq);
    let lambda_star = (poly.kappa > 0.0).then(|| poly.qc / poly.kappa);
    let region = if poly.qc > 0.0 {
        negative_interval(poly.qa, poly.qb, poly.qc)
    } else {
        None
    };
    let scan_verified = match region {
        Some((lo, hi)) => {
            let upper = if hi.is_finite() { hi } else { lo };
            let crossings = scan_sign_changes(&eq.jacobian, &eq.diffusion, upper + 1.0, SCAN_STEP);
            let near = |x: f64| crossings.iter().any(|c| (c - x).abs() <= SCAN_STEP);
            near(lo) && (!hi.is_finite() || near(hi))
        }
        None => true,
    };
    InstabilityReport {
        u_star: eq.u_star,
        v_star: eq.v_star,
        trace_j: eq.trace_j(),
        det_j: eq.det_j(),
        alpha: poly.alpha,
        beta: poly.beta,
        lambda_star,
        lambda_star_1: region.map(|r| r.0),
        lambda_star_2: region.map(|r| r.1),
        polynomials: poly,
        scan_verified,
        unstable_modes: Vec::new(),
    }
}

/// Eigenvalues within this distance of an endpoint of Ω* count as stable.
pub const BOUNDARY_TOL: f64 = 1e-9;

/// 0-based indices `j` of sorted eigenvalues lying strictly inside Ω*.
pub fn classify_modes(eigenvalues: &[f64], rep: &InstabilityReport) -> Vec<usize> {
    let Some((lo, hi)) = rep.region() else {
        return Vec::new();
    };
    eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &x)| x > lo + BOUNDARY_TOL && x < hi - BOUNDARY_TOL)
        .map(|(i, _)| i)
        .collect()
}

/// Full analysis for the SKT parameters, with the unstable modes of `eigenvalues` filled in.
pub fn analyze(p: &SktParams, eigenvalues: Option<&[f64]>) -> Result<InstabilityReport> {
    let eq = Equilibrium::skt(p)?;
    let mut rep = instability_region(p, &eq);
    if let Some(eigs) = eigenvalues {
        rep.unstable_modes = classify_modes(eigs, &rep);
    }
    Ok(rep)
}

/// A scalar coupling function with an optional analytic derivative.
/// Without one, the derivative is a central difference with step `1e-6·max(1, |x|)`.
#[derive(Clone)]
pub struct CouplingFn {
    value: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    derivative: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
}

impl std::fmt::Debug for CouplingFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CouplingFn")
            .field("analytic_derivative", &self.derivative.is_some())
            .finish()
    }
}

impl CouplingFn {
    pub fn new(value: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            value: Arc::new(value),
            derivative: None,
        }
    }

    pub fn with_derivative(
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        derivative: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            value: Arc::new(value),
            derivative: Some(Arc::new(derivative)),
        }
    }

    pub fn identity() -> Self {
        Self::with_derivative(|x| x, |_| 1.0)
    }

    pub fn constant(c: f64) -> Self {
        Self::with_derivative(move |_| c, |_| 0.0)
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.value)(x)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match &self.derivative {
            Some(df) => df(x),
            None => {
                let h = fd_step(x);
                (self.eval(x + h) - self.eval(x - h)) / (2.0 * h)
            }
        }
    }
}

fn fd_step(x: f64) -> f64 {
    1e-6 * x.abs().max(1.0)
}

type Reaction = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Two-species network model with general reaction terms and
/// self-/cross-diffusion couplings:
///
/// `φ̇_i = f(φ_i, ψ_i) − D1 Σ l_ij φ_j − D11 Σ l_ij s1(φ_j) φ_j − D12 Σ l_ij c1(ψ_j) φ_j`
///
/// and symmetrically for `ψ` with `g, D2, D22, s2, D21, c2(φ_j)`.
#[derive(Clone)]
pub struct GeneralModel {
    pub f: Reaction,
    pub g: Reaction,
    pub d1: f64,
    pub d2: f64,
    pub d11: f64,
    pub d22: f64,
    pub d12: f64,
    pub d21: f64,
    pub s1: CouplingFn,
    pub s2: CouplingFn,
    pub c1: CouplingFn,
    pub c2: CouplingFn,
}

impl std::fmt::Debug for GeneralModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GeneralModel")
            .field("d1", &self.d1)
            .field("d2", &self.d2)
            .field("d11", &self.d11)
            .field("d22", &self.d22)
            .field("d12", &self.d12)
            .field("d21", &self.d21)
            .finish_non_exhaustive()
    }
}

impl GeneralModel {
    /// The SKT network model: `s_i(x) = c_i(x) = x` with Lotka–Volterra reactions.
    pub fn from_skt(p: &SktParams) -> Self {
        let (pf, pg) = (*p, *p);
        Self {
            f: Arc::new(move |u, v| pf.f(u, v)),
            g: Arc::new(move |u, v| pg.g(u, v)),
            d1: p.d1,
            d2: p.d2,
            d11: p.d11,
            d22: p.d22,
            d12: p.d12,
            d21: p.d21,
            s1: CouplingFn::identity(),
            s2: CouplingFn::identity(),
            c1: CouplingFn::identity(),
            c2: CouplingFn::identity(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, x) in [
            ("D1", self.d1),
            ("D2", self.d2),
            ("D11", self.d11),
            ("D22", self.d22),
            ("D12", self.d12),
            ("D21", self.d21),
        ] {
            if !x.is_finite() || x < 0.0 {
                return Err(invalid(format!(
                    "{name} must be finite and nonnegative, got {x}"
                )));
            }
        }
        Ok(())
    }

    /// Jacobian of `(f, g)` by central differences.
    pub fn jacobian(&self, phi: f64, psi: f64) -> Matrix2 {
        let (hp, hq) = (fd_step(phi), fd_step(psi));
        let dx = |r: &Reaction| (r(phi + hp, psi) - r(phi - hp, psi)) / (2.0 * hp);
        let dy = |r: &Reaction| (r(phi, psi + hq) - r(phi, psi - hq)) / (2.0 * hq);
        Matrix2::new(dx(&self.f), dy(&self.f), dx(&self.g), dy(&self.g))
    }

    /// Linearization of the diffusion part at `(φ*, ψ*)`.
    pub fn diffusion_linearization(&self, phi: f64, psi: f64) -> Matrix2 {
        Matrix2::new(
            self.d1
                + self.d11 * (self.s1.eval(phi) + self.s1.derivative(phi) * phi)
                + self.d12 * self.c1.eval(psi),
            self.d12 * self.c1.derivative(psi) * phi,
            self.d21 * self.c2.derivative(phi) * psi,
            self.d2
                + self.d22 * (self.s2.eval(psi) + self.s2.derivative(psi) * psi)
                + self.d21 * self.c2.eval(phi),
        )
    }

    /// Growth rate of the mode with Laplacian eigenvalue `lambda` around `(φ*, ψ*)`.
    pub fn growth_rate(&self, phi: f64, psi: f64, lambda: f64) -> f64 {
        dispersion_growth_rate(
            &self.jacobian(phi, psi),
            &self.diffusion_linearization(phi, psi),
            lambda,
        )
    }
}
