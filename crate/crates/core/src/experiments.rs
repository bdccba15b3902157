//! Sweeps, lattice comparisons, random-graph ensembles and simulation reports.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    integrate, mode_amplitudes, pattern_metrics, perturb_homogeneous, IntegratorConfig,
    NetworkState, PatternMetrics, SimulationResult, SktNetwork, DEFAULT_PERTURBATION,
};
use crate::error::{invalid, Error, Result};
use crate::graphs::{gen_lattice, GraphFamily, GraphSpec, LatticeKind};
use crate::output::{fmt_f64, write_json, write_text};
use crate::rng::derive_seed;
use crate::spectra::{
    eig_symmetric, ensemble_spectra, ring_spectrum_closed_form, stats_from_spectra, SpectralStats,
};
use crate::stability::{analyze, classify_modes, Equilibrium, InstabilityReport, SktParams};

/// Lattice shape used for the `N = 110` comparison (all three kinds).
pub const LATTICE_110: (usize, usize) = (10, 11);

/// Graph-family parameter varied along a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParameter {
    N,
    K,
    P,
    Degree,
    M,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Base family; the swept field is overwritten per value.
    pub graph: GraphSpec,
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    #[serde(default)]
    pub params: SktParams,
    #[serde(default = "one")]
    pub realizations: usize,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> usize {
    1
}

impl SweepSpec {
    pub fn new(graph: GraphSpec, parameter: SweepParameter, values: Vec<f64>) -> Self {
        Self {
            graph,
            parameter,
            values,
            params: SktParams::table1(),
            realizations: 1,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(invalid("sweep needs at least one value"));
        }
        if self.realizations == 0 {
            return Err(invalid("realizations must be >= 1"));
        }
        for &x in &self.values {
            family_with(self.graph.family, self.parameter, x)?.validate()?;
        }
        self.params.validate()
    }

    /// The base family with the swept parameter set to `self.values[index]`.
    pub fn family_at(&self, index: usize) -> Result<GraphFamily> {
        let x = *self
            .values
            .get(index)
            .ok_or_else(|| invalid(format!("sweep index {index} out of range")))?;
        family_with(self.graph.family, self.parameter, x)
    }
}

fn as_count(x: f64, what: &str) -> Result<usize> {
    if x >= 0.0 && x.fract() == 0.0 && x <= u32::MAX as f64 {
        Ok(x as usize)
    } else {
        Err(invalid(format!(
            "{what} must be a non-negative integer, got {x}"
        )))
    }
}

/// Replace one parameter of `family`.
pub fn family_with(family: GraphFamily, param: SweepParameter, x: f64) -> Result<GraphFamily> {
    use GraphFamily as F;
    use SweepParameter as S;
    let mismatch = || invalid(format!("cannot sweep {param:?} for {family:?}"));
    Ok(match (family, param) {
        (F::Ring { k, .. }, S::N) => F::Ring {
            n: as_count(x, "n")?,
            k,
        },
        (F::Ring { n, .. }, S::K) => F::Ring {
            n,
            k: as_count(x, "k")?,
        },
        (F::Path { .. }, S::N) => F::Path {
            n: as_count(x, "n")?,
        },
        (F::RegularRandom { degree, .. }, S::N) => F::RegularRandom {
            n: as_count(x, "n")?,
            degree,
        },
        (F::RegularRandom { n, .. }, S::Degree | S::K) => F::RegularRandom {
            n,
            degree: as_count(x, "degree")?,
        },
        (F::WattsStrogatz { k, p, .. }, S::N) => F::WattsStrogatz {
            n: as_count(x, "n")?,
            k,
            p,
        },
        (F::WattsStrogatz { n, p, .. }, S::K) => F::WattsStrogatz {
            n,
            k: as_count(x, "k")?,
            p,
        },
        (F::WattsStrogatz { n, k, .. }, S::P) => F::WattsStrogatz { n, k, p: x },
        (F::ErdosRenyi { p, .. }, S::N) => F::ErdosRenyi {
            n: as_count(x, "n")?,
            p,
        },
        (F::ErdosRenyi { n, .. }, S::P) => F::ErdosRenyi { n, p: x },
        (F::BarabasiAlbert { m, .. }, S::N) => F::BarabasiAlbert {
            n: as_count(x, "n")?,
            m,
        },
        (F::BarabasiAlbert { n, .. }, S::M | S::K) => F::BarabasiAlbert {
            n,
            m: as_count(x, "m")?,
        },
        _ => return Err(mismatch()),
    })
}

/// Degree-type label `K` of a family: the node degree for rings, Watts–Strogatz
/// and random-regular graphs, `m` for Barabási–Albert and the expected degree
/// `p (N − 1)` for Erdős–Rényi graphs. Lattices and paths have none.
pub fn degree_label(family: &GraphFamily) -> Option<f64> {
    match *family {
        GraphFamily::Ring { k, .. } | GraphFamily::WattsStrogatz { k, .. } => Some(2.0 * k as f64),
        GraphFamily::RegularRandom { degree, .. } => Some(degree as f64),
        GraphFamily::BarabasiAlbert { m, .. } => Some(m as f64),
        GraphFamily::ErdosRenyi { n, p } => Some(p * (n as f64 - 1.0)),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RingSweepRow {
    pub value: f64,
    pub n: usize,
    pub k: usize,
    pub spectrum: Vec<f64>,
    pub lambda_star: Option<f64>,
    pub lambda_star_1: Option<f64>,
    pub lambda_star_2: Option<f64>,
    pub unstable_modes: Vec<usize>,
}

impl RingSweepRow {
    pub fn unstable_count(&self) -> usize {
        self.unstable_modes.len()
    }
}

/// Closed-form ring spectra along a sweep of `n` or `k`, classified against Ω*.
pub fn ring_sweep(spec: &SweepSpec) -> Result<Vec<RingSweepRow>> {
    if !matches!(spec.graph.family, GraphFamily::Ring { .. }) {
        return Err(invalid("ring_sweep needs a ring family"));
    }
    spec.validate()?;
    let base = analyze(&spec.params, None)?;
    (0..spec.values.len())
        .map(|i| {
            let GraphFamily::Ring { n, k } = spec.family_at(i)? else {
                unreachable!()
            };
            let spectrum = ring_spectrum_closed_form(n, k)?;
            Ok(RingSweepRow {
                value: spec.values[i],
                n,
                k,
                unstable_modes: classify_modes(&spectrum, &base),
                spectrum,
                lambda_star: base.lambda_star,
                lambda_star_1: base.lambda_star_1,
                lambda_star_2: base.lambda_star_2,
            })
        })
        .collect()
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// `value,n,k,lambda_star,lambda_star_1,lambda_star_2,unstable_count`.
pub fn ring_sweep_csv(rows: &[RingSweepRow]) -> String {
    let mut out =
        String::from("value,n,k,lambda_star,lambda_star_1,lambda_star_2,unstable_count\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt_f64(r.value),
            r.n,
            r.k,
            opt(r.lambda_star),
            opt(r.lambda_star_1),
            opt(r.lambda_star_2),
            r.unstable_count()
        );
    }
    out
}

/// Long-format spectra: `value,index,eigenvalue` with 1-based index.
pub fn ring_sweep_spectra_csv(rows: &[RingSweepRow]) -> String {
    let mut out = String::from("value,index,eigenvalue\n");
    for r in rows {
        for (j, x) in r.spectrum.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", fmt_f64(r.value), j + 1, fmt_f64(*x));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeResult {
    pub kind: LatticeKind,
    pub rows: usize,
    pub cols: usize,
    pub n_nodes: usize,
    pub spectrum: Vec<f64>,
    pub unstable_modes: Vec<usize>,
}

/// Numeric spectrum and unstable modes for each `(kind, rows, cols)`.
pub fn lattice_comparison(
    dims: &[(LatticeKind, usize, usize)],
    params: &SktParams,
) -> Result<Vec<LatticeResult>> {
    let base = analyze(params, None)?;
    dims.par_iter()
        .map(|&(kind, rows, cols)| {
            let g = gen_lattice(kind, rows, cols)?;
            let spectrum = eig_symmetric(&g.laplacian(), false)?.eigenvalues;
            Ok(LatticeResult {
                kind,
                rows,
                cols,
                n_nodes: g.n_nodes(),
                unstable_modes: classify_modes(&spectrum, &base),
                spectrum,
            })
        })
        .collect()
}

/// The three lattice kinds at [`LATTICE_110`].
pub fn lattice_dims_110() -> Vec<(LatticeKind, usize, usize)> {
    LatticeKind::ALL
        .iter()
        .map(|&k| (k, LATTICE_110.0, LATTICE_110.1))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsemblePoint {
    pub value: f64,
    pub family: GraphFamily,
    #[serde(rename = "K")]
    pub k_label: Option<f64>,
    #[serde(rename = "K_half")]
    pub k_half: Option<f64>,
    pub stats: SpectralStats,
    /// Realizations with at least one eigenvalue inside Ω*.
    pub unstable_realizations: usize,
    pub unstable_fraction: f64,
    /// Indices of mean eigenvalues inside Ω*.
    pub mean_unstable_modes: Vec<usize>,
}

impl EnsemblePoint {
    pub fn mean_intersects(&self) -> bool {
        !self.mean_unstable_modes.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleReport {
    pub lambda_star_1: Option<f64>,
    pub lambda_star_2: Option<f64>,
    pub points: Vec<EnsemblePoint>,
}

/// Spectral statistics and instability fraction per sweep value. Sweep point `i`
/// uses master seed `derive_seed(spec.seed, i)`.
pub fn ensemble_report(spec: &SweepSpec) -> Result<EnsembleReport> {
    spec.validate()?;
    let base = analyze(&spec.params, None)?;
    let points = (0..spec.values.len())
        .map(|i| {
            let family = spec.family_at(i)?;
            let gs = GraphSpec {
                family,
                ..spec.graph
            };
            let spectra =
                ensemble_spectra(&gs, spec.realizations, derive_seed(spec.seed, i as u64))?;
            let unstable = spectra
                .iter()
                .filter(|s| !classify_modes(s, &base).is_empty())
                .count();
            let stats = stats_from_spectra(&spectra);
            let k_label = degree_label(&family);
            Ok(EnsemblePoint {
                value: spec.values[i],
                family,
                k_label,
                k_half: k_label.map(|k| k / 2.0),
                mean_unstable_modes: classify_modes(&stats.mean, &base),
                stats,
                unstable_realizations: unstable,
                unstable_fraction: unstable as f64 / spec.realizations as f64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EnsembleReport {
        lambda_star_1: base.lambda_star_1,
        lambda_star_2: base.lambda_star_2,
        points,
    })
}

/// `value,K,K_half,index,mean,variance,realizations`, one row per eigenvalue index.
pub fn ensemble_csv(report: &EnsembleReport) -> String {
    let mut out = String::from("value,K,K_half,index,mean,variance,realizations\n");
    for p in &report.points {
        for (j, (m, v)) in p.stats.mean.iter().zip(p.stats.variance()).enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                fmt_f64(p.value),
                opt(p.k_label),
                opt(p.k_half),
                j + 1,
                fmt_f64(*m),
                fmt_f64(v),
                p.stats.realizations
            );
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    pub graph: GraphSpec,
    #[serde(default)]
    pub params: SktParams,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    /// Relative amplitude of the uniform initial perturbation.
    #[serde(default = "default_perturbation")]
    pub perturbation: f64,
    /// One run per perturbation seed.
    pub seeds: Vec<u64>,
}

fn default_perturbation() -> f64 {
    DEFAULT_PERTURBATION
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub converged: bool,
    pub convergence_time: Option<f64>,
    pub final_time: f64,
    pub final_rhs_norm: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub positivity_violation: bool,
    pub clamped_entries: usize,
    pub min_entry: f64,
    pub metrics: PatternMetrics,
    /// 0-based index of the Laplacian mode carrying the most energy of the final deviation.
    pub dominant_mode: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub u_star: f64,
    pub v_star: f64,
    pub n_nodes: usize,
    pub unstable_modes: Vec<usize>,
    pub runs: Vec<RunSummary>,
}

/// Integrate one perturbed run per seed (in parallel) and summarize each.
pub fn simulate_and_report(
    spec: &SimulationSpec,
) -> Result<(SimulationReport, Vec<SimulationResult>)> {
    if spec.seeds.is_empty() {
        return Err(invalid("simulation needs at least one seed"));
    }
    let eq = Equilibrium::skt(&spec.params)?;
    let g = spec.graph.generate()?;
    let laplacian = g.laplacian();
    let spectrum = eig_symmetric(&laplacian, true)?;
    let rep: InstabilityReport = analyze(&spec.params, Some(&spectrum.eigenvalues))?;
    let model = SktNetwork::new(spec.params, laplacian)?;
    let n = g.n_nodes();

    let results: Vec<SimulationResult> = spec
        .seeds
        .par_iter()
        .map(|&seed| {
            let init = perturb_homogeneous(eq.u_star, eq.v_star, n, spec.perturbation, seed)?;
            integrate(&model, &init, &spec.integrator)
        })
        .collect::<Result<_>>()?;

    let runs = spec
        .seeds
        .iter()
        .zip(&results)
        .map(|(&seed, res)| {
            let amps = mode_amplitudes(&res.final_state, eq.u_star, eq.v_star, &spectrum)?;
            let dominant_mode = amps
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, (c, b))| (i, c * c + b * b))
                .filter(|&(_, e)| e > 0.0)
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(i, _)| i);
            Ok(RunSummary {
                seed,
                converged: res.converged,
                convergence_time: res.convergence_time,
                final_time: res.final_state.t,
                final_rhs_norm: res.final_rhs_norm,
                accepted_steps: res.accepted_steps,
                rejected_steps: res.rejected_steps,
                positivity_violation: res.positivity_violation,
                clamped_entries: res.clamped_entries,
                min_entry: res.min_entry,
                metrics: pattern_metrics(&res.final_state, eq.u_star, eq.v_star),
                dominant_mode,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok((
        SimulationReport {
            u_star: eq.u_star,
            v_star: eq.v_star,
            n_nodes: n,
            unstable_modes: rep.unstable_modes,
            runs,
        },
        results,
    ))
}

/// `seed,t,u_0,…,u_{N−1},v_0,…,v_{N−1}`.
pub fn trajectory_csv(seeds: &[u64], results: &[SimulationResult]) -> String {
    let n = results.first().map_or(0, |r| r.final_state.n_nodes());
    let mut out = String::from("seed,t");
    for i in 0..n {
        let _ = write!(out, ",u_{i}");
    }
    for i in 0..n {
        let _ = write!(out, ",v_{i}");
    }
    out.push('\n');
    for (seed, res) in seeds.iter().zip(results) {
        for s in &res.trajectory {
            let _ = write!(out, "{seed},{}", fmt_f64(s.t));
            for x in s.u.iter().chain(&s.v) {
                let _ = write!(out, ",{}", fmt_f64(*x));
            }
            out.push('\n');
        }
    }
    out
}

/// `seed,node,u,v`.
pub fn final_state_csv(seeds: &[u64], states: &[&NetworkState]) -> String {
    let mut out = String::from("seed,node,u,v\n");
    for (seed, s) in seeds.iter().zip(states) {
        for i in 0..s.n_nodes() {
            let _ = writeln!(out, "{seed},{i},{},{}", fmt_f64(s.u[i]), fmt_f64(s.v[i]));
        }
    }
    out
}

/// Write `trajectory.csv`, `final_state.csv` and `report.json` into `dir`.
pub fn write_simulation_outputs(
    dir: &Path,
    spec: &SimulationSpec,
    report: &SimulationReport,
    results: &[SimulationResult],
) -> Result<()> {
    if results.len() != spec.seeds.len() {
        return Err(Error::DimensionMismatch {
            expected: spec.seeds.len(),
            found: results.len(),
        });
    }
    let finals: Vec<&NetworkState> = results.iter().map(|r| &r.final_state).collect();
    write_text(dir, "trajectory.csv", &trajectory_csv(&spec.seeds, results))?;
    write_text(
        dir,
        "final_state.csv",
        &final_state_csv(&spec.seeds, &finals),
    )?;
    write_json(dir, "report.json", report)
}
