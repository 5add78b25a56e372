use super::config::*;
use super::report::*;
use crate::error::{Error, Result};
use crate::field::{
    covariance_exact, lift_field, sample_coupled_trajectories, sample_stationary_trajectory, FieldTrajectory,
    SpectralField,
};
use crate::io::{write_blocks, Block, Descriptor};
use crate::measures::{
    build_drift, exp_moment_estimate, fourier_probe, importance_sampling_mean, pcn_sample_mu,
    reversibility_test, GaussianReference, PcnSettings, PotentialPair, ProbeFn, ReversibilitySettings,
};
use crate::norms::{c_alpha, max_over_components, sup_norm};
use crate::rng::StreamId;
use crate::rough::{Grid, SmoothMap};
use crate::semigroup::SemigroupSpec;
use crate::solver::{
    classical_solve, solve_fixed_point, solve_stepping, NoiseSource, Problem, Solution, SolverOptions, Stencil,
    StencilSpec,
};
use crate::spectral;
use crate::stats::{fit_rate, Estimate};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

/// Flat-float frames produced by a run.
#[derive(Debug, Clone)]
pub struct FrameSet {
    pub prefix: String,
    pub description: String,
    pub descriptor: Descriptor,
    pub blocks: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub frames: Vec<FrameSet>,
}

fn provenance(config: &ExperimentConfig, streams: &[(u64, &str)]) -> Provenance {
    Provenance {
        seed: config.seed,
        generator: "ChaCha8 keyed by (seed, stream id); children derived by a splitmix64 hash".into(),
        streams: streams.iter().map(|(i, s)| (*i, s.to_string())).collect(),
        crate_version: env!("CARGO_PKG_VERSION").into(),
        schema_version: config.schema_version,
    }
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Largest sup-norm distance over the common output times.
fn path_distance(a: &Solution, b: &Solution) -> f64 {
    a.states
        .iter()
        .zip(&b.states)
        .map(|(x, y)| sup_diff(x, y))
        .fold(0.0, f64::max)
}

fn time_grid(horizon: f64, dt: f64) -> Vec<f64> {
    let steps = (horizon / dt).round() as usize;
    (0..=steps).map(|i| i as f64 * dt).collect()
}

/// Drift `f` and coupling `g` of the configured equation.
pub fn nonlinearity_maps(kind: Nonlinearity) -> (SmoothMap, SmoothMap) {
    match kind {
        Nonlinearity::DefaultPair => build_drift(&PotentialPair::default_pair()),
        Nonlinearity::Burgers => (
            SmoothMap::constant(1, vec![0.0]),
            SmoothMap::scalar(|u| u, |_| 1.0, |_| 0.0),
        ),
        Nonlinearity::Linear => (
            SmoothMap::new(1, 1, |u, _, o| o[0] = -u[0], |_, _, o| o[0] = -1.0).with_hessian(|_, _, o| o.fill(0.0)),
            SmoothMap::constant(1, vec![0.0]),
        ),
    }
}

pub fn initial_condition(kind: InitialCondition, dim: usize, m: usize, psi0: &[f64]) -> Vec<f64> {
    match kind {
        InitialCondition::Zero => vec![0.0; dim * m],
        InitialCondition::Noise => psi0.to_vec(),
        InitialCondition::Smooth => (0..dim * m)
            .map(|i| {
                let (c, j) = (i / m, i % m);
                let x = 2.0 * PI * j as f64 / m as f64;
                match c % 2 {
                    0 => 0.5 * x.sin(),
                    _ => 0.3 * (2.0 * x).cos(),
                }
            })
            .collect(),
    }
}

pub fn solver_options(p: &ProblemParams) -> SolverOptions {
    SolverOptions {
        tol: p.tol,
        max_iter: p.max_iter,
        contraction_threshold: p.contraction_threshold,
        max_halvings: p.max_halvings,
        blow_up_radius: None,
        interval_nodes: None,
    }
}

/// Stationary noise trajectory and problem for a shared setup.
pub fn build_setup(p: &ProblemParams, stream: StreamId) -> Result<(FieldTrajectory, NoiseSource, Problem)> {
    let dim = p.nonlinearity.dim();
    let times = time_grid(p.horizon, p.dt);
    let traj = sample_stationary_trajectory(p.modes, dim, p.sigma, &times, stream)?;
    let noise = NoiseSource::from_trajectory(&traj, p.cells)?;
    let problem = build_problem(p, noise.values(0))?;
    Ok((traj, noise, problem))
}

pub fn build_problem(p: &ProblemParams, psi0: &[f64]) -> Result<Problem> {
    let dim = p.nonlinearity.dim();
    let (f, g) = nonlinearity_maps(p.nonlinearity);
    let u0 = initial_condition(p.initial, dim, p.cells, psi0);
    Problem::new(f, g, u0, p.cells)?.with_exponents(p.alpha, p.beta)
}

fn fit_if_possible(report: &mut RunReport, name: &str, pairs: &[(f64, f64)]) {
    if let Ok(fit) = fit_rate(pairs) {
        report.fits.push(FitSummary::new(name, &fit));
    }
}

fn decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

fn run_field(config: &ExperimentConfig, p: &FieldParams) -> Result<RunOutput> {
    let stream = StreamId::new(config.seed, 0);
    let traj = sample_coupled_trajectories(p.modes, p.dim, p.sigma, &[p.hyperviscosity], &p.times, stream)?
        .pop()
        .expect("one member");
    let mut report = RunReport::new(config.kind, provenance(config, &[(0, "trajectory")]));
    let grid = Grid::periodic(p.cells)?;
    let mut snaps = Table::new("snapshots", &["time", "sup_norm", "mean_square", "holder_045", "area_sup"]);
    let mut modes = Table::new("modes", &["time", "component", "k", "re", "im"]);
    let mut blocks = vec![p.times.clone()];
    let mut names = vec![Block {
        name: "times".into(),
        len: p.times.len(),
        shape: vec![p.times.len()],
    }];
    let mut symmetric = true;
    for (i, s) in traj.snapshots().iter().enumerate() {
        let t = p.times[i];
        let values = s.evaluate_components(p.cells)?;
        let lift = lift_field(s, &grid)?;
        let area_sup = lift.cell_areas().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let ms = (0..p.dim).map(|c| s.mean_square(c)).sum::<f64>() / p.dim as f64;
        snaps.push(vec![
            t,
            sup_norm(&values),
            ms,
            max_over_components(&values, p.cells, |u| c_alpha(u, 0.45)),
            area_sup,
        ]);
        for c in 0..p.dim {
            for k in 0..=p.modes as i64 {
                let a = s.coefficient(c, k);
                modes.push(vec![t, c as f64, k as f64, a.re, a.im]);
            }
        }
        symmetric &= s.conjugate_symmetry_defect() <= 1e-12;
        names.push(Block {
            name: format!("values_{i}"),
            len: values.len(),
            shape: vec![p.dim, p.cells],
        });
        blocks.push(values);
        if p.export_lifts {
            names.push(Block {
                name: format!("areas_{i}"),
                len: lift.cell_areas().len(),
                shape: vec![p.cells, p.dim, p.dim],
            });
            blocks.push(lift.cell_areas().to_vec());
        }
    }
    report.tables.push(snaps);
    report.tables.push(modes);
    report.check(Check::flag("conjugate_symmetry", symmetric));
    report.artifacts.push(Artifact {
        file: "field.bin".into(),
        description: "per time: component-major values, then cell areas when exported".into(),
    });
    let descriptor = Descriptor {
        kind: "field_trajectory".into(),
        grid,
        dim: p.dim,
        value_dim: None,
        holder_exponent: None,
        reference: None,
        blocks: names,
    };
    Ok(RunOutput {
        report,
        frames: vec![FrameSet {
            prefix: "field".into(),
            description: "field snapshots".into(),
            descriptor,
            blocks,
        }],
    })
}

fn solve_with(method: SolveMethod, stride: usize, problem: &Problem, noise: &NoiseSource, p: &ProblemParams) -> Result<Solution> {
    match method {
        SolveMethod::FixedPoint => solve_fixed_point(problem, noise, p.horizon, &solver_options(p)),
        SolveMethod::Stepping => solve_stepping(problem, noise, p.horizon, stride, None),
    }
}

fn run_solve(config: &ExperimentConfig, p: &SolveParams) -> Result<RunOutput> {
    let (_, noise, problem) = build_setup(&p.problem, StreamId::new(config.seed, 0))?;
    let sol = solve_with(p.method, p.stride, &problem, &noise, &p.problem)?;
    let mut report = RunReport::new(config.kind, provenance(config, &[(0, "noise trajectory")]));
    let m = p.problem.cells;
    let mut diag = Table::new("diagnostics", &["time", "remainder_c1", "sup_norm", "noise_norm"]);
    for (i, t) in sol.times.iter().enumerate() {
        diag.push(vec![*t, sol.remainder_norms[i], sup_norm(&sol.states[i]), sol.noise_norm]);
    }
    let mut intervals = Table::new(
        "intervals",
        &["start", "end", "iterations", "contraction_factor", "halvings", "final_increment"],
    );
    for r in &sol.intervals {
        intervals.push(vec![
            r.start,
            r.end,
            r.iterations as f64,
            r.contraction_factor,
            r.halvings as f64,
            r.final_increment,
        ]);
    }
    let mut summary = Table::new("summary", &["final_time", "noise_norm", "radius", "blow_up_time"]);
    summary.push(vec![
        sol.final_time(),
        sol.noise_norm,
        sol.radius,
        sol.blow_up.map_or(-1.0, |b| b.time),
    ]);
    report.tables.extend([diag, intervals, summary]);
    report.check(Check::flag("no_blow_up", sol.blow_up.is_none()));
    if p.method == SolveMethod::FixedPoint {
        report.check(Check::new(
            "max_contraction_factor",
            sol.max_contraction(),
            Relation::AtMost,
            p.max_contraction,
        ));
    }
    let dim = problem.dim();
    let mut picks: Vec<usize> = (0..sol.states.len()).step_by(p.snapshot_every).collect();
    if picks.last() != Some(&(sol.states.len() - 1)) {
        picks.push(sol.states.len() - 1);
    }
    let times: Vec<f64> = picks.iter().map(|&i| sol.times[i]).collect();
    let mut names = vec![Block {
        name: "times".into(),
        len: times.len(),
        shape: vec![times.len()],
    }];
    let mut blocks = vec![times];
    for (j, &i) in picks.iter().enumerate() {
        names.push(Block {
            name: format!("state_{j}"),
            len: dim * m,
            shape: vec![dim, m],
        });
        blocks.push(sol.states[i].clone());
    }
    report.artifacts.push(Artifact {
        file: "solution.bin".into(),
        description: "selected solution snapshots, component-major".into(),
    });
    Ok(RunOutput {
        report,
        frames: vec![FrameSet {
            prefix: "solution".into(),
            description: "solution snapshots".into(),
            descriptor: Descriptor {
                kind: "solution_frames".into(),
                grid: Grid::periodic(m)?,
                dim,
                value_dim: None,
                holder_exponent: Some(p.problem.alpha),
                reference: None,
                blocks: names,
            },
            blocks,
        }],
    })
}

fn run_linear_covariance(config: &ExperimentConfig, p: &LinearCovarianceParams) -> Result<RunOutput> {
    let stream = StreamId::new(config.seed, 0);
    let lags: Vec<f64> = (0..=p.lags).map(|j| j as f64 * PI / p.lags as f64).collect();
    let products: Vec<Vec<f64>> = (0..p.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream.child(i as u64).rng();
            let sf = SpectralField::sample_stationary(p.modes, 1, p.sigma, 0.0, &mut rng);
            let at0 = sf.point_value(0, 0.0);
            lags.iter().map(|&x| at0 * sf.point_value(0, x)).collect()
        })
        .collect();
    let mut report = RunReport::new(config.kind, provenance(config, &[(0, "independent stationary samples")]));
    let mut table = Table::new("covariance", &["lag", "estimate", "std_err", "exact", "z"]);
    let mut worst = 0.0f64;
    for (j, &x) in lags.iter().enumerate() {
        let xs: Vec<f64> = products.iter().map(|r| r[j]).collect();
        let est = Estimate::from_samples(&xs)?;
        let exact = covariance_exact(x, p.sigma);
        let z = est.z_score(exact);
        worst = worst.max(z.abs());
        table.push(vec![x, est.mean, est.std_err, exact, z]);
    }
    let var_z = table.rows[0][4].abs();
    report.tables.push(table);
    report.check(Check::new("variance_abs_z", var_z, Relation::AtMost, p.z_threshold));
    report.check(Check::new("max_abs_z_over_lags", worst, Relation::AtMost, p.z_threshold));
    Ok(RunOutput { report, frames: vec![] })
}

fn run_mollifier(config: &ExperimentConfig, p: &MollifierParams) -> Result<RunOutput> {
    let (traj, noise, problem) = build_setup(&p.problem, StreamId::new(config.seed, 0))?;
    let opts = solver_options(&p.problem);
    let base = solve_fixed_point(&problem, &noise, p.problem.horizon, &opts)?;
    let rows: Vec<(f64, f64, f64)> = p
        .eps
        .par_iter()
        .map(|&e| {
            let nm = NoiseSource::mollified(&traj, p.problem.cells, e, p.profile)?;
            let s = solve_fixed_point(&problem, &nm, p.problem.horizon, &opts)?;
            Ok((e, path_distance(&s, &base), sup_diff(s.final_state(), base.final_state())))
        })
        .collect::<Result<_>>()?;
    let mut report = RunReport::new(config.kind, provenance(config, &[(0, "noise trajectory")]));
    let mut table = Table::new("distances", &["eps", "sup_distance", "final_distance"]);
    for r in &rows {
        table.push(vec![r.0, r.1, r.2]);
    }
    let sup: Vec<f64> = rows.iter().map(|r| r.1).collect();
    fit_if_possible(&mut report, "sup_distance_vs_eps", &rows.iter().map(|r| (r.0, r.1)).collect::<Vec<_>>());
    report.tables.push(table);
    report.check(Check::flag("no_blow_up", base.blow_up.is_none()));
    report.check(Check::flag("distance_decreases_with_eps", decreasing(&sup)));
    Ok(RunOutput { report, frames: vec![] })
}

fn run_hyperviscosity(config: &ExperimentConfig, p: &HyperviscosityParams) -> Result<RunOutput> {
    let pp = &p.problem;
    let dim = pp.nonlinearity.dim();
    let times = time_grid(pp.horizon, pp.dt);
    let mut eps = vec![0.0];
    eps.extend(&p.eps);
    let family = sample_coupled_trajectories(pp.modes, dim, pp.sigma, &eps, &times, StreamId::new(config.seed, 0))?;
    let opts = solver_options(pp);
    let sols: Vec<Solution> = family
        .par_iter()
        .zip(&eps)
        .map(|(traj, &e)| {
            let noise = NoiseSource::from_trajectory(traj, pp.cells)?;
            let problem = build_problem(pp, noise.values(0))?.with_semigroup(SemigroupSpec::hyperviscous(e));
            solve_fixed_point(&problem, &noise, pp.horizon, &opts)
        })
        .collect::<Result<_>>()?;
    let mut report = RunReport::new(config.kind, provenance(config, &[(0, "coupled noise family")]));
    let mut table = Table::new("distances", &["eps", "sup_distance", "final_distance"]);
    let mut pairs = vec![];
    for (s, &e) in sols.iter().zip(&eps).skip(1) {
        let d = path_distance(s, &sols[0]);
        pairs.push((e, d));
        table.push(vec![e, d, sup_diff(s.final_state(), sols[0].final_state())]);
    }
    fit_if_possible(&mut report, "sup_distance_vs_eps", &pairs);
    report.tables.push(table);
    report.check(Check::flag("no_blow_up", sols.iter().all(|s| s.blow_up.is_none())));
    report.check(Check::flag(
        "distance_decreases_with_eps",
        decreasing(&pairs.iter().map(|p| p.1).collect::<Vec<_>>()),
    ));
    Ok(RunOutput { report, frames: vec![] })
}

/// Modes `|k| ≤ kmax` of a component-major state, sampled on `target` nodes.
fn low_pass(u: &[f64], m: usize, kmax: i64, target: usize) -> Vec<f64> {
    u.chunks(m)
        .flat_map(|c| {
            let l = spectral::apply_multiplier(c, |k| {
                Complex64::new(if k.abs() <= kmax { 1.0 } else { 0.0 }, 0.0)
            });
            (0..target).map(move |j| l[j * (m / target)])
        })
        .collect()
}

fn run_stencil(config: &ExperimentConfig, p: &StencilParams) -> Result<RunOutput> {
    let levels = p.cells.len();
    let coarse = p.cells[0];
    let h0 = 2.0 * PI / coarse as f64;
    let rough_steps = (p.horizon / p.rough_dt).round() as usize;
    let needed = (p.horizon / (h0 * h0 / 4.0)).ceil() as usize;
    let coarse_steps = needed.div_ceil(rough_steps) * rough_steps;
    let fine_factor = 4usize.pow(levels as u32 - 1);
    let fine_steps = coarse_steps * fine_factor;
    let dt_fine = p.horizon / fine_steps as f64;
    let times: Vec<f64> = (0..=fine_steps).map(|i| i as f64 * dt_fine).collect();
    let top = *p.cells.last().expect("nonempty");
    let traj = sample_stationary_trajectory(top / p.noise_divisor, 1, 1.0, &times, StreamId::new(config.seed, 0))?;
    let stencils = [Stencil::Forward, Stencil::Backward, Stencil::Centered];
    let observe = |u: &[f64], m: usize| low_pass(u, m, p.low_pass, coarse);

    struct Level {
        obs: Vec<Vec<f64>>,
        rough_gap: f64,
        dt: f64,
        blew_up: bool,
    }
    let results: Vec<Level> = p
        .cells
        .par_iter()
        .enumerate()
        .map(|(l, &m)| {
            let tr = traj.truncate_modes(m / p.noise_divisor);
            let stride = 4usize.pow((levels - 1 - l) as u32);
            let dt = dt_fine * stride as f64;
            let (f, g) = nonlinearity_maps(Nonlinearity::Burgers);
            let problem = Problem::new(f, g, vec![0.0; m], m)?;
            let mut obs = vec![];
            let mut finals = vec![];
            let mut blew_up = false;
            for st in stencils {
                let s = classical_solve(&problem, &tr, StencilSpec { stencil: st, dt }, p.horizon, None)?;
                blew_up |= s.blow_up.is_some();
                obs.push(observe(s.final_state(), m));
                finals.push(s);
            }
            let rough_gap = if p.rough_reference {
                let sub = tr.subsample(fine_steps / rough_steps);
                let noise = NoiseSource::from_trajectory(&sub, m)?;
                let s = solve_fixed_point(&problem, &noise, p.horizon, &SolverOptions::default())?;
                blew_up |= s.blow_up.is_some();
                sup_diff(&observe(s.final_state(), m), &obs[2])
            } else {
                0.0
            };
            Ok(Level {
                obs,
                rough_gap,
                dt,
                blew_up,
            })
        })
        .collect::<Result<_>>()?;

    let mut report = RunReport::new(config.kind, provenance(config, &[(0, "noise trajectory on the finest time grid")]));
    let mut gaps = Table::new(
        "gaps",
        &["cells", "modes", "dt", "forward_backward_gap", "forward_centered_gap", "centered_rough_gap"],
    );
    let mut fb = vec![];
    for (l, r) in results.iter().enumerate() {
        let g = sup_diff(&r.obs[0], &r.obs[1]);
        fb.push(g);
        gaps.push(vec![
            p.cells[l] as f64,
            (p.cells[l] / p.noise_divisor) as f64,
            r.dt,
            g,
            sup_diff(&r.obs[0], &r.obs[2]),
            r.rough_gap,
        ]);
    }
    let mut selfc = Table::new("self_convergence", &["cells_coarse", "cells_fine", "forward", "backward", "centered"]);
    let mut last_self = 0.0;
    for l in 1..levels {
        let e: Vec<f64> = (0..3).map(|s| sup_diff(&results[l].obs[s], &results[l - 1].obs[s])).collect();
        last_self = e[0].max(e[1]);
        selfc.push(vec![p.cells[l - 1] as f64, p.cells[l] as f64, e[0], e[1], e[2]]);
    }
    report.tables.push(gaps);
    report.tables.push(selfc);
    let finest = *fb.last().expect("nonempty");
    let lo = fb.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = fb.iter().cloned().fold(0.0, f64::max);
    report.check(Check::flag("no_blow_up", results.iter().all(|r| !r.blew_up)));
    report.check(Check::new(
        "gap_over_self_error",
        finest / last_self,
        Relation::Above,
        p.gap_ratio,
    ));
    report.check(Check::new("gap_spread", hi / lo - 1.0, Relation::AtMost, p.gap_spread));
    Ok(RunOutput { report, frames: vec![] })
}

fn run_area_shift(config: &ExperimentConfig, p: &AreaShiftParams) -> Result<RunOutput> {
    let pp = &p.problem;
    let (_, noise, problem) = build_setup(pp, StreamId::new(config.seed, 0))?;
    let opts = solver_options(pp);
    let base = solve_fixed_point(&problem, &noise, pp.horizon, &opts)?;
    let m = pp.cells;
    let n = problem.dim();
    let shift_field = |c: f64| {
        let mut f = vec![0.0; (m + 1) * n * n];
        for i in 0..=m {
            let x = 2.0 * PI * i as f64 / m as f64;
            f[i * n * n + 1] = c * x;
            f[i * n * n + n] = -c * x;
        }
        f
    };
    let mut report = RunReport::new(config.kind, provenance(config, &[(0, "noise trajectory")]));
    let mut table = Table::new("gaps", &["shift", "sup_gap", "final_gap"]);
    let mut gaps = vec![];
    for c in [0.0, p.shift] {
        let shifted = noise.with_area_shift(&shift_field(c))?;
        let s = solve_fixed_point(&problem, &shifted, pp.horizon, &opts)?;
        let g = path_distance(&s, &base);
        gaps.push(g);
        table.push(vec![c, g, sup_diff(s.final_state(), base.final_state())]);
    }
    report.tables.push(table);
    report.check(Check::new("zero_shift_gap", gaps[0], Relation::AtMost, 0.0));
    report.check(Check::new(
        "shift_gap_over_tolerance",
        gaps[1] / pp.tol,
        Relation::Above,
        p.gap_factor,
    ));
    Ok(RunOutput { report, frames: vec![] })
}

fn potential_pair(p: Potential) -> PotentialPair {
    match p {
        Potential::DefaultPair => PotentialPair::default_pair(),
        Potential::ScalarSine => PotentialPair::scalar_sine(),
    }
}

fn run_reversibility(config: &ExperimentConfig, p: &ReversibilityParams) -> Result<RunOutput> {
    let pair = potential_pair(p.potential);
    let n = pair.dim();
    let mut report = RunReport::new(
        config.kind,
        provenance(
            config,
            &[
                (0, "pCN chain"),
                (1, "importance sampling"),
                (2, "ensemble members"),
            ],
        ),
    );
    let mc = p.check_cells;
    let reference = GaussianReference::for_grid(mc, n, 0.0)?;
    let observe = |w: &[f64]| w[..mc].iter().map(|v| v.cos()).sum::<f64>() / mc as f64;
    let settings = PcnSettings {
        burn_in: p.chain_burn_in,
        steps: p.chain_steps,
        rho: p.chain_rho,
        scheme: p.scheme,
    };
    let chain = pcn_sample_mu(reference, &pair, mc, &settings, StreamId::new(config.seed, 0), observe)?;
    let is = importance_sampling_mean(
        reference,
        &pair,
        mc,
        p.importance_samples,
        p.scheme,
        StreamId::new(config.seed, 1),
        observe,
    )?;
    let mut trace = Table::new("chain", &["step", "xi", "accepted"]);
    for (i, (x, a)) in chain.xi.iter().zip(&chain.accepted).enumerate() {
        trace.push(vec![(i + 1) as f64, *x, if *a { 1.0 } else { 0.0 }]);
    }
    let combined = chain.estimate.std_err.hypot(is.std_err);
    let z = (chain.estimate.mean - is.mean) / combined;
    let mut cmp = Table::new(
        "sampler_comparison",
        &["pcn_mean", "pcn_std_err", "is_mean", "is_std_err", "z", "acceptance", "ess", "geweke_z"],
    );
    cmp.push(vec![
        chain.estimate.mean,
        chain.estimate.std_err,
        is.mean,
        is.std_err,
        z,
        chain.acceptance_rate,
        chain.effective_sample_size,
        chain.geweke_z,
    ]);
    report.check(Check::new("pcn_vs_importance_abs_z", z.abs(), Relation::AtMost, p.z_threshold));
    report.check(Check::new("geweke_abs_z", chain.geweke_z.abs(), Relation::AtMost, 1.96));

    let second = n - 1;
    let phi1 = |u: &[f64], m: usize| fourier_probe(u, m, 0, 1, false);
    let phi2 = move |u: &[f64], m: usize| fourier_probe(u, m, second, 1, true);
    let square = |u: &[f64], m: usize| u[..m].iter().map(|v| v * v).sum::<f64>() / m as f64;
    let probes: [(&str, &ProbeFn); 3] = [("phi1", &phi1), ("phi2", &phi2), ("mean_square", &square)];
    let settings = ReversibilitySettings {
        ensemble: p.ensemble,
        cells: p.cells,
        lag: p.lag,
        dt: p.dt,
        burn_in: p.burn_in,
        rho: p.rho,
    };
    let rev = reversibility_test(&pair, &settings, &phi1, &phi2, &probes, StreamId::new(config.seed, 2))?;
    let mut rt = Table::new(
        "reversibility",
        &["forward", "forward_std_err", "backward", "backward_std_err", "difference", "combined_std_err", "members", "dropped", "mean_acceptance"],
    );
    rt.push(vec![
        rev.forward.mean,
        rev.forward.std_err,
        rev.backward.mean,
        rev.backward.std_err,
        rev.difference,
        rev.combined_std_err,
        rev.members as f64,
        rev.dropped as f64,
        rev.mean_acceptance,
    ]);
    let mut mt = Table::new(
        "marginals",
        &["probe", "initial", "initial_std_err", "midway", "midway_std_err", "lagged", "lagged_std_err"],
    );
    report.check(Check::new(
        "forward_backward_abs_z",
        if rev.combined_std_err > 0.0 { rev.difference.abs() / rev.combined_std_err } else { 0.0 },
        Relation::AtMost,
        p.z_threshold,
    ));
    for (i, mc) in rev.marginals.iter().enumerate() {
        mt.push(vec![
            i as f64,
            mc.initial.mean,
            mc.initial.std_err,
            mc.midway.mean,
            mc.midway.std_err,
            mc.lagged.mean,
            mc.lagged.std_err,
        ]);
        for (label, e) in [("midway", &mc.midway), ("lagged", &mc.lagged)] {
            let se = mc.initial.std_err.hypot(e.std_err);
            let z = if se > 0.0 { (e.mean - mc.initial.mean).abs() / se } else { 0.0 };
            report.check(Check::new(format!("{}_{label}_abs_z", mc.name), z, Relation::AtMost, p.z_threshold));
        }
    }
    report.tables.extend([cmp, rt, mt, trace]);
    Ok(RunOutput { report, frames: vec![] })
}

fn run_exp_moment(config: &ExperimentConfig, p: &ExpMomentParams) -> Result<RunOutput> {
    let pair = potential_pair(p.potential);
    let est = exp_moment_estimate(&p.eps, &pair.g, p.modes, p.cells, p.samples, p.window, StreamId::new(config.seed, 0))?;
    let mut report = RunReport::new(config.kind, provenance(config, &[(0, "reference samples per eps")]));
    let mut t = Table::new("estimates", &["eps", "mean", "std_err", "ci_low", "ci_high"]);
    for e in &est {
        t.push(vec![e.eps, e.estimate.mean, e.estimate.std_err, e.ci_low, e.ci_high]);
    }
    let means: Vec<f64> = est.iter().map(|e| e.estimate.mean).collect();
    let hi = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = means.iter().cloned().fold(f64::INFINITY, f64::min);
    report.tables.push(t);
    report.check(Check::new("max_over_min", hi / lo, Relation::AtMost, p.ratio_bound));
    Ok(RunOutput { report, frames: vec![] })
}

/// Runs the experiment described by `config`.
pub fn run(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    if config.params.kind() != config.kind {
        return Err(Error::config("kind", "parameters belong to another experiment kind"));
    }
    match &config.params {
        Params::Field(p) => run_field(config, p),
        Params::Solve(p) => run_solve(config, p),
        Params::LinearCovariance(p) => run_linear_covariance(config, p),
        Params::MollifierConvergence(p) => run_mollifier(config, p),
        Params::HyperviscosityConvergence(p) => run_hyperviscosity(config, p),
        Params::StencilCompare(p) => run_stencil(config, p),
        Params::AreaShift(p) => run_area_shift(config, p),
        Params::InvariantReversibility(p) => run_reversibility(config, p),
        Params::ExpMoment(p) => run_exp_moment(config, p),
    }
}

/// Runs and persists everything needed to reproduce the run from `dir`
/// alone: `config.toml`, `report.json`, CSV tables, frame files and
/// `timing.json`.
pub fn run_to_dir(config: &ExperimentConfig, dir: &Path) -> Result<RunReport> {
    let start = Instant::now();
    let out = run(config)?;
    std::fs::create_dir_all(dir)?;
    config.save(&dir.join(CONFIG_FILE))?;
    emit(&out.report, dir, &[Format::Json, Format::Csv])?;
    for f in &out.frames {
        let blocks: Vec<&[f64]> = f.blocks.iter().map(|b| b.as_slice()).collect();
        write_blocks(&dir.join(&f.prefix), &f.descriptor, &blocks)?;
    }
    write_timing(
        dir,
        &Timing {
            wall_clock_seconds: start.elapsed().as_secs_f64(),
            threads: rayon::current_num_threads(),
        },
    )?;
    Ok(out.report)
}

/// Re-runs from the config persisted in `dir` and compares every output file
/// except the timing record byte for byte. Returns the differing file names.
pub fn verify_rerun(dir: &Path, scratch: &Path) -> Result<Vec<String>> {
    let config = ExperimentConfig::load(&dir.join(CONFIG_FILE))?;
    run_to_dir(&config, scratch)?;
    let mut differing = vec![];
    let mut names: Vec<String> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n != TIMING_FILE)
        .collect();
    names.sort();
    for name in names {
        let a = std::fs::read(dir.join(&name))?;
        let b = std::fs::read(scratch.join(&name)).unwrap_or_default();
        if a != b {
            differing.push(name);
        }
    }
    Ok(differing)
}
