use std::fs;
use std::path::Path;

use serde::Serialize;

use mastereq::config::{matrix_to_spec, FiniteBathConfig, MatrixSpec, ModelConfig, OracleConfig};
use mastereq::diagnostics::{check_map, choi_spectrum, equivalence_report, ChoiProbe, Verdict};
use mastereq::dynamics::{
    block_structure_report, evolve_markov_with, evolve_nonlocal, steady_state as solve_steady, BlockReport,
    Liouvillian, Trajectory,
};
use mastereq::io::{kernel_csv, provenance_hash, to_json, trajectory_csv, KernelEnvelope, SteadyStateDocument};
use mastereq::kernels::build_kernel;
use mastereq::oracle::{
    born_scaling, discretize_ohmic, exact_reduced_evolution, BornScaling, FiniteBathModel,
};
use mastereq::{Error, KernelVariant};

use crate::{Common, Format};

const TRACE_TOL: f64 = 1e-12;
const CONSERVATION_TOL: f64 = 1e-10;
const POSITIVITY_TOL: f64 = 1e-8;

pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NonFinite { .. }
            | Error::StepUnderflow { .. }
            | Error::NullSpace(_)
            | Error::TruncationLeakage { .. }
            | Error::NonConvergence(_) => 1,
            _ => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn breach(message: String) -> Failure {
    Failure { code: 1, message }
}

type CmdResult = Result<(), Failure>;

struct Context {
    cfg: ModelConfig,
    hash: String,
}

fn load(args: &Common) -> Result<Context, Failure> {
    let mut cfg = ModelConfig::from_path(&args.config)?;
    if let Some(v) = &args.variant {
        cfg.experiment.variant = Some(v.clone());
        cfg.variant()?;
    }
    if let Some(s) = args.seed {
        cfg.experiment.seed = Some(s);
    }
    fs::create_dir_all(&args.out).map_err(Error::from)?;
    let hash = provenance_hash(&cfg);
    Ok(Context { cfg, hash })
}

fn write(dir: &Path, name: &str, text: &str) -> CmdResult {
    fs::write(dir.join(name), text).map_err(|e| Failure::from(Error::from(e)))
}

fn liouvillian(cfg: &ModelConfig, variant: KernelVariant) -> Result<Liouvillian, Failure> {
    let spec = cfg.spectrum()?;
    let k = build_kernel(variant, &spec, &cfg.couplings()?, &cfg.bath()?)?;
    Ok(Liouvillian::from_kernel(&spec, &k)?)
}

pub fn build_kernel_cmd(args: &Common) -> CmdResult {
    let ctx = load(args)?;
    let cfg = &ctx.cfg;
    let k = build_kernel(cfg.variant()?, &cfg.spectrum()?, &cfg.couplings()?, &cfg.bath()?)?;
    if args.format != Some(Format::Json) {
        write(&args.out, "kernel.csv", &kernel_csv(&k.superop))?;
    }
    if args.format != Some(Format::Csv) {
        write(&args.out, "kernel.json", &to_json(&KernelEnvelope::new(&k, ctx.hash.clone()))?)?;
    }
    let residual = k.trace_condition_residual();
    println!("trace_residual {residual:.16e}");
    if !(residual < TRACE_TOL) {
        return Err(breach(format!("trace residual {residual:e} >= {TRACE_TOL:e}")));
    }
    Ok(())
}

#[derive(Serialize)]
struct TrajectoryDocument {
    times: Vec<f64>,
    states: Vec<MatrixSpec>,
}

fn write_trajectory(args: &Common, stem: &str, t: &Trajectory) -> CmdResult {
    match args.format {
        Some(Format::Json) => {
            let doc = TrajectoryDocument {
                times: t.times.clone(),
                states: t.states.iter().map(matrix_to_spec).collect(),
            };
            write(&args.out, &format!("{stem}.json"), &to_json(&doc)?)
        }
        _ => write(&args.out, &format!("{stem}.csv"), &trajectory_csv(t)),
    }
}

#[derive(Serialize)]
struct TrajectorySummary {
    max_trace_drift: f64,
    max_hermiticity_residual: f64,
    min_eigenvalue: f64,
}

impl TrajectorySummary {
    fn new(t: &Trajectory) -> Self {
        Self {
            max_trace_drift: t.max_trace_drift(),
            max_hermiticity_residual: t.max_hermiticity_residual(),
            min_eigenvalue: t.min_state_eigenvalue(),
        }
    }
}

#[derive(Serialize)]
struct EvolveDiagnostics {
    config_hash: String,
    code_version: &'static str,
    variant: String,
    seed: u64,
    markov: TrajectorySummary,
    spectral_abscissa: f64,
    choi_probes: Vec<ChoiProbe>,
    verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    nonlocal: Option<TrajectorySummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    nonlocal_vs_markov: Option<f64>,
}

pub fn evolve(args: &Common) -> CmdResult {
    let ctx = load(args)?;
    let cfg = &ctx.cfg;
    let variant = cfg.variant()?;
    let spec = cfg.spectrum()?;
    let rho0 = cfg.initial_state(spec.dim())?;
    let grid = cfg.t_grid()?;
    let l = liouvillian(cfg, variant)?;
    let markov = evolve_markov_with(&l, &rho0, &grid, cfg.propagator())?;
    write_trajectory(args, "trajectory", &markov)?;

    let samples = cfg.experiment.samples.unwrap_or(8);
    let map = check_map(&l, &grid, samples, cfg.seed())?;
    let choi_probes = match &cfg.experiment.probes {
        Some(p) => choi_spectrum(&l, p),
        None => map.probes.clone(),
    };

    let (mut nl_summary, mut nl_dist) = (None, None);
    if let Some(n) = &cfg.experiment.nonlocal {
        let tc = mastereq::bath::time_correlation(&cfg.bath()?, n.tau_step, n.half_len, n.tau_mem)?;
        let nl = evolve_nonlocal(&spec, &cfg.couplings()?, &tc, &rho0, &grid)?;
        write_trajectory(args, "trajectory_nonlocal", &nl)?;
        nl_dist = Some(nl.max_trace_distance(&markov)?);
        nl_summary = Some(TrajectorySummary::new(&nl));
    }

    let diag = EvolveDiagnostics {
        config_hash: ctx.hash.clone(),
        code_version: env!("CARGO_PKG_VERSION"),
        variant: variant.to_string(),
        seed: cfg.seed(),
        markov: TrajectorySummary::new(&markov),
        spectral_abscissa: l.spectral_abscissa()?,
        choi_probes,
        verdict: map.verdict,
        nonlocal: nl_summary,
        nonlocal_vs_markov: nl_dist,
    };
    write(&args.out, "diagnostics.json", &to_json(&diag)?)?;
    println!(
        "trace_drift {:.3e} hermiticity {:.3e} min_eig {:.3e}",
        diag.markov.max_trace_drift, diag.markov.max_hermiticity_residual, diag.markov.min_eigenvalue
    );
    if let Some(d) = nl_dist {
        println!("nonlocal_vs_markov {d:.3e}");
    }
    if diag.markov.max_trace_drift >= CONSERVATION_TOL || diag.markov.max_hermiticity_residual >= CONSERVATION_TOL {
        return Err(breach("trace or hermiticity not conserved".into()));
    }
    let lindblad_form = matches!(variant, KernelVariant::Lindblad | KernelVariant::EnergyConserving);
    if lindblad_form && diag.markov.min_eigenvalue < -POSITIVITY_TOL {
        return Err(breach(format!(
            "{variant} trajectory left the state space (min eigenvalue {:e})",
            diag.markov.min_eigenvalue
        )));
    }
    Ok(())
}

pub fn steady_state(args: &Common) -> CmdResult {
    let ctx = load(args)?;
    let variant = ctx.cfg.variant()?;
    let l = liouvillian(&ctx.cfg, variant)?;
    let report = solve_steady(&l)?;
    let doc = SteadyStateDocument::new(&report, variant.to_string(), ctx.hash.clone());
    write(&args.out, "steady_state.json", &to_json(&doc)?)?;
    println!("multiplicity {}", report.multiplicity);
    Ok(())
}

#[derive(Serialize)]
struct CompareDocument {
    config_hash: String,
    code_version: &'static str,
    #[serde(flatten)]
    report: mastereq::diagnostics::EquivalenceReport,
}

pub fn compare(args: &Common) -> CmdResult {
    let ctx = load(args)?;
    let cfg = &ctx.cfg;
    let report = equivalence_report(&cfg.spectrum()?, &cfg.couplings()?, &cfg.bath()?)?;
    let table = report.table();
    print!("{table}");
    write(&args.out, "compare.txt", &table)?;
    let holds = report.equivalence_holds;
    let worst_trace = report.trace_residuals.iter().map(|(_, r)| *r).fold(0.0, f64::max);
    let ec_li = report.energy_conserving_vs_lindblad;
    let doc = CompareDocument {
        config_hash: ctx.hash.clone(),
        code_version: env!("CARGO_PKG_VERSION"),
        report,
    };
    write(&args.out, "compare.json", &to_json(&doc)?)?;
    if !holds {
        return Err(breach(format!("energy-conserving and Lindblad kernels differ by {ec_li:e}")));
    }
    if !(worst_trace < TRACE_TOL) {
        return Err(breach(format!("trace residual {worst_trace:e}")));
    }
    Ok(())
}

#[derive(Serialize)]
struct FiniteBathDocument {
    config_hash: String,
    code_version: &'static str,
    variant: String,
    quadrature: String,
    reachable_dim: usize,
    leakage: f64,
    top_fock_occupation: f64,
    unitarity_error: f64,
    recurrence_limit: f64,
    max_trace_distance: f64,
    trace_distance: Vec<(f64, f64)>,
}

#[derive(Serialize)]
struct ScalingDocument {
    config_hash: String,
    code_version: &'static str,
    #[serde(flatten)]
    scaling: BornScaling,
    in_band: bool,
}

fn finite_bath_model(cfg: &ModelConfig, fb: &FiniteBathConfig) -> Result<FiniteBathModel, Failure> {
    let (modes, quadrature) = match &fb.modes {
        Some(m) => (m.clone(), "explicit modes".to_string()),
        None => (
            discretize_ohmic(fb.n_modes, fb.omega_max, fb.eta, fb.cutoff),
            format!("gauss-legendre n={} on [0, {}]", fb.n_modes, fb.omega_max),
        ),
    };
    let mut model = FiniteBathModel::new(cfg.spectrum()?, cfg.couplings()?, fb.forms.clone(), modes, fb.n_max, fb.beta)?;
    model.quadrature = quadrature;
    if let Some(cap) = fb.dim_cap {
        model.dim_cap = cap;
    }
    Ok(model)
}

pub fn validate(args: &Common) -> CmdResult {
    let ctx = load(args)?;
    let cfg = &ctx.cfg;
    match &cfg.experiment.oracle {
        None => Err(Failure::from(Error::Config {
            field: "experiment.oracle".into(),
            message: "missing".into(),
        })),
        Some(OracleConfig::BornScaling(setup)) => {
            let scaling = born_scaling(setup)?;
            println!("{:>10} {:>12} {:>24}", "eta", "t_max", "max trace distance");
            for p in &scaling.points {
                println!("{:>10.4} {:>12.4} {:>24.16e}", p.eta, p.t_max, p.error);
            }
            let in_band = scaling.ratios.iter().all(|r| (3.0..=5.0).contains(r));
            println!("ratios {:?}", scaling.ratios);
            let doc = ScalingDocument {
                config_hash: ctx.hash.clone(),
                code_version: env!("CARGO_PKG_VERSION"),
                scaling,
                in_band,
            };
            write(&args.out, "validate.json", &to_json(&doc)?)?;
            if !in_band {
                return Err(breach("Born scaling ratios outside [3, 5]".into()));
            }
            Ok(())
        }
        Some(OracleConfig::FiniteBath(fb)) => {
            let model = finite_bath_model(cfg, fb)?;
            let rho0 = cfg.initial_state(model.spectrum.dim())?;
            let grid = cfg.t_grid()?;
            let exact = exact_reduced_evolution(&model, &rho0, &grid)?;
            let variant = cfg.variant()?;
            let l = liouvillian(cfg, variant)?;
            let markov = evolve_markov_with(&l, &rho0, &grid, cfg.propagator())?;
            write_trajectory(args, "trajectory_exact", &exact.trajectory)?;
            write_trajectory(args, "trajectory", &markov)?;
            let dist: Vec<(f64, f64)> = grid
                .iter()
                .zip(exact.trajectory.states.iter().zip(&markov.states))
                .map(|(t, (a, b))| (*t, mastereq::density::trace_distance(a, b)))
                .collect();
            let mut table = String::from("t,trace_distance\n");
            for (t, d) in &dist {
                table.push_str(&format!(
                    "{},{}\n",
                    mastereq::io::fmt_float(*t),
                    mastereq::io::fmt_float(*d)
                ));
            }
            write(&args.out, "trace_distance.csv", &table)?;
            let max = dist.iter().map(|x| x.1).fold(0.0, f64::max);
            let doc = FiniteBathDocument {
                config_hash: ctx.hash.clone(),
                code_version: env!("CARGO_PKG_VERSION"),
                variant: variant.to_string(),
                quadrature: model.quadrature.clone(),
                reachable_dim: exact.reachable_dim,
                leakage: exact.leakage,
                top_fock_occupation: exact.top_fock_occupation,
                unitarity_error: exact.unitarity_error,
                recurrence_limit: exact.recurrence_limit,
                max_trace_distance: max,
                trace_distance: dist,
            };
            write(&args.out, "validate.json", &to_json(&doc)?)?;
            println!("reachable_dim {} max_trace_distance {max:.6e}", exact.reachable_dim);
            if exact.unitarity_error >= 1e-10 {
                return Err(breach(format!("global evolution not unitary ({:e})", exact.unitarity_error)));
            }
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct BlockDocument {
    config_hash: String,
    code_version: &'static str,
    variant: String,
    degenerate: bool,
    #[serde(flatten)]
    report: BlockReport,
}

pub fn block_report(args: &Common) -> CmdResult {
    let ctx = load(args)?;
    let cfg = &ctx.cfg;
    let variant = cfg.variant()?;
    let spec = cfg.spectrum()?;
    let k = build_kernel(variant, &spec, &cfg.couplings()?, &cfg.bath()?)?;
    let report = block_structure_report(&spec, &k.superop)?;
    println!(
        "pop_to_coh {} coh_to_pop {} max_cross {:.3e}",
        report.pop_to_coh.len(),
        report.coh_to_pop.len(),
        report.max_cross()
    );
    let degenerate = spec.is_degenerate();
    let coupled = !report.is_decoupled();
    let doc = BlockDocument {
        config_hash: ctx.hash.clone(),
        code_version: env!("CARGO_PKG_VERSION"),
        variant: variant.to_string(),
        degenerate,
        report,
    };
    write(&args.out, "block_report.json", &to_json(&doc)?)?;
    let selection_rule = matches!(variant, KernelVariant::Lindblad | KernelVariant::EnergyConserving);
    if selection_rule && !degenerate && coupled {
        return Err(breach("nondegenerate spectrum but populations couple to coherences".into()));
    }
    Ok(())
}
