//! Command-line surface: `criterion`, `classify`, `simulate`, `example1`,
//! `sweep`.
//!
//! Exit codes are a total function of the outcome enums: 0 for
//! global-existence/global-looking results, 2 for blow-up, 3 for
//! outside-scope/inconclusive, 1 for any error. All file output goes under
//! `--output-dir`; reals are printed with 17 significant digits so repeated
//! runs are byte-identical.

use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::config::{DataSource, SimulateSpec};
use crate::criterion::{compute_constants, critical_exponents, ProblemParams, Regime};
use crate::dynamics::{run, GridSpec, RunReport, VerdictKind};
use crate::energy::free_energy;
use crate::error::{Error, Result};
use crate::radial::{lcrit_norm, load_snapshot, project_profile, RadialGrid, Spacing};
use crate::scenarios::{
    build_scenario, classify_field, example1_thresholds, relation_energy_holds,
    relation_norm_holds, ScenarioOptions,
};

#[derive(Parser)]
#[command(
    name = "kslab",
    version,
    about = "Radial laboratory for a degenerate chemotaxis model: threshold constants, \
             initial-data classification, and finite-volume simulation"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)] // parsed once per process
enum Cmd {
    /// Print every closed-form threshold constant for (n, m, mass)
    Criterion(CriterionArgs),
    /// Classify initial data (scenario or snapshot) against the dichotomy
    Classify(ClassifyArgs),
    /// Integrate the radial dynamics and write series.csv / report.txt
    Simulate(SimulateArgs),
    /// Compute the indicator-ball thresholds K1, K2, K0 and check them
    Example1(Example1Args),
    /// Classify (and optionally simulate) a grid of bump initial data
    Sweep(SweepArgs),
}

#[derive(Args)]
struct CriterionArgs {
    /// Space dimension (n >= 3)
    #[arg(long)]
    n: u32,
    /// Diffusion exponent, strictly inside (2n/(n+2), 2 - 2/n)
    #[arg(long)]
    m: f64,
    /// Total mass M0 the constants are evaluated at
    #[arg(long, default_value_t = 1.0)]
    mass: f64,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Named scenario from the library
    #[arg(long, conflicts_with = "snapshot")]
    scenario: Option<String>,
    /// Density snapshot file
    #[arg(long)]
    snapshot: Option<PathBuf>,
    /// Space dimension (n >= 3)
    #[arg(long, default_value_t = 3)]
    n: u32,
    /// Diffusion exponent
    #[arg(long, default_value_t = 1.25)]
    m: f64,
    /// K = k_mult * K0 for the example1 scenario
    #[arg(long = "K-mult", default_value_t = 2.0)]
    k_mult: f64,
    /// Ball mass for the example1 scenario
    #[arg(long, default_value_t = 1.0)]
    eps0: f64,
    /// Cell-count override for scenario grids
    #[arg(long)]
    cells: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Flat key=value config file; flags override file values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Space dimension [default: 3]
    #[arg(long)]
    n: Option<u32>,
    /// Diffusion exponent [default: 1.25]
    #[arg(long)]
    m: Option<f64>,
    /// Regularization level; 0 = exact coupling [default: 0]
    #[arg(long)]
    epsilon: Option<f64>,
    /// Domain radius (scenarios pick their own unless grid flags are given)
    #[arg(long = "r-max")]
    r_max: Option<f64>,
    /// Cell count
    #[arg(long)]
    cells: Option<usize>,
    /// `uniform` or `geometric`
    #[arg(long)]
    spacing: Option<String>,
    /// Cell growth factor for geometric spacing [default: 1.05]
    #[arg(long)]
    ratio: Option<f64>,
    /// Integration horizon [default: 5e-3]
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    /// Upper clamp on the step size [default: 1e-3]
    #[arg(long = "dt-init")]
    dt_init: Option<f64>,
    /// Lower clamp; needing less is a blow-up symptom [default: 1e-9]
    #[arg(long = "dt-min")]
    dt_min: Option<f64>,
    /// Safety factor on the stability bound, in (0, 1] [default: 0.4]
    #[arg(long)]
    cfl: Option<f64>,
    /// Record diagnostics every this many accepted steps [default: 50]
    #[arg(long = "output-every")]
    output_every: Option<u64>,
    /// Disable with false for porous-medium control runs [default: true]
    #[arg(long)]
    attraction: Option<bool>,
    /// L^m growth declaring blow-up together with dt collapse [default: 10]
    #[arg(long = "blowup-lm-factor")]
    blowup_lm_factor: Option<f64>,
    /// Abort threshold on outermost-cell mass fraction [default: 1e-8]
    #[arg(long = "tail-mass-tol")]
    tail_mass_tol: Option<f64>,
    /// Hard cap on accepted steps [default: 2000000]
    #[arg(long = "max-steps")]
    max_steps: Option<u64>,
    /// Named scenario for the initial data [default: wide-subcritical]
    #[arg(long)]
    scenario: Option<String>,
    /// Density snapshot file for the initial data
    #[arg(long)]
    snapshot: Option<PathBuf>,
    /// K = k_mult * K0 for the example1 scenario [default: 2]
    #[arg(long = "K-mult")]
    k_mult: Option<f64>,
    /// Ball mass for the example1 scenario [default: 1]
    #[arg(long)]
    eps0: Option<f64>,
    /// Directory receiving series.csv, report.txt and config.txt
    #[arg(long = "output-dir", default_value = ".")]
    output_dir: PathBuf,
}

#[derive(Args)]
struct Example1Args {
    /// Space dimension (n >= 3)
    #[arg(long, default_value_t = 3)]
    n: u32,
    /// Diffusion exponent
    #[arg(long, default_value_t = 1.25)]
    m: f64,
    /// Ball mass (the construction works for arbitrarily small values)
    #[arg(long, default_value_t = 1.0)]
    eps0: f64,
}

#[derive(Args)]
struct SweepArgs {
    /// Comma-separated bump widths
    #[arg(long, value_delimiter = ',')]
    widths: Vec<f64>,
    /// Comma-separated bump amplitudes (exclusive with --masses)
    #[arg(long, value_delimiter = ',', conflicts_with = "masses")]
    amps: Vec<f64>,
    /// Comma-separated bump masses; amplitude is derived per width
    #[arg(long, value_delimiter = ',')]
    masses: Vec<f64>,
    /// Space dimension (n >= 3)
    #[arg(long, default_value_t = 3)]
    n: u32,
    /// Diffusion exponent
    #[arg(long, default_value_t = 1.25)]
    m: f64,
    /// Cells per classification grid
    #[arg(long, default_value_t = 512)]
    cells: usize,
    /// Worker threads for independent cells (0 = all cores)
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Also run a short simulation per cell and record the verdict
    #[arg(long, default_value_t = false)]
    simulate: bool,
    /// Horizon for per-cell simulations
    #[arg(long = "sim-t-end", default_value_t = 2e-3)]
    sim_t_end: f64,
    #[arg(long = "output-dir", default_value = ".")]
    output_dir: PathBuf,
}

/// Parses argv and dispatches; returns the process exit code.
pub fn main_entry<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Cmd::Criterion(a) => cmd_criterion(&a),
        Cmd::Classify(a) => cmd_classify(&a),
        Cmd::Simulate(a) => cmd_simulate(&a),
        Cmd::Example1(a) => cmd_example1(&a),
        Cmd::Sweep(a) => cmd_sweep(&a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn cmd_criterion(args: &CriterionArgs) -> Result<i32> {
    let constants =
        ProblemParams::new(args.n, args.m, args.mass).and_then(|p| compute_constants(&p));
    let c = match constants {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            if let Ok((mc, ms)) = critical_exponents(args.n) {
                eprintln!(
                    "admissible diffusion exponents for n = {}: ({mc}, {ms})",
                    args.n
                );
            }
            return Ok(1);
        }
    };
    println!("n = {}", args.n);
    println!("m = {:.16e}", args.m);
    println!("mass = {:.16e}", args.mass);
    println!("alpha_n = {:.16e}", c.alpha_n);
    println!("c_hls = {:.16e}", c.c_hls);
    println!("m_c = {:.16e}", c.m_c);
    println!("m_star = {:.16e}", c.m_star);
    println!("theta = {:.16e}", c.theta);
    println!("s_star = {:.16e}", c.s_star);
    println!("f_star = {:.16e}", c.f_star);
    println!("threshold_norm = {:.16e}", c.threshold_norm);
    Ok(0)
}

fn regime_exit(regime: Regime) -> i32 {
    match regime {
        Regime::GlobalExistence => 0,
        Regime::BlowUp => 2,
        Regime::OutsideTheoremScope => 3,
    }
}

fn cmd_classify(args: &ClassifyArgs) -> Result<i32> {
    let rho = match (&args.scenario, &args.snapshot) {
        (Some(name), None) => {
            let opts = ScenarioOptions {
                cells: args.cells,
                grid: None,
                eps0: args.eps0,
                k_mult: args.k_mult,
            };
            build_scenario(name, args.n, args.m, &opts)?.rho
        }
        (None, Some(path)) => {
            let rho = load_snapshot(path)?;
            if rho.grid().n() != args.n {
                return Err(Error::domain(format!(
                    "snapshot is {}-dimensional but --n {} was given",
                    rho.grid().n(),
                    args.n
                )));
            }
            rho
        }
        (None, None) => {
            return Err(Error::Config("give --scenario or --snapshot".into()));
        }
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    };
    let c = classify_field(&rho, args.m)?;
    println!("mass = {:.16e}", rho.mass());
    println!("lcrit_norm = {:.16e}", c.lcrit_norm);
    println!("free_energy0 = {:.16e}", c.free_energy0);
    println!("threshold_norm = {:.16e}", c.constants.threshold_norm);
    println!("f_star = {:.16e}", c.constants.f_star);
    println!("norm_margin = {:.16e}", c.norm_margin);
    println!("energy_margin = {:.16e}", c.energy_margin);
    println!("regime = {}", c.regime);
    Ok(regime_exit(c.regime))
}

fn verdict_exit(kind: VerdictKind) -> i32 {
    match kind {
        VerdictKind::GlobalLooking => 0,
        VerdictKind::BlowUpDetected => 2,
        VerdictKind::Inconclusive => 3,
    }
}

/// The fixed series.csv schema: column order and 17-digit reals.
pub fn write_series_csv(report: &RunReport, mut out: impl Write) -> Result<()> {
    writeln!(
        out,
        "t,dt,mass,lm_norm,lcrit_norm,m2,F,F1,F2,entropy_production,dm2dt_formula,dm2dt_measured"
    )?;
    for row in &report.series {
        let e = &row.energy;
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            row.t,
            row.dt,
            e.mass,
            e.lm_norm,
            e.lcrit_norm,
            e.m2,
            e.free_energy,
            e.f1,
            e.f2,
            row.entropy_production,
            e.dm2dt_formula,
            row.dm2dt_measured,
        )?;
    }
    Ok(())
}

fn write_report_txt(report: &RunReport, mut out: impl Write) -> Result<()> {
    let v = &report.verdict;
    writeln!(out, "verdict = {}", v.kind)?;
    match v.t_detect {
        Some(t) => writeln!(out, "t_detect = {:.16e}", t)?,
        None => writeln!(out, "t_detect = none")?,
    }
    writeln!(out, "lm_growth = {:.16e}", v.lm_growth)?;
    writeln!(out, "m2_initial = {:.16e}", v.m2_summary.0)?;
    writeln!(out, "m2_final = {:.16e}", v.m2_summary.1)?;
    writeln!(out, "m2_slope = {:.16e}", v.m2_summary.2)?;
    writeln!(out, "total_steps = {}", report.total_steps)?;
    writeln!(out, "total_rejections = {}", report.total_rejections)?;
    writeln!(out, "mass_drift_rel = {:.16e}", report.mass_drift_rel)?;
    writeln!(out, "energy_monotone = {}", report.energy_monotone)?;
    writeln!(
        out,
        "max_energy_increase_rel = {:.16e}",
        report.max_energy_increase_rel
    )?;
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> Result<i32> {
    let flags = SimulateSpec {
        n: args.n,
        m: args.m,
        epsilon: args.epsilon,
        r_max: args.r_max,
        cells: args.cells,
        spacing: args.spacing.clone(),
        ratio: args.ratio,
        t_end: args.t_end,
        dt_init: args.dt_init,
        dt_min: args.dt_min,
        cfl: args.cfl,
        output_every: args.output_every,
        attraction: args.attraction,
        blowup_lm_factor: args.blowup_lm_factor,
        tail_mass_tol: args.tail_mass_tol,
        max_steps: args.max_steps,
        scenario: args.scenario.clone(),
        snapshot: args.snapshot.as_ref().map(|p| p.display().to_string()),
        k_mult: args.k_mult,
        eps0: args.eps0,
    };

    let spec = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            flags.over(SimulateSpec::from_kv_text(&text)?)
        }
        None => flags,
    };
    let mut resolved = spec.resolve()?;
    let n = resolved.config.params.n();
    let m = resolved.config.params.m();

    let rho = match &resolved.source {
        DataSource::Scenario(name) => {
            let opts = ScenarioOptions {
                cells: None,
                grid: resolved.grid_given.then_some(resolved.config.grid),
                eps0: resolved.eps0,
                k_mult: resolved.k_mult,
            };
            let built = build_scenario(name, n, m, &opts)?;
            resolved.config.grid = built.grid;
            built.rho
        }
        DataSource::Snapshot(path) => {
            let rho = load_snapshot(path)?;
            if rho.grid().n() != n {
                return Err(Error::domain(format!(
                    "snapshot is {}-dimensional but the configuration says n = {n}",
                    rho.grid().n()
                )));
            }
            rho
        }
    };
    resolved.config.params = ProblemParams::new(n, m, rho.mass())?;

    std::fs::create_dir_all(&args.output_dir)?;
    std::fs::write(
        args.output_dir.join("config.txt"),
        SimulateSpec::effective_text(&resolved),
    )?;

    let report = match run(&resolved.config, rho) {
        Ok(report) => report,
        Err(e) => {
            // leave a diagnostic report behind before failing
            std::fs::write(
                args.output_dir.join("report.txt"),
                format!("verdict = error\nmessage = {e}\n"),
            )?;
            return Err(e);
        }
    };

    let mut csv = Vec::new();
    write_series_csv(&report, &mut csv)?;
    std::fs::write(args.output_dir.join("series.csv"), csv)?;
    let mut txt = Vec::new();
    write_report_txt(&report, &mut txt)?;
    std::fs::write(args.output_dir.join("report.txt"), txt)?;

    println!("verdict = {}", report.verdict.kind);
    println!("steps = {}", report.total_steps);
    println!("series_rows = {}", report.series.len());
    Ok(verdict_exit(report.verdict.kind))
}

fn cmd_example1(args: &Example1Args) -> Result<i32> {
    let params = match ProblemParams::new(args.n, args.m, args.eps0) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(1);
        }
    };
    if !(args.eps0 > 0.0) {
        eprintln!("error: eps0 must be positive");
        return Ok(1);
    }
    let e = example1_thresholds(&params, args.eps0)?;
    let k = 2.0 * e.k0;
    let norm_ok = relation_norm_holds(&params, args.eps0, k)?;
    let energy_ok = relation_energy_holds(&params, args.eps0, k)?;
    println!("k1 = {:.16e}", e.k1);
    println!("k2 = {:.16e}", e.k2);
    println!("k0 = {:.16e}", e.k0);
    println!("k = {:.16e}", k);
    println!("norm_condition_at_2k0 = {norm_ok}");
    println!("energy_condition_at_2k0 = {energy_ok}");
    if !(norm_ok && energy_ok) {
        eprintln!("error: substitution check failed at K = 2 K0");
        return Ok(1);
    }
    Ok(0)
}

struct SweepRow {
    amp: f64,
    width: f64,
    outcome: Result<(f64, f64, f64, Regime, String)>,
}

fn sweep_cell(
    n: u32,
    m: f64,
    amp: f64,
    width: f64,
    cells: usize,
    simulate: bool,
    sim_t_end: f64,
) -> Result<(f64, f64, f64, Regime, String)> {
    let r_max = 8.0 * width;
    let grid = Arc::new(RadialGrid::new(n, r_max, cells, Spacing::Uniform)?);
    let rho = project_profile(&grid, move |r| amp * (-(r / width) * (r / width)).exp())?;
    let classification = classify_field(&rho, m)?;
    let f0 = free_energy(&rho, m, 0.0)?;
    let verdict = if simulate {
        let config = crate::dynamics::RunConfig {
            params: ProblemParams::new(n, m, rho.mass())?,
            epsilon: 0.0,
            grid: GridSpec {
                r_max,
                cells,
                spacing: Spacing::Uniform,
            },
            t_end: sim_t_end,
            dt_init: 1e-3,
            dt_min: 1e-9,
            cfl: 0.4,
            output_every: 50,
            attraction_enabled: true,
            blowup_lm_factor: 10.0,
            tail_mass_tol: 1e-8,
            max_steps: 400_000,
        };
        match run(&config, rho.clone()) {
            Ok(report) => report.verdict.kind.to_string(),
            Err(e) => format!("error: {e}").replace(',', ";"),
        }
    } else {
        String::new()
    };
    Ok((
        rho.mass(),
        lcrit_norm(&rho),
        f0,
        classification.regime,
        verdict,
    ))
}

fn cmd_sweep(args: &SweepArgs) -> Result<i32> {
    if !args.amps.is_empty() && !args.masses.is_empty() {
        return Err(Error::Config("give --amps or --masses, not both".into()));
    }
    let n = args.n;
    let m = args.m;
    ProblemParams::new(n, m, 1.0)?;
    let nf = n as f64;

    // outer product of amplitude-like values and widths
    let mut cells_spec: Vec<(f64, f64)> = Vec::new();
    for &w in &args.widths {
        if !args.masses.is_empty() {
            for &mass in &args.masses {
                let amp = mass / (std::f64::consts::PI.powf(nf / 2.0) * w.powf(nf));
                cells_spec.push((amp, w));
            }
        } else {
            for &amp in &args.amps {
                cells_spec.push((amp, w));
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    let rows: Vec<SweepRow> = pool.install(|| {
        use rayon::prelude::*;
        cells_spec
            .par_iter()
            .map(|&(amp, width)| SweepRow {
                amp,
                width,
                outcome: sweep_cell(n, m, amp, width, args.cells, args.simulate, args.sim_t_end),
            })
            .collect()
    });

    std::fs::create_dir_all(&args.output_dir)?;
    let mut out = Vec::new();
    writeln!(out, "amp,width,mass,lcrit_norm,F0,regime,verdict")?;
    for row in &rows {
        match &row.outcome {
            Ok((mass, norm, f0, regime, verdict)) => writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{}",
                row.amp, row.width, mass, norm, f0, regime, verdict
            )?,
            Err(e) => writeln!(
                out,
                "{:.16e},{:.16e},nan,nan,nan,error,{}",
                row.amp,
                row.width,
                e.to_string().replace(',', ";")
            )?,
        }
    }
    std::fs::write(args.output_dir.join("phase.csv"), out)?;
    println!("cells = {}", rows.len());
    Ok(0)
}
