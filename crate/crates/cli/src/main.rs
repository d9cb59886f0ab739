use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mxm_core::diagnostics::{CsvWriter, Monitor};
use mxm_core::evolution::{compare_mollified, run, Problem, SimState};
use mxm_core::io::Snapshot;
use mxm_core::models::{MatterModel, Model};
use mxm_core::quasistatic::{eta_convergence_study, run_reduced, slaved};
use mxm_core::scenario::Scenario;
use mxm_core::validate::run_suite;
use mxm_core::Error;

#[derive(Parser)]
#[command(name = "mxm", version, about = "Spectral Maxwell–matter simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Directory for CSV, JSON and snapshot output.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,

    /// Write a binary snapshot every this many steps.
    #[arg(long, global = true)]
    snapshots: Option<usize>,

    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for grid loops.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the full Maxwell–matter system.
    Run { scenario: PathBuf },
    /// Integrate the quasi-stationary limit model.
    Reduced { scenario: PathBuf },
    /// Sweep η and fit the decay of the non-stationary field.
    QuasistaticStudy { scenario: PathBuf },
    /// Mollified fixed points against an unmollified reference.
    CompareMollified {
        scenario: PathBuf,
        #[arg(long, value_delimiter = ',')]
        n_list: Option<Vec<usize>>,
    },
    /// Run the built-in invariant suite.
    Validate,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(k) = cli.threads {
        if k == 0 {
            eprintln!("error: invalid config key `threads`: must be positive");
            return ExitCode::from(2);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .expect("global thread pool set once");
    }
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_numerical() {
        3
    } else if matches!(e, Error::Io(_)) {
        1
    } else {
        2
    }
}

fn dispatch(cli: &Cli) -> mxm_core::Result<ExitCode> {
    if let Command::Validate = cli.command {
        return validate();
    }
    let path = match &cli.command {
        Command::Run { scenario }
        | Command::Reduced { scenario }
        | Command::QuasistaticStudy { scenario }
        | Command::CompareMollified { scenario, .. } => scenario,
        Command::Validate => unreachable!(),
    };
    let sc = Scenario::load(path)?;
    let seed = cli.seed.unwrap_or(sc.seed);
    let problem = sc.problem()?;
    std::fs::create_dir_all(&cli.out_dir)?;
    match &cli.command {
        Command::Run { .. } => full_run(&sc, &problem, seed, &cli.out_dir, cli.snapshots),
        Command::Reduced { .. } => reduced(&sc, &problem, seed, &cli.out_dir),
        Command::QuasistaticStudy { .. } => study(&sc, &problem, seed, &cli.out_dir),
        Command::CompareMollified { n_list, .. } => mollified(&sc, &problem, seed, &cli.out_dir, n_list.clone()),
        Command::Validate => unreachable!(),
    }?;
    Ok(ExitCode::SUCCESS)
}

fn validate() -> mxm_core::Result<ExitCode> {
    let results = run_suite()?;
    let mut failed = 0;
    for r in &results {
        let tag = if r.passed() { "PASS" } else { "FAIL" };
        println!("{tag} {:<52} {:.3e} (tol {:.1e})", r.name, r.value, r.tolerance);
        failed += usize::from(!r.passed());
    }
    println!("{} checks, {failed} failed", results.len());
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn initial_state(sc: &Scenario, p: &Problem<Model>, seed: u64) -> mxm_core::Result<SimState> {
    let v = sc.initial_matter(p, seed)?;
    let u = sc.initial_field(p, seed)?;
    p.make_initial(&u, &v)
}

fn create(dir: &Path, name: &str) -> mxm_core::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn full_run(
    sc: &Scenario,
    p: &Problem<Model>,
    seed: u64,
    out_dir: &Path,
    snapshots: Option<usize>,
) -> mxm_core::Result<()> {
    let cfg = sc.integrator()?;
    let s0 = initial_state(sc, p, seed)?;
    let mut monitor = Monitor::new(p, &s0)?;
    if !sc.monitor.constraint {
        monitor = monitor.without_constraint();
    }
    let mut csv = CsvWriter::new(create(out_dir, &sc.monitor.csv)?, p.model.name(), &monitor.columns())?;
    let (steps, _) = cfg.steps();
    let stride = sc.monitor.stride.max(1);
    if snapshots == Some(0) {
        return Err(Error::config("snapshots", "stride must be positive"));
    }
    let mut k = 0usize;
    let end = run(p, s0, &cfg, 1, |s| {
        if k % stride == 0 || k == steps {
            csv.write(&monitor.record(s)?)?;
        }
        if let Some(every) = snapshots {
            if k % every == 0 || k == steps {
                let snap = Snapshot::from_state(&s.u, &s.v, &p.mask)?;
                snap.write_to(create(out_dir, &format!("snapshot_{k:06}.mxmt"))?)?;
            }
        }
        k += 1;
        Ok(())
    })?;
    csv.finish()?;
    let last = monitor.record(&end)?;
    println!(
        "t = {} em_norm = {:e} matter_sup = {:e} constraint_residual = {:e} bound_ratio = {:e}",
        last.t, last.em_norm, last.matter_sup, last.constraint_residual, last.bound_ratio
    );
    Ok(())
}

fn reduced(sc: &Scenario, p: &Problem<Model>, seed: u64, out_dir: &Path) -> mxm_core::Result<()> {
    let cfg = sc.integrator()?;
    let v0 = sc.initial_matter(p, seed)?;
    let h3 = p.ws.grid().cell_volume();
    let moduli = v0.moduli();
    let mut out = create(out_dir, &sc.monitor.csv)?;
    writeln!(out, "# schema=mxm-reduced/1 model={}", p.model.name())?;
    writeln!(out, "t,matter_l2,matter_sup,slaved_em_norm,modulus_dev")?;
    let end = run_reduced(p, &v0, cfg.dt, cfg.t_end, sc.monitor.stride, |t, v| {
        let u = slaved(p, v)?;
        let dev = v
            .moduli()
            .iter()
            .zip(&moduli)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let em = mxm_core::grid::weighted_norm(&u, &p.kappa)?;
        writeln!(out, "{t:e},{:e},{:e},{em:e},{dev:e}", v.l2_norm(h3), v.sup_norm())?;
        Ok(())
    })?;
    out.flush()?;
    println!("t = {} matter_l2 = {:e}", cfg.t_end, end.l2_norm(h3));
    Ok(())
}

fn study(sc: &Scenario, p: &Problem<Model>, seed: u64, out_dir: &Path) -> mxm_core::Result<()> {
    let cfg = sc.study(sc.integrator.cfl_factor)?;
    let s0 = initial_state(sc, p, seed)?;
    let result = eta_convergence_study(p, &s0, &cfg)?;
    let mut out = create(out_dir, "eta_study.csv")?;
    writeln!(out, "# schema=mxm-eta-study/1 model={}", p.model.name())?;
    writeln!(out, "eta,pu_norm,v_deviation")?;
    let cell = |x: Option<f64>| x.map_or("nan".to_string(), |x| format!("{x:e}"));
    for r in &result.rows {
        writeln!(out, "{:e},{},{}", r.eta, cell(r.pu_norm), cell(r.v_deviation))?;
        if let Some(e) = &r.error {
            eprintln!("eta = {}: {e}", r.eta);
        }
    }
    out.flush()?;
    let json = serde_json::to_string_pretty(&result).expect("study serializes");
    std::fs::write(out_dir.join("eta_study.json"), json + "\n")?;
    match result.slope {
        Some(s) => println!("slope = {s:.4} v_deviation_monotone = {}", result.v_deviation_monotone),
        None => println!("slope undefined (fewer than two usable rows)"),
    }
    Ok(())
}

fn mollified(
    sc: &Scenario,
    p: &Problem<Model>,
    seed: u64,
    out_dir: &Path,
    n_list: Option<Vec<usize>>,
) -> mxm_core::Result<()> {
    let (cfg, reference_dt, from_file) = sc.fixed_point()?;
    let n_list = n_list
        .or(from_file)
        .ok_or_else(|| Error::config("n_list", "pass --n-list or set fixed_point.n_list"))?;
    let s0 = initial_state(sc, p, seed)?;
    let result = compare_mollified(p, &s0, &cfg, &n_list, reference_dt)?;
    let mut out = create(out_dir, "mollified.csv")?;
    writeln!(out, "# schema=mxm-mollified/1 model={}", p.model.name())?;
    writeln!(out, "n,distance,iterations,max_ratio")?;
    for r in &result.rows {
        writeln!(out, "{},{:e},{},{:e}", r.index, r.distance, r.iterations, r.max_ratio)?;
    }
    out.flush()?;
    let json = serde_json::json!({
        "rows": result.rows,
        "time_error": result.time_error,
        "monotone": result.monotone,
        "final_ratio": result.final_ratio(),
    });
    std::fs::write(
        out_dir.join("mollified.json"),
        serde_json::to_string_pretty(&json).expect("json") + "\n",
    )?;
    println!(
        "monotone = {} final_ratio = {:.3} time_error = {:e}",
        result.monotone,
        result.final_ratio(),
        result.time_error
    );
    Ok(())
}
