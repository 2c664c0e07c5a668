//! Command-line harness: full runs, ROM construction, online runs, the
//! results table and invariant checks.

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use hyperhydro::bench::{
    build_rom, emit_report, instantiate, report_rows, run_offline, run_online, BuiltRom,
    OfflineRun, RomConfig, RunReport, SimConfig, StepLog, REPORT_COLUMNS,
};
use hyperhydro::io::{
    load_offline, load_rom, rom_dir, run_dir, save_offline, save_rom, write_json, write_step_log,
};
use hyperhydro::problems::{make_problem, DiscretizationConfig, Problem, ProblemKind, ProblemSpec};
use hyperhydro::rom::{conservation_defect, project_state, DtPolicy};
use hyperhydro::Mode;

#[derive(Parser, Debug)]
#[command(
    name = "hyperhydro",
    version,
    about = "Hyperreduced Lagrangian hydrodynamics benchmarks"
)]
struct Cli {
    /// Output root.
    #[arg(
        long,
        global = true,
        env = "HYPERHYDRO_OUT",
        default_value = "hyperhydro-out"
    )]
    out: PathBuf,
    /// JSON file whose fields override the command-line flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Problems processed concurrently.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the full model and store windowed snapshots.
    FullRun(Opts),
    /// Build bases and reduced rules from stored snapshots.
    BuildRom(Opts),
    /// Integrate a stored ROM and compare with the full run.
    RomRun {
        #[command(flatten)]
        opts: Opts,
        /// Replay the full model's step sizes instead of CFL control.
        #[arg(long)]
        replay_dt: bool,
    },
    /// Run the whole pipeline for every problem and mode and write the table.
    Report(Opts),
    /// Check conservation and bookkeeping invariants.
    Verify(Opts),
}

#[derive(Args, Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Opts {
    /// Problems (comma separated); all four when omitted.
    #[arg(long, value_delimiter = ',')]
    problem: Vec<String>,
    /// Modes (comma separated); both when omitted.
    #[arg(long, value_delimiter = ',')]
    mode: Vec<String>,
    /// Refinement level.
    #[arg(long)]
    m: Option<u32>,
    /// Kinematic order.
    #[arg(long)]
    k: Option<usize>,
    /// Retained POD energy fraction
    #[arg(long)]
    e_sigma: Option<f64>,
    /// Relative quadrature tolerance
    #[arg(long)]
    eps_rel: Option<f64>,
    /// Full-model steps per window.
    #[arg(long)]
    ns: Option<usize>,
    /// Final time
    #[arg(long)]
    t_final: Option<f64>,
    /// Quarter of the final time.
    #[arg(long)]
    short: bool,
    /// LQ-precondition the NNLS systems.
    #[arg(long)]
    precondition: bool,
}

impl Opts {
    /// Fields set in `over` replace ours.
    fn overridden_by(mut self, over: Opts) -> Opts {
        if !over.problem.is_empty() {
            self.problem = over.problem;
        }
        if !over.mode.is_empty() {
            self.mode = over.mode;
        }
        self.m = over.m.or(self.m);
        self.k = over.k.or(self.k);
        self.e_sigma = over.e_sigma.or(self.e_sigma);
        self.eps_rel = over.eps_rel.or(self.eps_rel);
        self.ns = over.ns.or(self.ns);
        self.t_final = over.t_final.or(self.t_final);
        self.short |= over.short;
        self.precondition |= over.precondition;
        self
    }
}

/// Resolved settings of one invocation.
#[derive(Debug, Clone)]
struct Settings {
    problems: Vec<ProblemKind>,
    modes: Vec<Mode>,
    disc: DiscretizationConfig,
    sim: SimConfig,
    e_sigma: Option<f64>,
    eps_rel: Option<f64>,
    t_final: Option<f64>,
    short: bool,
    precondition: bool,
    out: PathBuf,
}

impl Settings {
    fn new(opts: Opts, out: PathBuf) -> Result<Self> {
        let problems = if opts.problem.is_empty() {
            ProblemKind::ALL.to_vec()
        } else {
            opts.problem
                .iter()
                .map(|p| p.parse())
                .collect::<hyperhydro::Result<Vec<_>>>()?
        };
        let modes = if opts.mode.is_empty() {
            Mode::ALL.to_vec()
        } else {
            opts.mode
                .iter()
                .map(|m| m.parse())
                .collect::<hyperhydro::Result<Vec<_>>>()?
        };
        let mut disc = DiscretizationConfig::default();
        disc.m = opts.m.unwrap_or(disc.m);
        disc.k = opts.k.unwrap_or(disc.k);
        let mut sim = SimConfig::default();
        sim.ns = opts.ns.unwrap_or(sim.ns);
        if let Some(e) = opts.e_sigma {
            if !(e > 0.0 && e <= 1.0) {
                bail!("--e-sigma must lie in (0, 1], got {e}");
            }
        }
        Ok(Settings {
            problems,
            modes,
            disc,
            sim,
            e_sigma: opts.e_sigma,
            eps_rel: opts.eps_rel,
            t_final: opts.t_final,
            short: opts.short,
            precondition: opts.precondition,
            out,
        })
    }

    fn problem(&self, kind: ProblemKind) -> Result<Problem<f64>> {
        let mut spec = ProblemSpec::new(kind);
        if let Some(t) = self.t_final {
            spec.t_final = t;
        }
        if self.short {
            spec.t_final /= 4.0;
        }
        Ok(make_problem(spec, &self.disc)?)
    }

    fn rom_config(&self, mode: Mode) -> RomConfig {
        let mut rc = RomConfig::new(mode);
        if let Some(e) = self.e_sigma {
            rc.e_sigma = e;
        }
        if let Some(e) = self.eps_rel {
            rc.eqp = rc.eqp.with_eps_rel(e);
        }
        rc.eqp.precondition = self.precondition;
        rc
    }
}

fn offline(s: &Settings, p: &Problem<f64>) -> Result<OfflineRun> {
    let dir = run_dir(&s.out, p.spec.kind.name());
    if let Ok(run) = load_offline(&dir, p) {
        let end = run.schedule.boundaries.last().copied().unwrap_or(0.0);
        if (end - p.spec.t_final).abs() <= 1e-12 * p.spec.t_final
            && run.schedule.samples_per_window == s.sim.ns
        {
            return Ok(run);
        }
    }
    full_run(s, p)
}

fn full_run(s: &Settings, p: &Problem<f64>) -> Result<OfflineRun> {
    let run = run_offline(p, &s.sim).with_context(|| format!("full run of {}", p.spec.kind))?;
    save_offline(&run_dir(&s.out, p.spec.kind.name()), p, &run)?;
    println!(
        "{:<13} full: {} steps ({} rejected), {} windows, TE drift {:.2e}, {:.2} s",
        p.spec.kind.name(),
        run.stats.steps,
        run.stats.rejections,
        run.schedule.n_windows(),
        run.energy_drift(),
        run.stats.wall_seconds
    );
    Ok(run)
}

fn build(s: &Settings, p: &Problem<f64>, run: &OfflineRun, mode: Mode) -> Result<BuiltRom> {
    let rom = build_rom(p, run, &s.rom_config(mode))
        .with_context(|| format!("building {mode} ROM of {}", p.spec.kind))?;
    let manifest = save_rom(&rom_dir(&s.out, p.spec.kind.name(), mode), p, &rom)?;
    let j = p.disc.rule.len();
    for w in &manifest.windows {
        let jh: Vec<String> = w.j_hat.iter().map(|n| format!("{n}/{j}")).collect();
        println!(
            "{:<13} {mode} window {:>3}: n_v {:>3} n_e {:>3} n_x {:>3} J_hat {}",
            p.spec.kind.name(),
            w.window_id,
            w.n_v,
            w.n_e,
            w.n_x,
            jh.join(" ")
        );
    }
    Ok(rom)
}

fn rom_run(
    s: &Settings,
    p: &Problem<f64>,
    run: &OfflineRun,
    rom: &BuiltRom,
    policy: &DtPolicy,
) -> Result<RunReport> {
    let mut log: Vec<StepLog> = Vec::new();
    let report = run_online(p, run, rom, policy, Some(&mut log));
    let dir = rom_dir(&s.out, p.spec.kind.name(), rom.mode);
    std::fs::create_dir_all(&dir)?;
    write_step_log(&dir.join("steps.csv"), &log)?;
    write_json(&dir.join("report.json"), &report)?;
    Ok(report)
}

fn print_table(reports: &[RunReport]) {
    let rows = report_rows(reports);
    let mut width: Vec<usize> = REPORT_COLUMNS.iter().map(|c| c.len()).collect();
    for r in &rows {
        for (w, c) in width.iter_mut().zip(r.iter()) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: Vec<&str>| {
        let s: Vec<String> = cells
            .iter()
            .zip(&width)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        println!("{}", s.join("  ").trim_end());
    };
    line(REPORT_COLUMNS.to_vec());
    for r in &rows {
        line(r.iter().map(String::as_str).collect());
    }
}

/// Runs `f` on every problem, `jobs` at a time, keeping the input order.
fn per_problem<R: Send>(
    s: &Settings,
    jobs: usize,
    f: impl Fn(ProblemKind) -> Result<R> + Sync,
) -> Result<Vec<R>> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<R>>>> =
        Mutex::new((0..s.problems.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, s.problems.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&kind) = s.problems.get(i) else {
                    break;
                };
                let r = f(kind);
                results.lock().expect("no panics while holding the lock")[i] = Some(r);
            });
        }
    });
    results
        .into_inner()
        .expect("threads joined")
        .into_iter()
        .map(|r| r.expect("every problem visited"))
        .collect()
}

#[derive(Clone)]
struct Check {
    name: String,
    pass: bool,
    detail: String,
}

fn verify_problem(s: &Settings, kind: ProblemKind) -> Result<Vec<Check>> {
    let p = s.problem(kind)?;
    let run = offline(s, &p)?;
    let mut checks = vec![Check {
        name: format!("{kind} full-model energy drift <= 1e-11"),
        pass: run.energy_drift() <= 1e-11,
        detail: format!("{:.2e}", run.energy_drift()),
    }];
    let mut delta = Vec::new();
    for &mode in &s.modes {
        let rom = build_rom(&p, &run, &s.rom_config(mode))?;
        if mode == Mode::Ceqp {
            let windows = instantiate(&p, &rom)?;
            let mut worst = 0.0f64;
            for (w, snaps) in windows.iter().zip(&run.snapshots) {
                for st in &snaps.states {
                    let rs = project_state(w, st, &p.mass);
                    let f = w.evaluate(&p.disc, &rs)?;
                    if let Some((d, scale)) = conservation_defect(&f, &rs.v) {
                        worst = worst.max(d.abs() / scale.max(f64::MIN_POSITIVE));
                    }
                }
            }
            checks.push(Check {
                name: format!("{kind} ceqp reduced power identity <= 1e-13"),
                pass: worst <= 1e-13,
                detail: format!("{worst:.2e}"),
            });
        }
        let r = run_online(&p, &run, &rom, &DtPolicy::Adaptive(s.sim.cfl), None);
        checks.push(Check {
            name: format!("{kind} {mode} online run completes"),
            pass: r.failure.is_none(),
            detail: r
                .failure
                .clone()
                .unwrap_or_else(|| format!("{} steps", r.rom_steps)),
        });
        checks.push(Check {
            name: format!("{kind} {mode} integrand evaluations equal J_hat"),
            pass: r.evals_match,
            detail: format!(
                "{:.1} points per stage",
                r.j_hat_v + r.j_hat_e.unwrap_or(0.0)
            ),
        });
        if mode == Mode::Ceqp {
            let d = r.max_step_delta_e.unwrap_or(f64::INFINITY);
            checks.push(Check {
                name: format!("{kind} ceqp energy change <= 1e-11 at every step"),
                pass: d <= 1e-11,
                detail: format!("{d:.2e}"),
            });
        }
        delta.push((mode, r.delta_e));
    }
    if let [(_, Some(b)), (_, Some(c))] = delta.as_slice() {
        checks.push(Check {
            name: format!("{kind} ceqp energy change <= beqp"),
            pass: c <= b,
            detail: format!("{c:.2e} vs {b:.2e}"),
        });
    }
    Ok(checks)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let file_opts = |opts: Opts| -> Result<Opts> {
        match &cli.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                let over: Opts = serde_json::from_str(&text)
                    .with_context(|| format!("parsing {}", path.display()))?;
                Ok(opts.overridden_by(over))
            }
            None => Ok(opts),
        }
    };
    let settings = |opts: &Opts| -> Result<Settings> {
        Settings::new(file_opts(opts.clone())?, cli.out.clone())
    };
    let started = Instant::now();
    match &cli.cmd {
        Command::FullRun(opts) => {
            let s = settings(opts)?;
            per_problem(&s, cli.jobs, |kind| {
                full_run(&s, &s.problem(kind)?).map(|_| ())
            })?;
        }
        Command::BuildRom(opts) => {
            let s = settings(opts)?;
            per_problem(&s, cli.jobs, |kind| {
                let p = s.problem(kind)?;
                let run = offline(&s, &p)?;
                for &mode in &s.modes {
                    build(&s, &p, &run, mode)?;
                }
                Ok(())
            })?;
        }
        Command::RomRun { opts, replay_dt } => {
            let s = settings(opts)?;
            let reports = per_problem(&s, cli.jobs, |kind| {
                let p = s.problem(kind)?;
                let run = offline(&s, &p)?;
                let policy = if *replay_dt {
                    DtPolicy::Prescribed(run.dts.clone())
                } else {
                    DtPolicy::Adaptive(s.sim.cfl)
                };
                let mut out = Vec::new();
                for &mode in &s.modes {
                    let dir = rom_dir(&s.out, kind.name(), mode);
                    let rom = match load_rom(&dir, &p) {
                        Ok(rom) if rom.schedule == run.schedule => rom,
                        _ => build(&s, &p, &run, mode)?,
                    };
                    out.push(rom_run(&s, &p, &run, &rom, &policy)?);
                }
                Ok(out)
            })?;
            print_table(&reports.concat());
        }
        Command::Report(opts) => {
            let s = settings(opts)?;
            let reports = per_problem(&s, cli.jobs, |kind| {
                let p = s.problem(kind)?;
                let run = full_run(&s, &p)?;
                let mut out = Vec::new();
                for &mode in &s.modes {
                    let rom = build(&s, &p, &run, mode)?;
                    out.push(rom_run(&s, &p, &run, &rom, &DtPolicy::Adaptive(s.sim.cfl))?);
                }
                Ok(out)
            })?;
            let reports = reports.concat();
            emit_report(&s.out, &reports)?;
            print_table(&reports);
            println!(
                "wrote {} and {}",
                s.out.join("report.csv").display(),
                s.out.join("report.json").display()
            );
        }
        Command::Verify(opts) => {
            let s = settings(opts)?;
            let checks = per_problem(&s, cli.jobs, |kind| verify_problem(&s, kind))?.concat();
            let failed = checks.iter().filter(|c| !c.pass).count();
            for c in &checks {
                println!(
                    "{} {} ({})",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                );
            }
            if failed > 0 {
                bail!("{failed} of {} checks failed", checks.len());
            }
        }
    }
    eprintln!("done in {:.1} s", started.elapsed().as_secs_f64());
    Ok(())
}
