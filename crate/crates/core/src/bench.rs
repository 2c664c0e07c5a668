//! Offline/online orchestration and run reports.

use serde::{Deserialize, Serialize};

use crate::eqp::{
    assemble_beqp_system_e, assemble_beqp_system_v, assemble_ceqp_system, beqp_test_functions,
    build_reduced_rule, EqpConfig, RuleStats,
};
use crate::error::{Error, Result};
use crate::fem::QuadRule;
use crate::hydro::{run_full, CflParams, FullModel, FullState, RunStats};
use crate::mode::Mode;
use crate::pod::{
    build_window_bases, OffsetPolicy, ReducedBasis, SnapshotCadence, SnapshotSet, WindowSchedule,
};
use crate::problems::Problem;
use crate::rom::{rom_total_energy, run_rom, DtPolicy, RomWindow};

/// Full-model run settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub cfl: CflParams,
    /// Accepted steps per window.
    pub ns: usize,
    pub cadence: SnapshotCadence,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            cfl: CflParams::default(),
            ns: 10,
            cadence: SnapshotCadence::StepsAndStages,
        }
    }
}

/// Result of the full-model (training) run.
#[derive(Clone, Debug)]
pub struct OfflineRun {
    pub schedule: WindowSchedule,
    pub snapshots: Vec<SnapshotSet<f64>>,
    /// Accepted step sizes in order.
    pub dts: Vec<f64>,
    pub initial: FullState<f64>,
    pub final_state: FullState<f64>,
    pub stats: RunStats,
    pub te_initial: f64,
    pub te_final: f64,
}

impl OfflineRun {
    pub fn energy_drift(&self) -> f64 {
        (self.te_final - self.te_initial).abs() / self.te_initial.abs()
    }

    /// The first `n` windows of the run, ending at the last state of window
    /// `n - 1`. Wall time is scaled by the fraction of steps kept.
    pub fn truncated(&self, problem: &Problem<f64>, n: usize) -> Result<OfflineRun> {
        if n == 0 || n > self.schedule.n_windows() {
            return Err(Error::Config(format!(
                "cannot keep {n} of {} windows",
                self.schedule.n_windows()
            )));
        }
        let steps = (n * self.schedule.samples_per_window).min(self.dts.len());
        let final_state = self.snapshots[n - 1]
            .states
            .iter()
            .max_by(|a, b| a.t.total_cmp(&b.t))
            .cloned()
            .ok_or_else(|| Error::Config("empty window".into()))?;
        let te_final = FullModel::new(&problem.disc, &problem.mass)
            .total_energy(&final_state)
            .total;
        let frac = steps as f64 / self.dts.len() as f64;
        Ok(OfflineRun {
            schedule: WindowSchedule {
                boundaries: self.schedule.boundaries[..=n].to_vec(),
                samples_per_window: self.schedule.samples_per_window,
            },
            snapshots: self.snapshots[..n].to_vec(),
            dts: self.dts[..steps].to_vec(),
            initial: self.initial.clone(),
            final_state,
            stats: RunStats {
                steps,
                wall_seconds: self.stats.wall_seconds * frac,
                ..self.stats.clone()
            },
            te_initial: self.te_initial,
            te_final,
        })
    }
}

/// Runs the full model to `problem.spec.t_final`, collecting windowed
/// snapshots. Window `w` holds the states of its steps and both endpoint
/// states; with [`SnapshotCadence::StepsAndStages`] the midpoint stages are
/// added and every state is paired with the velocity its energy update is
/// tested against.
pub fn run_offline(problem: &Problem<f64>, cfg: &SimConfig) -> Result<OfflineRun> {
    let model = FullModel::new(&problem.disc, &problem.mass);
    let te_initial = model.total_energy(&problem.initial).total;
    let mut steps: Vec<(FullState<f64>, FullState<f64>)> = Vec::new();
    let mut dts = Vec::new();
    let (final_state, stats) = run_full(
        &model,
        problem.initial.clone(),
        problem.spec.t_final,
        &cfg.cfl,
        |_, out, dt| {
            steps.push((out.half.clone(), out.next.clone()));
            dts.push(dt);
        },
    )?;
    let te_final = model.total_energy(&final_state).total;

    // States along the trajectory: w_0, w_1, ...; stage k sits between.
    let mut states = vec![problem.initial.clone()];
    states.extend(steps.iter().map(|(_, n)| n.clone()));
    let times: Vec<f64> = states.iter().map(|s| s.t).collect();
    let schedule = WindowSchedule::from_step_times(&times, cfg.ns)?;
    let n_steps = steps.len();

    let mut snapshots = Vec::with_capacity(schedule.n_windows());
    for w in 0..schedule.n_windows() {
        let first = w * cfg.ns;
        let last = ((w + 1) * cfg.ns).min(n_steps);
        let mut set = SnapshotSet::new(w);
        for k in first..=last {
            match cfg.cadence {
                SnapshotCadence::Steps => set.push(states[k].clone()),
                SnapshotCadence::StepsAndStages => {
                    // w_k is tested against v_{k+1/2}; the stage against the
                    // step average.
                    let test = if k < n_steps {
                        steps[k].0.v.clone()
                    } else {
                        states[k].v.clone()
                    };
                    set.push_with_test(states[k].clone(), test);
                    if k < last {
                        let v_bar: Vec<f64> = states[k]
                            .v
                            .iter()
                            .zip(&states[k + 1].v)
                            .map(|(a, b)| 0.5 * (a + b))
                            .collect();
                        set.push_with_test(steps[k].0.clone(), v_bar);
                    }
                }
            }
        }
        snapshots.push(set);
    }
    Ok(OfflineRun {
        schedule,
        snapshots,
        dts,
        initial: problem.initial.clone(),
        final_state,
        stats,
        te_initial,
        te_final,
    })
}

/// Reduced-model construction settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RomConfig {
    pub mode: Mode,
    pub e_sigma: f64,
    pub offsets: OffsetPolicy,
    pub eqp: EqpConfig,
}

impl RomConfig {
    pub fn new(mode: Mode) -> Self {
        RomConfig {
            mode,
            e_sigma: 0.9999,
            offsets: OffsetPolicy::Zero,
            eqp: EqpConfig::new(mode),
        }
    }
}

/// Offline products of one window.
#[derive(Clone, Debug)]
pub struct WindowArtifact {
    pub basis: ReducedBasis<f64>,
    /// Velocity rule (basic) or the single combined rule (conservative).
    pub rule_v: QuadRule<f64>,
    /// Energy rule of the basic variant.
    pub rule_e: Option<QuadRule<f64>>,
    pub rule_stats: Vec<RuleStats>,
}

/// All windows of a reduced model.
#[derive(Clone, Debug)]
pub struct BuiltRom {
    pub mode: Mode,
    pub e_sigma: f64,
    pub schedule: WindowSchedule,
    pub windows: Vec<WindowArtifact>,
    pub build_seconds: f64,
}

/// Builds bases and reduced rules for every window.
pub fn build_rom(
    problem: &Problem<f64>,
    offline: &OfflineRun,
    cfg: &RomConfig,
) -> Result<BuiltRom> {
    let start = std::time::Instant::now();
    let disc = &problem.disc;
    let mass = &problem.mass;
    let mut windows = Vec::with_capacity(offline.snapshots.len());
    for snaps in &offline.snapshots {
        let basis = build_window_bases(snaps, cfg.e_sigma, cfg.mode, mass, cfg.offsets)?;
        let train = strided(snaps, cfg.eqp.snapshot_stride);
        let in_window = |e: Error| Error::Window {
            window: snaps.window_id,
            source: Box::new(e),
        };
        let art = match cfg.mode {
            Mode::Beqp => {
                let (psi_v, psi_e) = beqp_test_functions(&basis, mass);
                let sv = assemble_beqp_system_v(disc, &psi_v, &train, &cfg.eqp.thresholds)?;
                let se = assemble_beqp_system_e(disc, &psi_e, &train, &cfg.eqp.thresholds)?;
                let (rv, stv) = build_reduced_rule(&sv, &cfg.eqp, &disc.rule).map_err(in_window)?;
                let (re, ste) = build_reduced_rule(&se, &cfg.eqp, &disc.rule).map_err(in_window)?;
                WindowArtifact {
                    basis,
                    rule_v: rv,
                    rule_e: Some(re),
                    rule_stats: vec![stv, ste],
                }
            }
            Mode::Ceqp => {
                let sys = assemble_ceqp_system(disc, &basis, &train, &cfg.eqp.thresholds)?;
                let (r, st) = build_reduced_rule(&sys, &cfg.eqp, &disc.rule).map_err(in_window)?;
                WindowArtifact {
                    basis,
                    rule_v: r,
                    rule_e: None,
                    rule_stats: vec![st],
                }
            }
        };
        windows.push(art);
    }
    Ok(BuiltRom {
        mode: cfg.mode,
        e_sigma: cfg.e_sigma,
        schedule: offline.schedule.clone(),
        windows,
        build_seconds: start.elapsed().as_secs_f64(),
    })
}

fn strided(snaps: &SnapshotSet<f64>, stride: usize) -> SnapshotSet<f64> {
    if stride <= 1 {
        return snaps.clone();
    }
    let mut out = SnapshotSet::new(snaps.window_id);
    let last = snaps.len() - 1;
    for k in (0..snaps.len()).filter(|k| k % stride == 0 || *k == last) {
        out.push_with_test(snaps.states[k].clone(), snaps.test_velocity(k).to_vec());
    }
    out
}

/// Online operators of every window.
pub fn instantiate(problem: &Problem<f64>, rom: &BuiltRom) -> Result<Vec<RomWindow<f64>>> {
    rom.windows
        .iter()
        .map(|w| {
            RomWindow::new(
                &problem.disc,
                &problem.mass,
                rom.mode,
                w.basis.clone(),
                &w.rule_v,
                w.rule_e.as_ref(),
            )
        })
        .collect()
}

/// One row of the results table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub problem: String,
    pub mode: Mode,
    pub n_windows: usize,
    pub ns: usize,
    pub e_sigma: f64,
    pub err_x: Option<f64>,
    pub err_v: Option<f64>,
    pub err_e: Option<f64>,
    /// `|TE(t_f) - TE(0)| / |TE(0)|`.
    pub delta_e: Option<f64>,
    /// Largest `|TE_k - TE_0| / |TE_0|` over all steps and switches.
    pub max_step_delta_e: Option<f64>,
    /// Window-averaged nonzero weights of the velocity/combined rule and of
    /// the energy rule, with the full point count.
    pub j_hat_v: f64,
    pub j_hat_e: Option<f64>,
    pub j_full: usize,
    pub full_seconds: f64,
    pub rom_seconds: Option<f64>,
    pub speedup: Option<f64>,
    pub full_steps: usize,
    pub rom_steps: usize,
    /// Every reduced force stage touched exactly the nonzero-weight points.
    pub evals_match: bool,
    pub failure: Option<String>,
}

impl RunReport {
    /// Averaged sparsity ratio of the rule that bounds online cost.
    pub fn sparsity(&self) -> f64 {
        self.j_hat_v.max(self.j_hat_e.unwrap_or(0.0)) / self.j_full as f64
    }
}

/// Mass-weighted L2 relative error.
fn rel_err_mass(a: &[f64], b: &[f64], m: &crate::linalg::BandedSym<f64>) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let nd = crate::linalg::dot(&d, &m.mul_vec(&d)).max(0.0).sqrt();
    let nb = crate::linalg::dot(b, &m.mul_vec(b)).max(0.0).sqrt();
    if nb > 0.0 {
        nd / nb
    } else {
        nd
    }
}

/// Per-step log entry of an online run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: usize,
    pub window: usize,
    pub t: f64,
    pub dt: f64,
    pub ie: f64,
    pub ke: f64,
    pub te: f64,
    pub evals: usize,
}

/// Integrates the reduced model and compares the lifted final state with
/// the stored full trajectory.
pub fn run_online(
    problem: &Problem<f64>,
    offline: &OfflineRun,
    rom: &BuiltRom,
    policy: &DtPolicy,
    mut log: Option<&mut Vec<StepLog>>,
) -> RunReport {
    let j_full = problem.disc.rule.len();
    let nw = rom.windows.len().max(1) as f64;
    let j_hat_v = rom
        .windows
        .iter()
        .map(|w| w.rule_v.nnz() as f64)
        .sum::<f64>()
        / nw;
    let j_hat_e = match rom.mode {
        Mode::Beqp => Some(
            rom.windows
                .iter()
                .map(|w| w.rule_e.as_ref().map_or(0, |r| r.nnz()) as f64)
                .sum::<f64>()
                / nw,
        ),
        Mode::Ceqp => None,
    };
    let mut report = RunReport {
        problem: problem.spec.kind.name().to_string(),
        mode: rom.mode,
        n_windows: rom.windows.len(),
        ns: rom.schedule.samples_per_window,
        e_sigma: rom.e_sigma,
        err_x: None,
        err_v: None,
        err_e: None,
        delta_e: None,
        max_step_delta_e: None,
        j_hat_v,
        j_hat_e,
        j_full,
        full_seconds: offline.stats.wall_seconds,
        rom_seconds: None,
        speedup: None,
        full_steps: offline.stats.steps,
        rom_steps: 0,
        evals_match: true,
        failure: None,
    };
    let windows = match instantiate(problem, rom) {
        Ok(w) => w,
        Err(e) => {
            report.failure = Some(e.to_string());
            return report;
        }
    };
    let mass = &problem.mass;
    let te0 = rom_total_energy(
        &windows[0],
        &crate::rom::project_state(&windows[0], &offline.initial, mass),
        mass,
    )
    .total;
    let mut max_dev = 0.0f64;
    let mut evals_match = true;
    let result = run_rom(
        &problem.disc,
        mass,
        &windows,
        &rom.schedule,
        &offline.initial,
        policy,
        |w, step| {
            let expected = w.j_hat_v() + w.j_hat_e();
            evals_match &= step.evals.iter().all(|&n| n == expected);
            let en = rom_total_energy(w, &step.next, mass);
            max_dev = max_dev.max((en.total - te0).abs() / te0.abs());
            if let Some(log) = log.as_deref_mut() {
                log.push(StepLog {
                    step: log.len(),
                    window: step.window,
                    t: step.next.t,
                    dt: step.dt,
                    ie: en.internal,
                    ke: en.kinetic,
                    te: en.total,
                    evals: step.evals[0] + step.evals[1],
                });
            }
        },
    );
    report.evals_match = evals_match;
    report.max_step_delta_e = Some(max_dev);
    match result {
        Ok((w, s, stats)) => {
            let lifted = w.basis.lift(&s.v, &s.e, &s.x, s.t);
            let fs = &offline.final_state;
            report.err_x = Some(rel_err_mass(&lifted.x, &fs.x, &mass.m_v));
            report.err_v = Some(rel_err_mass(&lifted.v, &fs.v, &mass.m_v));
            report.err_e = Some(rel_err_mass(&lifted.e, &fs.e, &mass.m_e));
            let te = rom_total_energy(&w, &s, mass).total;
            report.delta_e = Some((te - te0).abs() / te0.abs());
            report.rom_seconds = Some(stats.wall_seconds);
            report.speedup = Some(offline.stats.wall_seconds / stats.wall_seconds.max(1e-12));
            report.rom_steps = stats.steps;
        }
        Err(e) => report.failure = Some(e.to_string()),
    }
    report
}

/// Column names of the results table.
pub const REPORT_COLUMNS: [&str; 14] = [
    "problem",
    "mode",
    "N_w",
    "N_s",
    "e_sigma",
    "eps_x",
    "eps_v",
    "eps_e",
    "dE",
    "dE_max",
    "Jv_hat/Jv",
    "Je_hat/Je",
    "S",
    "failure",
];

fn sci(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |x| format!("{x:.2e}"))
}

fn ratio(hat: Option<f64>, full: usize) -> String {
    hat.map_or_else(
        || "-".to_string(),
        |h| format!("{}/{full}", h.round() as usize),
    )
}

/// One table row per report; missing values are `-`. The combined rule of
/// the conservative variant is listed under `Jv_hat/Jv`.
pub fn report_rows(reports: &[RunReport]) -> Vec<[String; 14]> {
    reports
        .iter()
        .map(|r| {
            [
                r.problem.clone(),
                r.mode.to_string(),
                r.n_windows.to_string(),
                r.ns.to_string(),
                r.e_sigma.to_string(),
                sci(r.err_x),
                sci(r.err_v),
                sci(r.err_e),
                sci(r.delta_e),
                sci(r.max_step_delta_e),
                ratio(Some(r.j_hat_v), r.j_full),
                ratio(r.j_hat_e, r.j_full),
                r.speedup
                    .map_or_else(|| "-".to_string(), |s| format!("{s:.2}")),
                r.failure.clone().unwrap_or_else(|| "-".to_string()),
            ]
        })
        .collect()
}

pub fn report_csv(reports: &[RunReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(REPORT_COLUMNS)?;
    for row in report_rows(reports) {
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

/// Writes `report.csv` and `report.json` into `dir`.
pub fn emit_report(dir: &std::path::Path, reports: &[RunReport]) -> Result<()> {
    if reports.is_empty() {
        return Err(Error::Config("no reports to emit".into()));
    }
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.csv"), report_csv(reports)?)?;
    crate::io::write_json(&dir.join("report.json"), reports)
}
