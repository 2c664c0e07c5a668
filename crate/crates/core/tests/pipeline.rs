//! Offline/online pipeline on coarse meshes, including persistence.

use hyperhydro::bench::{build_rom, run_offline, run_online, RomConfig, RunReport, SimConfig};
use hyperhydro::hydro::CflParams;
use hyperhydro::io::{load_offline, load_rom, save_offline, save_rom};
use hyperhydro::problems::{make_problem, DiscretizationConfig, Problem, ProblemKind, ProblemSpec};
use hyperhydro::rom::DtPolicy;
use hyperhydro::Mode;

fn coarse(kind: ProblemKind) -> Problem<f64> {
    make_problem(
        ProblemSpec::new(kind),
        &DiscretizationConfig {
            m: 1,
            ..Default::default()
        },
    )
    .unwrap()
}

fn without_timings(mut r: RunReport) -> RunReport {
    r.full_seconds = 0.0;
    r.rom_seconds = None;
    r.speedup = None;
    r
}

#[test]
fn every_problem_and_mode_runs_conservatively() {
    for kind in ProblemKind::ALL {
        let p = coarse(kind);
        let run = run_offline(
            &p,
            &SimConfig {
                ns: 5,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(run.energy_drift() < 1e-13, "{kind}");
        let mut delta = Vec::new();
        for mode in Mode::ALL {
            let rom = build_rom(&p, &run, &RomConfig::new(mode)).unwrap();
            let r = run_online(
                &p,
                &run,
                &rom,
                &DtPolicy::Adaptive(CflParams::default()),
                None,
            );
            assert!(r.failure.is_none(), "{kind} {mode}: {:?}", r.failure);
            assert!(r.evals_match);
            assert!(r.err_v.unwrap() < 0.1, "{kind} {mode}: {:?}", r.err_v);
            delta.push(r.delta_e.unwrap());
        }
        assert!(delta[1] < 1e-13, "{kind}: {}", delta[1]);
    }
}

#[test]
fn stored_artifacts_reproduce_the_online_run() {
    let p = coarse(ProblemKind::Gresho);
    let run = run_offline(
        &p,
        &SimConfig {
            ns: 4,
            ..Default::default()
        },
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_offline(dir.path(), &p, &run).unwrap();
    let run_back = load_offline(dir.path(), &p).unwrap();
    assert_eq!(run_back.schedule, run.schedule);
    assert_eq!(run_back.dts, run.dts);
    assert_eq!(run_back.final_state, run.final_state);
    assert_eq!(run_back.snapshots.len(), run.snapshots.len());
    for mode in Mode::ALL {
        let rom = build_rom(&p, &run, &RomConfig::new(mode)).unwrap();
        let rdir = dir.path().join(mode.as_str());
        save_rom(&rdir, &p, &rom).unwrap();
        let back = load_rom(&rdir, &p).unwrap();
        let policy = DtPolicy::Adaptive(CflParams::default());
        let a = without_timings(run_online(&p, &run, &rom, &policy, None));
        let b = without_timings(run_online(&p, &run_back, &back, &policy, None));
        assert_eq!(a, b, "{mode}");
    }
}

#[test]
fn replayed_steps_follow_the_full_model() {
    let p = coarse(ProblemKind::TaylorGreen);
    let run = run_offline(&p, &SimConfig::default()).unwrap();
    let mut cfg = RomConfig::new(Mode::Ceqp);
    cfg.e_sigma = 1.0;
    let rom = build_rom(&p, &run, &cfg).unwrap();
    let r = run_online(&p, &run, &rom, &DtPolicy::Prescribed(run.dts.clone()), None);
    assert_eq!(r.rom_steps, r.full_steps);
    assert!(r.err_v.unwrap() < 1e-2, "{:?}", r.err_v);
}
