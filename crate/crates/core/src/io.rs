//! On-disk formats: binary snapshot, basis and rule files, the JSON ROM
//! manifest and CSV step logs.
//!
//! Every binary file is `MAGIC`, a little-endian `u64` header length, a JSON
//! header and a little-endian payload.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::bench::{BuiltRom, OfflineRun, StepLog, WindowArtifact};
use crate::eqp::RuleStats;
use crate::error::{Error, Result};
use crate::fem::QuadRule;
use crate::hydro::{FullState, RunStats, SpaceHeader};
use crate::mode::Mode;
use crate::pod::{BasisMetric, ReducedBasis, SnapshotSet, WindowSchedule};
use crate::problems::Problem;

pub const MAGIC: &[u8; 8] = b"HHYDRO01";

/// Writes `MAGIC`, the header and the payload.
pub fn write_binary<H: Serialize>(path: &Path, header: &H, payload: &[u8]) -> Result<()> {
    let head = serde_json::to_vec(header)?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&(head.len() as u64).to_le_bytes())?;
    w.write_all(&head)?;
    w.write_all(payload)?;
    w.flush()?;
    Ok(())
}

/// Reads a file written by [`write_binary`].
pub fn read_binary<H: DeserializeOwned>(path: &Path) -> Result<(H, Vec<u8>)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("{}: bad magic", path.display())));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len) as usize;
    let mut head = vec![0u8; len];
    r.read_exact(&mut head)?;
    let header = serde_json::from_slice(&head)?;
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    Ok((header, payload))
}

fn put_f64(buf: &mut Vec<u8>, xs: &[f64]) {
    buf.reserve(xs.len() * 8);
    for x in xs {
        buf.extend_from_slice(&x.to_le_bytes());
    }
}

/// Sequential reader over a payload.
struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Cursor { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.bytes.len());
        let end =
            end.ok_or_else(|| Error::Format("payload shorter than header declares".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let s = self.take(n * 8)?;
        Ok(s.chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn u64s(&mut self, n: usize) -> Result<Vec<u64>> {
        let s = self.take(n * 8)?;
        Ok(s.chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
        Ok(DMatrix::from_vec(rows, cols, self.f64s(rows * cols)?))
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing payload bytes",
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn check_space(found: &SpaceHeader, expected: &SpaceHeader) -> Result<()> {
    if found != expected {
        return Err(Error::Format(format!(
            "file was written for {found:?}, problem has {expected:?}"
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub kind: String,
    pub space: SpaceHeader,
    pub window_id: usize,
    pub times: Vec<f64>,
    /// Each record carries a test velocity after `v, e, x`.
    pub with_test_velocity: bool,
}

/// Records `v, e, x[, v_test]` for every snapshot, in order.
pub fn write_snapshots(path: &Path, space: &SpaceHeader, snaps: &SnapshotSet<f64>) -> Result<()> {
    let with_test = snaps.has_test_velocities();
    let header = SnapshotHeader {
        kind: "snapshots".into(),
        space: space.clone(),
        window_id: snaps.window_id,
        times: snaps.times(),
        with_test_velocity: with_test,
    };
    let mut buf = Vec::new();
    for (k, s) in snaps.states.iter().enumerate() {
        put_f64(&mut buf, &s.v);
        put_f64(&mut buf, &s.e);
        put_f64(&mut buf, &s.x);
        if with_test {
            put_f64(&mut buf, snaps.test_velocity(k));
        }
    }
    write_binary(path, &header, &buf)
}

pub fn read_snapshots(path: &Path, space: &SpaceHeader) -> Result<SnapshotSet<f64>> {
    let (h, payload): (SnapshotHeader, _) = read_binary(path)?;
    if h.kind != "snapshots" {
        return Err(Error::Format(format!(
            "{}: expected snapshots, found {}",
            path.display(),
            h.kind
        )));
    }
    check_space(&h.space, space)?;
    let mut cur = Cursor::new(&payload);
    let mut set = SnapshotSet::new(h.window_id);
    for &t in &h.times {
        let v = cur.f64s(space.n_v)?;
        let e = cur.f64s(space.n_e)?;
        let x = cur.f64s(space.n_v)?;
        let state = FullState { v, e, x, t };
        if h.with_test_velocity {
            set.push_with_test(state, cur.f64s(space.n_v)?);
        } else {
            set.push(state);
        }
    }
    cur.finish()?;
    Ok(set)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisHeader {
    pub kind: String,
    pub window_id: usize,
    pub metric: BasisMetric,
    /// Full sizes `N_v`, `N_e`.
    pub full_v: usize,
    pub full_e: usize,
    pub n_v: usize,
    pub n_e: usize,
    pub n_x: usize,
    pub has_offsets: bool,
    pub has_unity: bool,
}

/// Column-major `Phi_v, Phi_e, Phi_x`, then offsets and unity coordinates
/// when flagged.
pub fn write_basis(path: &Path, b: &ReducedBasis<f64>) -> Result<()> {
    let has_offsets = b
        .v_os
        .iter()
        .chain(&b.e_os)
        .chain(&b.x_os)
        .any(|x| *x != 0.0);
    let header = BasisHeader {
        kind: "basis".into(),
        window_id: b.window_id,
        metric: b.metric,
        full_v: b.phi_v.nrows(),
        full_e: b.phi_e.nrows(),
        n_v: b.n_v(),
        n_e: b.n_e(),
        n_x: b.n_x(),
        has_offsets,
        has_unity: b.one_hat_e.is_some(),
    };
    let mut buf = Vec::new();
    put_f64(&mut buf, b.phi_v.as_slice());
    put_f64(&mut buf, b.phi_e.as_slice());
    put_f64(&mut buf, b.phi_x.as_slice());
    if has_offsets {
        put_f64(&mut buf, &b.v_os);
        put_f64(&mut buf, &b.e_os);
        put_f64(&mut buf, &b.x_os);
    }
    if let Some(one) = &b.one_hat_e {
        put_f64(&mut buf, one);
    }
    write_binary(path, &header, &buf)
}

pub fn read_basis(path: &Path) -> Result<ReducedBasis<f64>> {
    let (h, payload): (BasisHeader, _) = read_binary(path)?;
    if h.kind != "basis" {
        return Err(Error::Format(format!(
            "{}: expected basis, found {}",
            path.display(),
            h.kind
        )));
    }
    let mut cur = Cursor::new(&payload);
    let phi_v = cur.matrix(h.full_v, h.n_v)?;
    let phi_e = cur.matrix(h.full_e, h.n_e)?;
    let phi_x = cur.matrix(h.full_v, h.n_x)?;
    let (v_os, e_os, x_os) = if h.has_offsets {
        (
            cur.f64s(h.full_v)?,
            cur.f64s(h.full_e)?,
            cur.f64s(h.full_v)?,
        )
    } else {
        (
            vec![0.0; h.full_v],
            vec![0.0; h.full_e],
            vec![0.0; h.full_v],
        )
    };
    let one_hat_e = if h.has_unity {
        Some(cur.f64s(h.n_e)?)
    } else {
        None
    };
    cur.finish()?;
    Ok(ReducedBasis {
        window_id: h.window_id,
        metric: h.metric,
        phi_v,
        phi_e,
        phi_x,
        v_os,
        e_os,
        x_os,
        one_hat_e,
    })
}

/// Which force a rule integrates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleRole {
    Velocity,
    Energy,
    Combined,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleHeader {
    pub kind: String,
    pub window_id: usize,
    pub mode: Mode,
    pub role: RuleRole,
    pub j: usize,
    pub j_hat: usize,
}

/// Sparse rule: `j_hat` point indices (`u64`) then their weights.
pub fn write_rule(
    path: &Path,
    window_id: usize,
    mode: Mode,
    role: RuleRole,
    rule: &QuadRule<f64>,
) -> Result<()> {
    let sparse = rule.sparse_reduced();
    let header = RuleHeader {
        kind: "rule".into(),
        window_id,
        mode,
        role,
        j: rule.len(),
        j_hat: sparse.len(),
    };
    let mut buf = Vec::with_capacity(sparse.len() * 16);
    for (j, _) in &sparse {
        buf.extend_from_slice(&(*j as u64).to_le_bytes());
    }
    for (_, w) in &sparse {
        buf.extend_from_slice(&w.to_le_bytes());
    }
    write_binary(path, &header, &buf)
}

/// Reads a rule onto the points of `full`.
pub fn read_rule(path: &Path, full: &QuadRule<f64>) -> Result<(RuleHeader, QuadRule<f64>)> {
    let (h, payload): (RuleHeader, _) = read_binary(path)?;
    if h.kind != "rule" {
        return Err(Error::Format(format!(
            "{}: expected rule, found {}",
            path.display(),
            h.kind
        )));
    }
    if h.j != full.len() {
        return Err(Error::Format(format!(
            "rule over {} points, discretization has {}",
            h.j,
            full.len()
        )));
    }
    let mut cur = Cursor::new(&payload);
    let idx = cur.u64s(h.j_hat)?;
    let w = cur.f64s(h.j_hat)?;
    cur.finish()?;
    let mut weights = vec![0.0; h.j];
    for (i, w) in idx.into_iter().zip(w) {
        let i = i as usize;
        if i >= h.j {
            return Err(Error::Format(format!(
                "point index {i} out of range {}",
                h.j
            )));
        }
        weights[i] = w;
    }
    Ok((h, full.with_reduced(weights)))
}

/// One window entry of a ROM manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestWindow {
    pub window_id: usize,
    pub basis: String,
    pub rules: Vec<String>,
    pub n_v: usize,
    pub n_e: usize,
    pub n_x: usize,
    pub j_hat: Vec<usize>,
    pub rule_stats: Vec<RuleStats>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RomManifest {
    pub problem: String,
    pub mode: Mode,
    pub e_sigma: f64,
    pub space: SpaceHeader,
    pub schedule: WindowSchedule,
    pub build_seconds: f64,
    pub windows: Vec<ManifestWindow>,
}

pub const MANIFEST: &str = "manifest.json";

/// Writes bases, rules and `manifest.json` into `dir`.
pub fn save_rom(dir: &Path, problem: &Problem<f64>, rom: &BuiltRom) -> Result<RomManifest> {
    std::fs::create_dir_all(dir)?;
    let mut windows = Vec::with_capacity(rom.windows.len());
    for (w, art) in rom.windows.iter().enumerate() {
        let basis = format!("basis_{w:03}.bin");
        write_basis(&dir.join(&basis), &art.basis)?;
        let mut rules = Vec::new();
        let mut j_hat = Vec::new();
        let roles: Vec<(RuleRole, &QuadRule<f64>)> = match (rom.mode, &art.rule_e) {
            (Mode::Beqp, Some(re)) => {
                vec![(RuleRole::Velocity, &art.rule_v), (RuleRole::Energy, re)]
            }
            _ => vec![(RuleRole::Combined, &art.rule_v)],
        };
        for (role, rule) in roles {
            let name = match role {
                RuleRole::Velocity => format!("rule_v_{w:03}.bin"),
                RuleRole::Energy => format!("rule_e_{w:03}.bin"),
                RuleRole::Combined => format!("rule_{w:03}.bin"),
            };
            write_rule(&dir.join(&name), w, rom.mode, role, rule)?;
            rules.push(name);
            j_hat.push(rule.nnz());
        }
        windows.push(ManifestWindow {
            window_id: w,
            basis,
            rules,
            n_v: art.basis.n_v(),
            n_e: art.basis.n_e(),
            n_x: art.basis.n_x(),
            j_hat,
            rule_stats: art.rule_stats.clone(),
        });
    }
    let manifest = RomManifest {
        problem: problem.spec.kind.name().to_string(),
        mode: rom.mode,
        e_sigma: rom.e_sigma,
        space: problem.disc.header(),
        schedule: rom.schedule.clone(),
        build_seconds: rom.build_seconds,
        windows,
    };
    write_json(&dir.join(MANIFEST), &manifest)?;
    Ok(manifest)
}

pub fn load_rom(dir: &Path, problem: &Problem<f64>) -> Result<BuiltRom> {
    let manifest: RomManifest = read_json(&dir.join(MANIFEST))?;
    check_space(&manifest.space, &problem.disc.header())?;
    if manifest.windows.len() != manifest.schedule.n_windows() {
        return Err(Error::Format(format!(
            "manifest lists {} windows for a {}-window schedule",
            manifest.windows.len(),
            manifest.schedule.n_windows()
        )));
    }
    let expected_rules = match manifest.mode {
        Mode::Beqp => 2,
        Mode::Ceqp => 1,
    };
    let mut windows = Vec::with_capacity(manifest.windows.len());
    for mw in &manifest.windows {
        if mw.rules.len() != expected_rules {
            return Err(Error::Format(format!(
                "window {}: {} rules for mode {}",
                mw.window_id,
                mw.rules.len(),
                manifest.mode
            )));
        }
        let basis = read_basis(&dir.join(&mw.basis))?;
        let mut rules = Vec::new();
        for name in &mw.rules {
            rules.push(read_rule(&dir.join(name), &problem.disc.rule)?.1);
        }
        let rule_e = if rules.len() == 2 { rules.pop() } else { None };
        let rule_v = rules.pop().expect("at least one rule");
        windows.push(WindowArtifact {
            basis,
            rule_v,
            rule_e,
            rule_stats: mw.rule_stats.clone(),
        });
    }
    Ok(BuiltRom {
        mode: manifest.mode,
        e_sigma: manifest.e_sigma,
        schedule: manifest.schedule,
        windows,
        build_seconds: manifest.build_seconds,
    })
}

/// Scalars of an offline run; states live in the binary files beside it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OfflineManifest {
    pub problem: String,
    pub space: SpaceHeader,
    pub schedule: WindowSchedule,
    pub dts: Vec<f64>,
    pub stats: RunStats,
    pub te_initial: f64,
    pub te_final: f64,
    pub snapshots: Vec<String>,
    /// Initial and final states as a two-record snapshot file.
    pub endpoints: String,
}

pub const OFFLINE_MANIFEST: &str = "offline.json";

pub fn save_offline(
    dir: &Path,
    problem: &Problem<f64>,
    run: &OfflineRun,
) -> Result<OfflineManifest> {
    std::fs::create_dir_all(dir)?;
    let space = problem.disc.header();
    let mut snapshots = Vec::with_capacity(run.snapshots.len());
    for (w, s) in run.snapshots.iter().enumerate() {
        let name = format!("snapshots_{w:03}.bin");
        write_snapshots(&dir.join(&name), &space, s)?;
        snapshots.push(name);
    }
    let mut ends = SnapshotSet::new(0);
    ends.push(run.initial.clone());
    ends.push(run.final_state.clone());
    let endpoints = "endpoints.bin".to_string();
    write_snapshots(&dir.join(&endpoints), &space, &ends)?;
    let manifest = OfflineManifest {
        problem: problem.spec.kind.name().to_string(),
        space,
        schedule: run.schedule.clone(),
        dts: run.dts.clone(),
        stats: run.stats.clone(),
        te_initial: run.te_initial,
        te_final: run.te_final,
        snapshots,
        endpoints,
    };
    write_json(&dir.join(OFFLINE_MANIFEST), &manifest)?;
    Ok(manifest)
}

pub fn load_offline(dir: &Path, problem: &Problem<f64>) -> Result<OfflineRun> {
    let m: OfflineManifest = read_json(&dir.join(OFFLINE_MANIFEST))?;
    let space = problem.disc.header();
    check_space(&m.space, &space)?;
    let snapshots = m
        .snapshots
        .iter()
        .map(|n| read_snapshots(&dir.join(n), &space))
        .collect::<Result<Vec<_>>>()?;
    let mut ends = read_snapshots(&dir.join(&m.endpoints), &space)?;
    if ends.len() != 2 {
        return Err(Error::Format(format!(
            "endpoint file holds {} states",
            ends.len()
        )));
    }
    let final_state = ends.states.pop().expect("two states");
    let initial = ends.states.pop().expect("two states");
    Ok(OfflineRun {
        schedule: m.schedule,
        snapshots,
        dts: m.dts,
        initial,
        final_state,
        stats: m.stats,
        te_initial: m.te_initial,
        te_final: m.te_final,
    })
}

pub fn write_json<S: Serialize + ?Sized>(path: &Path, value: &S) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<D: DeserializeOwned>(path: &Path) -> Result<D> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

/// Per-step energy log, one CSV row per accepted step.
pub fn write_step_log(path: &Path, log: &[StepLog]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in log {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_step_log(path: &Path) -> Result<Vec<StepLog>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize()
        .collect::<std::result::Result<Vec<StepLog>, _>>()?)
}

/// Standard directory layout under an output root.
pub fn run_dir(root: &Path, problem: &str) -> PathBuf {
    root.join(problem)
}

pub fn rom_dir(root: &Path, problem: &str, mode: Mode) -> PathBuf {
    root.join(problem).join(mode.as_str())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{make_problem, DiscretizationConfig, ProblemKind, ProblemSpec};

    fn tiny() -> Problem<f64> {
        let cfg = DiscretizationConfig {
            m: 0,
            k: 2,
            points_per_dim: None,
        };
        make_problem(ProblemSpec::new(ProblemKind::Gresho), &cfg).unwrap()
    }

    #[test]
    fn binary_round_trip_and_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.bin");
        write_binary(&p, &serde_json::json!({"x": 1}), &[1, 2, 3]).unwrap();
        let (h, body): (serde_json::Value, _) = read_binary(&p).unwrap();
        assert_eq!(h["x"], 1);
        assert_eq!(body, vec![1, 2, 3]);
        std::fs::write(&p, b"NOTMAGIC........").unwrap();
        assert!(matches!(
            read_binary::<serde_json::Value>(&p),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn snapshots_round_trip() {
        let prob = tiny();
        let mut s = SnapshotSet::new(3);
        s.push_with_test(prob.initial.clone(), vec![0.5; prob.disc.n_v()]);
        let mut later = prob.initial.clone();
        later.t = 0.1;
        s.push_with_test(later, prob.initial.v.clone());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.bin");
        write_snapshots(&path, &prob.disc.header(), &s).unwrap();
        let back = read_snapshots(&path, &prob.disc.header()).unwrap();
        assert_eq!(back.window_id, 3);
        assert_eq!(back.states, s.states);
        assert_eq!(back.test_velocity(0), s.test_velocity(0));
        let mut other = prob.disc.header();
        other.m += 1;
        assert!(read_snapshots(&path, &other).is_err());
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let prob = tiny();
        let mut s = SnapshotSet::new(0);
        s.push(prob.initial.clone());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.bin");
        write_snapshots(&path, &prob.disc.header(), &s).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 8]).unwrap();
        assert!(matches!(
            read_snapshots(&path, &prob.disc.header()),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn rule_round_trip() {
        let prob = tiny();
        let mut w = vec![0.0; prob.disc.rule.len()];
        w[1] = 0.25;
        w[7] = 1.5;
        let rule = prob.disc.rule.with_reduced(w);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.bin");
        write_rule(&path, 2, Mode::Ceqp, RuleRole::Combined, &rule).unwrap();
        let (h, back) = read_rule(&path, &prob.disc.rule).unwrap();
        assert_eq!(h.j_hat, 2);
        assert_eq!(back.reduced_weights, rule.reduced_weights);
    }

    #[test]
    fn step_log_round_trip() {
        let log = vec![StepLog {
            step: 0,
            window: 0,
            t: 0.1,
            dt: 0.1,
            ie: 1.0,
            ke: 0.5,
            te: 1.5,
            evals: 12,
        }];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.csv");
        write_step_log(&path, &log).unwrap();
        assert_eq!(read_step_log(&path).unwrap(), log);
    }
}
