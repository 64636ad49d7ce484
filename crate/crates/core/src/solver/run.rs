//! Scenario driver: time loop, diagnostics table and snapshots.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::ScenarioConfig;
use super::grid::Grid;
use super::medium::{Medium, MediumState};
use crate::error::{Error, Result};

/// One line of `diagnostics.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsRow {
    pub step: usize,
    pub t: f64,
    pub mass: f64,
    /// Flat charts only.
    pub momentum: Option<Vec<f64>>,
    pub energy: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    pub kinetic_residual_linf: f64,
    /// Relative to the initial value.
    pub mass_drift: f64,
    pub energy_drift: f64,
    /// Product charts only.
    pub projectability_defect: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub rows: Vec<DiagnosticsRow>,
    pub final_state: MediumState,
    pub steps: usize,
    /// Files written, in order.
    pub files: Vec<PathBuf>,
}

#[derive(Serialize)]
struct Snapshot<'a> {
    step: usize,
    t: f64,
    seed: u64,
    grid: &'a Grid,
    rho: &'a [f64],
    velocity: &'a [f64],
    eps: &'a [f64],
    theta: &'a [f64],
}

fn relative(now: f64, start: f64) -> f64 {
    (now - start).abs() / start.abs().max(f64::MIN_POSITIVE)
}

struct Recorder<'a> {
    medium: &'a Medium,
    config: &'a ScenarioConfig,
    out: Option<&'a Path>,
    rows: Vec<DiagnosticsRow>,
    files: Vec<PathBuf>,
    start: Option<(f64, f64)>,
}

impl Recorder<'_> {
    fn record(&mut self, step: usize, s: &MediumState) -> Result<()> {
        let m = self.medium;
        let der = m.derived(s)?;
        let rates = m.rhs_with(s, &der)?;
        let residual = m
            .kinetic_identity_residual_with(s, &der, &rates)?
            .into_iter()
            .fold(0.0, |a: f64, r| a.max(r.abs()));
        let mass = m.mass(s);
        let energy = m.energy(s);
        let (mass0, energy0) = *self.start.get_or_insert((mass, energy));
        self.rows.push(DiagnosticsRow {
            step,
            t: s.t,
            mass,
            momentum: m.momentum(s),
            energy,
            theta_min: der.theta.iter().copied().fold(f64::INFINITY, f64::min),
            theta_max: der.theta.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            kinetic_residual_linf: residual,
            mass_drift: relative(mass, mass0),
            energy_drift: relative(energy, energy0),
            projectability_defect: m.projectability_defect(s),
        });
        self.snapshot(&format!("snapshot_{step}.json"), step, s, &der.theta)
    }

    fn snapshot(&mut self, name: &str, step: usize, s: &MediumState, theta: &[f64]) -> Result<()> {
        let Some(dir) = self.out else { return Ok(()) };
        let snap = Snapshot {
            step,
            t: s.t,
            seed: self.config.seed,
            grid: self.medium.grid(),
            rho: &s.rho,
            velocity: &s.velocity,
            eps: &s.eps,
            theta,
        };
        let path = dir.join(name);
        fs::write(&path, serde_json::to_string(&snap)?)?;
        self.files.push(path);
        Ok(())
    }

    fn write_csv(&mut self) -> Result<()> {
        let Some(dir) = self.out else { return Ok(()) };
        let path = dir.join("diagnostics.csv");
        fs::write(&path, diagnostics_csv(self.medium.dim(), &self.rows))?;
        self.files.push(path);
        Ok(())
    }
}

/// Renders diagnostics rows with a header; floats use `{:.16e}`.
pub fn diagnostics_csv(dim: usize, rows: &[DiagnosticsRow]) -> String {
    let with_momentum = rows.first().is_some_and(|r| r.momentum.is_some());
    let with_proj = rows.first().is_some_and(|r| r.projectability_defect.is_some());
    let mut out = String::from("step,t,mass");
    if with_momentum {
        for c in 1..=dim {
            let _ = write!(out, ",momentum_{c}");
        }
    }
    out.push_str(",energy,theta_min,theta_max,kinetic_residual_linf,mass_drift,energy_drift");
    if with_proj {
        out.push_str(",projectability_defect");
    }
    out.push('\n');
    for r in rows {
        let _ = write!(out, "{},{:.16e},{:.16e}", r.step, r.t, r.mass);
        for p in r.momentum.iter().flatten() {
            let _ = write!(out, ",{p:.16e}");
        }
        for v in [
            r.energy,
            r.theta_min,
            r.theta_max,
            r.kinetic_residual_linf,
            r.mass_drift,
            r.energy_drift,
        ] {
            let _ = write!(out, ",{v:.16e}");
        }
        if let Some(p) = r.projectability_defect {
            let _ = write!(out, ",{p:.16e}");
        }
        out.push('\n');
    }
    out
}

/// Persists `last_good` and the diagnostics so far, then wraps `source`.
fn abort(rec: &mut Recorder<'_>, step: usize, last_good: &MediumState, source: Error) -> Error {
    const NAME: &str = "snapshot_last_good.json";
    let theta = rec
        .medium
        .derived(last_good)
        .map(|d| d.theta)
        .unwrap_or_default();
    let written = rec
        .snapshot(NAME, step, last_good, &theta)
        .and_then(|_| rec.write_csv());
    if let Err(e) = written {
        return e;
    }
    Error::Aborted {
        t: last_good.t,
        snapshot: rec
            .out
            .map(|d| d.join(NAME).display().to_string())
            .unwrap_or_else(|| "memory (no output directory)".into()),
        source: Box::new(source),
    }
}

/// Runs a scenario to `t_end`, recording every `output_every` steps and at
/// the end. With `out` set, writes `diagnostics.csv` and
/// `snapshot_<step>.json` there. A failure mid-run writes
/// `snapshot_last_good.json` and returns [`Error::Aborted`].
pub fn run(config: &ScenarioConfig, out: Option<&Path>) -> Result<RunOutput> {
    let medium = Medium::from_config(config)?;
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
    }
    let mut state = medium.initial_state(&config.initial, config.seed, config.noise)?;
    let mut rec = Recorder {
        medium: &medium,
        config,
        out,
        rows: Vec::new(),
        files: Vec::new(),
        start: None,
    };
    rec.record(0, &state)?;
    let mut step = 0;
    while state.t < config.t_end {
        let remaining = config.t_end - state.t;
        let advance = || -> Result<MediumState> {
            let dt = match config.dt {
                Some(dt) => dt.min(remaining),
                None => {
                    let der = medium.derived(&state)?;
                    medium.stable_dt(&state, &der)?.min(remaining)
                }
            };
            let mut next = medium.step_rk4(&state, dt)?;
            if let Some(fixed) = config.dt {
                // fixed steps land on k·dt without accumulated rounding
                next.t = ((step + 1) as f64 * fixed).min(config.t_end);
            }
            if remaining - dt <= 1e-12 * config.t_end.max(1.0) {
                next.t = config.t_end;
            }
            Ok(next)
        };
        let next = match advance() {
            Ok(next) => next,
            Err(e) => return Err(abort(&mut rec, step, &state, e)),
        };
        step += 1;
        if step % config.output_every == 0 || next.t >= config.t_end {
            if let Err(e) = rec.record(step, &next) {
                return Err(abort(&mut rec, step - 1, &state, e));
            }
        }
        state = next;
    }
    rec.write_csv()?;
    Ok(RunOutput {
        rows: rec.rows,
        files: rec.files,
        final_state: state,
        steps: step,
    })
}
