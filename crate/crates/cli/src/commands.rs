use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use inner_media::geometry::{builtin_chart, identity_suite, ChartGeometry, ChartSpec};
use inner_media::invariants::{enumerate_words, independent_generators};
use inner_media::solver::{run, ScenarioConfig, TemperatureBracket};
use inner_media::thermo::{
    EnergyConvention, FreeEnergyModel, ModelSpec, ThermoPoint, INVOLUTIVITY_TOL,
};
use inner_media::{Error, LinOperator, Result, SplitSpace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::{
    BracketCheckArgs, ConventionArg, GeomCheckArgs, Global, InvariantsArgs, SimulateArgs,
    ThermoArgs,
};

/// Largest `|P(QAQ*) − P(A)| / (1 + |P(A)|)` accepted by `invariants`.
pub const INVARIANCE_TOL: f64 = 1e-9;

#[derive(Debug)]
pub struct CommandResult {
    pub exit_code: u8,
    pub artifacts: Vec<PathBuf>,
    pub summary: String,
}

impl CommandResult {
    pub fn from_error(e: Error) -> Self {
        let exit_code = if e.is_config() || matches!(e, Error::Io(_)) { 2 } else { 3 };
        Self {
            exit_code,
            artifacts: Vec::new(),
            summary: format!("error: {e}"),
        }
    }
}

struct Artifacts<'a> {
    dir: &'a Path,
    written: Vec<PathBuf>,
}

impl<'a> Artifacts<'a> {
    fn new(dir: &'a Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir,
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents)?;
        self.written.push(path);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write(name, &s)
    }

    fn finish(self, passed: bool, summary: String) -> CommandResult {
        CommandResult {
            exit_code: if passed { 0 } else { 3 },
            artifacts: self.written,
            summary,
        }
    }
}

fn read_input(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

fn rows(a: &LinOperator) -> Vec<Vec<f64>> {
    let m = a.matrix();
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn load_model(path: &Path, convention: Option<ConventionArg>) -> Result<FreeEnergyModel> {
    let mut spec = ModelSpec::from_json(&read_input(path)?)?;
    if let Some(c) = convention {
        spec.energy_convention = match c {
            ConventionArg::Derived => EnergyConvention::Derived,
            ConventionArg::Paper => EnergyConvention::Paper,
        };
    }
    FreeEnergyModel::from_spec(&spec)
}

fn scaled_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + a.abs())
}

pub fn invariants(g: &Global, args: &InvariantsArgs) -> Result<CommandResult> {
    if args.n == 0 {
        return Err(Error::Config("n must be at least 1".into()));
    }
    let space = SplitSpace::euclidean(args.n, args.m)?;
    let gens = independent_generators(&space, args.max_degree, g.seed)?;
    let words = enumerate_words(args.max_degree, args.m > 0)?;

    let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
    let mut worst = vec![0.0f64; words.len()];
    for _ in 0..args.trials {
        let a = space.random_operator(&mut rng);
        let q = space.random_group_element_with(&mut rng);
        let qa = space.conjugate(&q, &a)?;
        for (w, gap) in words.iter().zip(&mut worst) {
            *gap = gap.max(scaled_gap(w.eval(&a, &space)?, w.eval(&qa, &space)?));
        }
    }
    let tol = INVARIANCE_TOL * g.tolerance_scale;
    let mut csv = String::from("word,degree,max_scaled_deviation,tolerance,pass\n");
    for (w, gap) in words.iter().zip(&worst) {
        let _ = writeln!(csv, "{w},{},{gap:.16e},{tol:.16e},{}", w.degree(), *gap <= tol);
    }
    let max_gap = worst.iter().copied().fold(0.0, f64::max);
    let passed = max_gap <= tol;

    let mut out = Artifacts::new(&g.out)?;
    out.write("generators.json", &(gens.to_json()? + "\n"))?;
    out.write("invariance.csv", &csv)?;
    let summary = format!(
        "invariants n={} m={} degree<={}: rank {}/{}{}, {} words, max deviation {max_gap:.3e} over {} pairs",
        args.n,
        args.m,
        args.max_degree,
        gens.achieved_rank,
        gens.target_rank,
        if gens.is_complete() { "" } else { " (incomplete at this degree)" },
        words.len(),
        args.trials
    );
    Ok(out.finish(passed, summary))
}

/// `lo:hi:count` → evenly spaced values, `lo` alone when `count = 1`.
fn parse_range(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("expected LO:HI:COUNT, got `{s}`"));
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, count] = parts.as_slice() else {
        return Err(bad());
    };
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    let count: usize = count.trim().parse().map_err(|_| bad())?;
    if count == 0 || !lo.is_finite() || !hi.is_finite() {
        return Err(bad());
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect())
}

fn classification_name(model: &FreeEnergyModel, p: &ThermoPoint) -> Result<(String, Vec<f64>)> {
    let phase = model.classify(p)?;
    let name = serde_json::to_value(phase.classification)?
        .as_str()
        .unwrap_or_default()
        .to_string();
    Ok((name, phase.kappa_eigenvalues))
}

pub fn thermo(g: &Global, args: &ThermoArgs) -> Result<CommandResult> {
    let model = load_model(&args.model, args.energy_convention)?;
    let n = model.space().dim();
    let delta = if args.delta.is_empty() {
        LinOperator::zeros(n)
    } else {
        LinOperator::from_row_slice(n, &args.delta)?
    };
    let convention = serde_json::to_value(model.convention())?;
    let mut out = Artifacts::new(&g.out)?;

    if let Some(spec) = &args.sweep_theta {
        let thetas = parse_range(spec)?;
        let scales = parse_range(&args.sweep_scale)?;
        let mut csv = String::from(
            "scale,theta,epsilon,entropy,heat_capacity,kappa_min,kappa_max,classification\n",
        );
        let mut boundaries = String::from("scale,theta\n");
        let mut found = 0;
        for &s in &scales {
            let d = delta.scale(s);
            for &theta in &thetas {
                let p = ThermoPoint::new(theta, d.clone())?;
                let r = model.energy_entropy(&p)?;
                let c = model.heat_capacity(theta, &d)?;
                let (class, eig) = classification_name(&model, &p)?;
                let _ = writeln!(
                    csv,
                    "{s:.16e},{theta:.16e},{:.16e},{:.16e},{c:.16e},{:.16e},{:.16e},{class}",
                    r.epsilon,
                    r.entropy,
                    eig.first().copied().unwrap_or(f64::NAN),
                    eig.last().copied().unwrap_or(f64::NAN),
                );
            }
            let (lo, hi) = (thetas[0], thetas[thetas.len() - 1]);
            let path = |t: f64| ThermoPoint {
                theta: t,
                delta: d.clone(),
            };
            for t in model.phase_boundary_locate(path, lo.min(hi), lo.max(hi))? {
                found += 1;
                let _ = writeln!(boundaries, "{s:.16e},{t:.16e}");
            }
        }
        out.write("thermo_sweep.csv", &csv)?;
        out.write("thermo_boundaries.csv", &boundaries)?;
        let summary = format!(
            "thermo sweep: {} points, {found} phase boundary crossing(s)",
            thetas.len() * scales.len()
        );
        return Ok(out.finish(true, summary));
    }

    let theta = match (args.theta, args.eps) {
        (Some(t), _) => t,
        (None, Some(e)) => model.recover_temperature(e, &delta, TemperatureBracket::default())?,
        (None, None) => return Err(Error::Config("give --theta, --eps or --sweep-theta".into())),
    };
    let p = ThermoPoint::new(theta, delta)?;
    let r = model.energy_entropy(&p)?;
    let (class, eig) = classification_name(&model, &p)?;
    out.json(
        "thermo_point.json",
        &json!({
            "kind": model.kind(),
            "energy_convention": convention,
            "theta": theta,
            "delta": rows(&p.delta),
            "sigma": rows(&r.sigma),
            "epsilon": r.epsilon,
            "entropy": r.entropy,
            "helmholtz": r.helmholtz,
            "heat_capacity": model.heat_capacity(theta, &p.delta)?,
            "kappa_eigenvalues": eig,
            "classification": class,
        }),
    )?;
    let summary = format!("thermo point θ = {theta}: ε = {:.6e}, {class}", r.epsilon);
    Ok(out.finish(true, summary))
}

pub fn geom_check(g: &Global, args: &GeomCheckArgs) -> Result<CommandResult> {
    let mut charts: Vec<(String, ChartGeometry)> = Vec::new();
    if let Some(path) = &args.chart {
        let spec = ChartSpec::from_json(&read_input(path)?)?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "chart".into());
        charts.push((name, ChartGeometry::from_spec(&spec)?));
    }
    for name in &args.builtin {
        charts.push((name.clone(), builtin_chart(name)?));
    }
    let mut csv = String::from("chart,identity,max_residual,tolerance,pass\n");
    let mut passed = true;
    let mut worst = Vec::new();
    for (name, chart) in &charts {
        let report = identity_suite(chart, args.trials, g.seed)?;
        for (identity, value, tol) in report.rows() {
            let tol = tol * g.tolerance_scale;
            let _ = writeln!(csv, "{name},{identity},{value:.16e},{tol:.16e},{}", value <= tol);
        }
        passed &= report.passes(g.tolerance_scale);
        let max = report.rows().iter().map(|r| r.1).fold(0.0, f64::max);
        worst.push(format!("{name} {max:.2e}"));
    }
    let mut out = Artifacts::new(&g.out)?;
    out.write("geom_check.csv", &csv)?;
    let summary = format!(
        "geom-check {} ({} fields per identity): {}",
        if passed { "passed" } else { "FAILED" },
        args.trials,
        worst.join(", ")
    );
    Ok(out.finish(passed, summary))
}

pub fn simulate(g: &Global, args: &SimulateArgs) -> Result<CommandResult> {
    let config = ScenarioConfig::from_json(&read_input(&args.scenario)?)?;
    fs::create_dir_all(&g.out)?;
    let result = run(&config, Some(&g.out))?;
    let last = result.rows.last().expect("the initial row is always recorded");
    let summary = format!(
        "simulated to t = {} in {} steps: mass drift {:.3e}, energy drift {:.3e}, θ ∈ [{:.6}, {:.6}]",
        last.t, result.steps, last.mass_drift, last.energy_drift, last.theta_min, last.theta_max
    );
    Ok(CommandResult {
        exit_code: 0,
        artifacts: result.files,
        summary,
    })
}

pub fn bracket_check(g: &Global, args: &BracketCheckArgs) -> Result<CommandResult> {
    let model = load_model(&args.model, None)?;
    if args.samples == 0 {
        return Err(Error::Config("samples must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
    let points = (0..args.samples)
        .map(|_| {
            let theta = rng.random_range(0.5..2.0);
            ThermoPoint::new(theta, model.space().random_operator(&mut rng))
        })
        .collect::<Result<Vec<_>>>()?;
    let residual = model.involutivity_check(&points)?;
    let off_manifold = model.involutivity_residual(&points, 0.1)?;
    let tol = INVOLUTIVITY_TOL * g.tolerance_scale;
    let passed = residual <= tol;
    let mut out = Artifacts::new(&g.out)?;
    out.json(
        "bracket_check.json",
        &json!({
            "kind": model.kind(),
            "samples": args.samples,
            "seed": g.seed,
            "max_residual": residual,
            "tolerance": tol,
            "pass": passed,
            "off_manifold_residual": off_manifold,
        }),
    )?;
    let summary = format!(
        "bracket-check {}: max |[F_k, F_l]| = {residual:.3e} (tolerance {tol:.1e}); off-manifold control {off_manifold:.3e}",
        if passed { "passed" } else { "FAILED" }
    );
    Ok(out.finish(passed, summary))
}
