//! Subcommand table and implementations.

use std::path::Path;

use expulsive::analysis::{asymptotic_deviation, fit_tail, fit_tail_with_order, norm_curve, tail_corrected_norm};
use expulsive::closedform::{
    coupled_exact_fields, coupled_residual, exact_vortex, exact_vortex_gamma, exact_vortex_norm,
    exact_vortex_residual, kappa_sweep, tail_model, vnw_residual, vnw_state, AsymptoteParams,
    CoupledSystemSpec, VortexNorm,
};
use expulsive::evolve::{
    collapse_scan, default_core_radius, prepare_state, propagate, stability_run, AbsorberKind,
    CollapseScanConfig, EvolveConfig, Trajectory,
};
use expulsive::solver1d::{classify_structure, solve_for_norm, solve_stationary_1d, xmax_scan, ShootConfig};
use expulsive::solver2d::{solve_stationary_2d, RadialStart};
use expulsive::{Grid, Normalization, ProblemSpec, WaveFunction};
use serde::Serialize;
use serde_json::{json, Value};

use crate::output::{format_number, read_columns, OutputDir};
use crate::settings::Settings;
use crate::CliError;

pub struct Key {
    pub name: &'static str,
    pub help: &'static str,
    pub boolean: bool,
}

const fn key(name: &'static str, help: &'static str) -> Key {
    Key { name, help, boolean: false }
}

const fn switch(name: &'static str, help: &'static str) -> Key {
    Key { name, help, boolean: true }
}

type Runner = fn(&Settings, &mut OutputDir, &mut Vec<String>) -> Result<Value, CliError>;

pub struct Subcommand {
    pub name: &'static str,
    pub about: &'static str,
    pub keys: &'static [Key],
    pub defaults: &'static [(&'static str, &'static str)],
    /// Dimension tag of the embedded problem, if the subcommand has one.
    pub dimension: Option<&'static str>,
    pub run: Runner,
}

const GAMMA: Key = key("gamma", "potential exponent (>= 1)");
const G: Key = key("g", "nonlinearity sign: -1, 0 or 1");
const SIGMA: Key = key("sigma", "nonlinearity exponent: 1 (cubic) or 2 (quintic)");
const ENERGY: Key = key("energy", "eigenvalue E / chemical potential");
const PARITY: Key = key("parity", "even or odd");
const VORTICITY: Key = key("vorticity", "vorticity S (radial problems)");
const EXTENT: Key = key("L", "domain half-size or radius");
const AMPLITUDE: Key = key("amplitude", "phi(0) (even), phi'(0) (odd) or a0 (radial)");
const PPW: Key = key("ppw", "points per local wavelength at the domain edge");
const CLAMP: Key = key("clamp", "freeze the potential beyond this coordinate");
const SAMPLES: Key = key("samples", "explicit grid sample count");
const FIT_INNER: Key = key("fit-inner", "tail-fit window start (default L/3)");
const FIT_OUTER: Key = key("fit-outer", "tail-fit window end (default 0.85 L)");
const FIT_ORDER: Key = key("fit-order", "asymptotic order of the tail model (1-3)");
const NORM_POINTS: Key = key("norm-points", "number of truncations in the norm curve");
const TARGET_NORM: Key = key("target-norm", "tune the amplitude to this norm");
const AMP_LOW: Key = key("amp-low", "lower amplitude for norm tuning");
const AMP_HIGH: Key = key("amp-high", "upper amplitude for norm tuning");
const STATE: Key = key("state", "CSV state file with x and phi columns");
const T_END: Key = key("t-end", "final time");
const DT: Key = key("dt", "time step (default from dt-phase)");
const DT_PHASE: Key = key("dt-phase", "potential phase per step used for the default dt");
const DT_MAX: Key = key("dt-max", "cap on the default dt");
const CORE: Key = key("core-radius", "radius of the monitored core");
const ABSORBER: Key = key("absorber", "relaxation or damping");
const ABS_WIDTH: Key = key("absorber-width", "edge layer width");
const ABS_STRENGTH: Key = key("absorber-strength", "edge layer rate");
const STRIDE: Key = key("stride", "record diagnostics every this many steps");
const SEED: Key = key("seed", "perturbation seed");
const SPECTRAL: Key = key("spectral-threshold", "high-k power fraction that flags collapse");
const NL_PHASE: Key = key("nonlinear-phase", "largest nonlinear phase per step");
const STEP_CHECK: Key = switch("step-check", "compare a short run against dt/2 first");
const POTENTIAL: Key = switch("potential", "include the expulsive potential");
const SNAPSHOTS: Key = switch("snapshots", "write field snapshots");
const EPSILON: Key = key("epsilon", "relative perturbation amplitude");
const NORM_EXTENT: Key = key("norm-extent", "extent of the unclamped solve used for norms");

const EVOLVE_DEFAULTS: [(&str, &str); 17] = [
    ("g", "0"),
    ("sigma", "1"),
    ("energy", "0"),
    ("parity", "even"),
    ("amplitude", "1"),
    ("ppw", "16"),
    ("t-end", "10"),
    ("dt-phase", "0.2"),
    ("dt-max", "0.002"),
    ("absorber", "relaxation"),
    ("absorber-width", "1"),
    ("absorber-strength", "50"),
    ("stride", "500"),
    ("seed", "1"),
    ("step-check", "true"),
    ("potential", "true"),
    ("snapshots", "false"),
];

pub const SUBCOMMANDS: &[Subcommand] = &[
    Subcommand {
        name: "solve1d",
        about: "stationary 1D state with structure report, tail fit and norm curve",
        keys: &[
            GAMMA, G, SIGMA, ENERGY, PARITY, EXTENT, AMPLITUDE, PPW, CLAMP, SAMPLES, FIT_INNER, FIT_OUTER,
            FIT_ORDER, NORM_POINTS, TARGET_NORM, AMP_LOW, AMP_HIGH,
        ],
        defaults: &[
            ("g", "0"),
            ("sigma", "1"),
            ("energy", "0"),
            ("parity", "even"),
            ("L", "30"),
            ("amplitude", "1"),
            ("ppw", "16"),
            ("norm-points", "10"),
            ("amp-low", "0.05"),
            ("amp-high", "3"),
        ],
        dimension: Some("1d"),
        run: solve1d,
    },
    Subcommand {
        name: "solve2d",
        about: "stationary radial state with tail fit and norm curve",
        keys: &[
            GAMMA, G, SIGMA, ENERGY, VORTICITY, EXTENT, AMPLITUDE, PPW, SAMPLES, FIT_INNER, FIT_OUTER, FIT_ORDER,
            NORM_POINTS,
        ],
        defaults: &[
            ("g", "0"),
            ("sigma", "1"),
            ("energy", "0"),
            ("vorticity", "0"),
            ("L", "20"),
            ("amplitude", "1"),
            ("ppw", "16"),
            ("norm-points", "10"),
        ],
        dimension: Some("2d-radial"),
        run: solve2d,
    },
    Subcommand {
        name: "evolve",
        about: "time evolution from a state file or a prepared stationary state",
        keys: &[
            GAMMA, G, SIGMA, ENERGY, PARITY, AMPLITUDE, PPW, STATE, T_END, DT, DT_PHASE, DT_MAX, CORE, CLAMP,
            ABSORBER, ABS_WIDTH, ABS_STRENGTH, STRIDE, SEED, SPECTRAL, NL_PHASE, STEP_CHECK, POTENTIAL,
            SNAPSHOTS,
        ],
        defaults: &EVOLVE_DEFAULTS,
        dimension: Some("1d"),
        run: evolve,
    },
    Subcommand {
        name: "stability",
        about: "perturb a stationary state, evolve it and classify the outcome",
        keys: &[
            GAMMA, G, SIGMA, ENERGY, PARITY, AMPLITUDE, PPW, TARGET_NORM, AMP_LOW, AMP_HIGH, NORM_EXTENT,
            EPSILON, T_END, DT, DT_PHASE, DT_MAX, CORE, CLAMP, ABSORBER, ABS_WIDTH, ABS_STRENGTH, STRIDE, SEED,
            SPECTRAL, NL_PHASE, STEP_CHECK, POTENTIAL, SNAPSHOTS,
        ],
        defaults: &[
            ("g", "0"),
            ("sigma", "1"),
            ("energy", "0"),
            ("parity", "even"),
            ("amplitude", "1"),
            ("ppw", "16"),
            ("amp-low", "0.05"),
            ("amp-high", "3"),
            ("norm-extent", "20"),
            ("epsilon", "0.01"),
            ("t-end", "50"),
            ("dt-phase", "0.2"),
            ("dt-max", "0.002"),
            ("absorber", "relaxation"),
            ("absorber-width", "1"),
            ("absorber-strength", "50"),
            ("stride", "500"),
            ("seed", "1"),
            ("step-check", "true"),
            ("potential", "true"),
            ("snapshots", "false"),
        ],
        dimension: Some("1d"),
        run: stability,
    },
    Subcommand {
        name: "scan-xmax",
        about: "position of the maximum of even linear states against E < 0",
        keys: &[GAMMA, key("energies", "ladder a:b:log:n, a:b:lin:n or a list"), EXTENT, PPW],
        defaults: &[("gamma", "2"), ("L", "1"), ("ppw", "16")],
        dimension: None,
        run: scan_xmax,
    },
    Subcommand {
        name: "collapse-scan",
        about: "bracket the collapse threshold of a quintic focusing state",
        keys: &[
            GAMMA, G, SIGMA, ENERGY, PARITY, key("amplitudes", "ascending amplitude ladder"), PPW, NORM_EXTENT,
            EPSILON, key("ratio", "target N_high/N_low"), key("max-bisections", "bisection cap"), T_END, DT,
            DT_PHASE, CORE, CLAMP, ABSORBER, ABS_WIDTH, ABS_STRENGTH, STRIDE, SEED, SPECTRAL, NL_PHASE,
            STEP_CHECK,
        ],
        defaults: &[
            ("gamma", "2"),
            ("g", "-1"),
            ("sigma", "2"),
            ("energy", "-1"),
            ("parity", "even"),
            ("amplitudes", "0.2,0.4,0.6,0.8,1.0"),
            ("ppw", "32"),
            ("norm-extent", "20"),
            ("epsilon", "0.01"),
            ("ratio", "1.2"),
            ("max-bisections", "12"),
            ("t-end", "20"),
            ("dt-phase", "0.1"),
            ("absorber", "relaxation"),
            ("absorber-width", "0.8"),
            ("absorber-strength", "50"),
            ("stride", "100"),
            ("seed", "1"),
            ("step-check", "true"),
        ],
        dimension: Some("1d"),
        run: collapse,
    },
    Subcommand {
        name: "exact",
        about: "tabulate a closed-form object: asymptote, vortex, vnw or coupled",
        keys: &[
            key("object", "asymptote, vortex, vnw or coupled"),
            key("r-min", "first coordinate"),
            key("r-max", "last coordinate"),
            SAMPLES,
            GAMMA,
            G,
            SIGMA,
            ENERGY,
            PARITY,
            VORTICITY,
            key("phi0", "tail amplitude or vortex scale"),
            key("chi0", "tail phase"),
            key("order", "asymptotic order"),
            key("core-scale", "core scale l of the inverted-oscillator tail"),
            key("lambda", "coupling lambda"),
            key("kappa", "v-potential coefficient kappa"),
            key("u0", "coupled amplitude U0"),
        ],
        defaults: &[("r-min", "0.1"), ("r-max", "10"), ("samples", "1001"), ("phi0", "1"), ("chi0", "0"), ("order", "1")],
        dimension: None,
        run: exact,
    },
    Subcommand {
        name: "fit-tail",
        about: "fit the asymptotic tail model to a state file",
        keys: &[
            STATE,
            key("dimension", "1d or 2d-radial"),
            GAMMA,
            G,
            SIGMA,
            ENERGY,
            PARITY,
            VORTICITY,
            FIT_INNER,
            FIT_OUTER,
            FIT_ORDER,
        ],
        defaults: &[("dimension", "1d"), ("g", "0"), ("sigma", "1"), ("energy", "0")],
        dimension: None,
        run: fit_tail_cmd,
    },
    Subcommand {
        name: "verify",
        about: "residual suite for the closed-form solutions",
        keys: &[key("tolerance", "largest accepted relative residual"), key("points", "samples per residual check")],
        defaults: &[("tolerance", "1e-8"), ("points", "200")],
        dimension: None,
        run: verify,
    },
];

fn attempt<T: Serialize>(r: expulsive::Result<T>) -> Value {
    match r {
        Ok(v) => json!(v),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

/// Folds the recorded `log_scale` into the samples when that is finite.
fn unscaled(wf: WaveFunction) -> WaveFunction {
    let factor = wf.log_scale.exp();
    if wf.log_scale == 0.0 || !factor.is_finite() || factor == 0.0 {
        return wf;
    }
    let mut out = wf.scaled(factor);
    out.log_scale = 0.0;
    out
}

fn shoot_config(s: &Settings) -> Result<ShootConfig, CliError> {
    let mut cfg = ShootConfig::new(s.get("L")?)
        .with_amplitude(s.get("amplitude")?)
        .with_points_per_wavelength(s.get("ppw")?);
    if let Some(c) = s.optional("clamp")? {
        cfg = cfg.with_clamp(c);
    }
    if let Some(n) = s.optional("samples")? {
        cfg = cfg.with_samples(n);
    }
    Ok(cfg)
}

fn write_state(out: &mut OutputDir, wf: &WaveFunction, axis: &str) -> Result<(), CliError> {
    let xs = wf.coordinates();
    if wf.slopes.is_empty() {
        out.csv("state.csv", &[axis, "phi"], &[&xs, &wf.values])
    } else {
        out.csv("state.csv", &[axis, "phi", "dphi"], &[&xs, &wf.values, &wf.slopes])
    }
}

fn fit_window(s: &Settings, extent: f64) -> Result<(f64, f64), CliError> {
    Ok((
        s.optional("fit-inner")?.unwrap_or(extent / 3.0),
        s.optional("fit-outer")?.unwrap_or(0.85 * extent),
    ))
}

/// Tail fit, deviation from the fitted model, norm curve and corrected
/// norm; each failure is reported in place rather than aborting.
fn analyse(s: &Settings, wf: &WaveFunction, spec: &ProblemSpec) -> Result<Value, CliError> {
    let extent = wf.grid.end();
    let window = fit_window(s, extent)?;
    let fit = match s.optional::<u8>("fit-order")? {
        Some(order) => fit_tail_with_order(wf, spec, window, order),
        None => fit_tail(wf, spec, window),
    };
    let deviation = fit.as_ref().map_err(Clone::clone).and_then(|f| asymptotic_deviation(wf, f, spec));
    let points: usize = s.optional("norm-points")?.unwrap_or(10).max(4);
    let truncations: Vec<f64> = (0..points)
        .map(|k| extent / 3.0 + (0.95 - 1.0 / 3.0) * extent * k as f64 / (points - 1) as f64)
        .collect();
    Ok(json!({
        "tail_fit": attempt(fit),
        "asymptotic_deviation": attempt(deviation),
        "norm_curve": attempt(norm_curve(wf, spec, &truncations)),
        "tail_corrected_norm": attempt(tail_corrected_norm(wf, spec)),
    }))
}

fn merge(mut base: Value, extra: Value) -> Value {
    if let (Value::Object(a), Value::Object(b)) = (&mut base, extra) {
        a.extend(b);
    }
    base
}

fn solve1d(s: &Settings, out: &mut OutputDir, _: &mut Vec<String>) -> Result<Value, CliError> {
    let spec = s.problem("1d")?;
    let cfg = shoot_config(s)?;
    let (wf, amplitude) = match s.optional::<f64>("target-norm")? {
        Some(target) => {
            let tuned = solve_for_norm(&spec, &cfg, target, s.get("amp-low")?, s.get("amp-high")?)?;
            (tuned.state, tuned.amplitude)
        }
        None => (solve_stationary_1d(&spec, &cfg)?, cfg.amplitude),
    };
    let wf = unscaled(wf);
    write_state(out, &wf, "x")?;
    let head = json!({
        "problem": spec.to_key_values(),
        "amplitude": amplitude,
        "samples": wf.grid.samples,
        "spacing": wf.spacing(),
        "log_scale": wf.log_scale,
        "structure": attempt(classify_structure(&wf, &spec)),
    });
    Ok(merge(head, analyse(s, &wf, &spec)?))
}

fn solve2d(s: &Settings, out: &mut OutputDir, _: &mut Vec<String>) -> Result<Value, CliError> {
    let spec = s.problem("2d-radial")?;
    let cfg = shoot_config(s)?;
    let start = RadialStart::for_problem(&spec, &cfg)?;
    let wf = unscaled(solve_stationary_2d(&spec, &cfg, &start)?);
    write_state(out, &wf, "r")?;
    let head = json!({
        "problem": spec.to_key_values(),
        "amplitude": cfg.amplitude,
        "samples": wf.grid.samples,
        "spacing": wf.spacing(),
        "log_scale": wf.log_scale,
        "series_start": start.epsilon,
    });
    Ok(merge(head, analyse(s, &wf, &spec)?))
}

fn load_state(path: &Path, spec: &ProblemSpec, axis: &str) -> Result<WaveFunction, CliError> {
    let cols = read_columns(path, &[axis, "phi"])?;
    let (xs, values) = (&cols[0], cols[1].clone());
    if xs.len() < 2 || xs[0] != 0.0 {
        return Err(CliError::Config(format!("{}: grid must start at 0 with two or more samples", path.display())));
    }
    let extent = xs[xs.len() - 1];
    let grid = Grid::new(extent, xs.len())?;
    let h = grid.spacing();
    if let Some(i) = (0..xs.len()).find(|&i| (xs[i] - grid.point(i)).abs() > 1e-9 * extent.max(1.0) + 1e-6 * h) {
        return Err(CliError::Config(format!("{}: non-uniform grid at row {}", path.display(), i + 1)));
    }
    Ok(WaveFunction::new(grid, spec.geometry, Normalization::Sampled, values, Vec::new())?)
}

fn evolve_config(s: &Settings, spec: &ProblemSpec) -> Result<EvolveConfig, CliError> {
    let core = match s.optional("core-radius")? {
        Some(r) => r,
        None => default_core_radius(spec),
    };
    let absorber = match s.required("absorber")? {
        "relaxation" => AbsorberKind::Relaxation,
        "damping" => AbsorberKind::Damping,
        other => return Err(CliError::Config(format!("unknown absorber '{other}'"))),
    };
    let mut cfg = EvolveConfig::new(s.get("t-end")?, 1.0, core)
        .with_absorber(absorber, s.get("absorber-width")?, s.get("absorber-strength")?)
        .with_stride(s.get("stride")?)
        .with_seed(s.get("seed")?)
        .with_step_check(s.flag("step-check")?);
    if let Some(c) = s.optional("clamp")? {
        cfg = cfg.with_clamp(c);
    }
    if s.contains("potential") && !s.flag("potential")? {
        cfg = cfg.without_potential();
    }
    if s.flag("snapshots")? {
        cfg = cfg.with_snapshots();
    }
    if let Some(v) = s.optional("spectral-threshold")? {
        cfg.spectral_threshold = v;
    }
    if let Some(v) = s.optional("nonlinear-phase")? {
        cfg.nonlinear_phase = v;
    }
    cfg.dt = match s.optional("dt")? {
        Some(dt) => dt,
        None => {
            let v_max = if cfg.potential {
                0.5 * cfg.effective_clamp().powf(2.0 * spec.gamma)
            } else {
                0.0
            };
            let dt = s.get::<f64>("dt-phase")? / v_max.max(1.0);
            match s.optional::<f64>("dt-max")? {
                Some(cap) => dt.min(cap),
                None => dt,
            }
        }
    };
    cfg.validate()?;
    Ok(cfg)
}

fn write_trajectory(out: &mut OutputDir, traj: &Trajectory) -> Result<(), CliError> {
    out.csv(
        "trajectory.csv",
        &["t", "core_norm", "total_norm", "peak_amplitude", "profile_deviation", "origin_phase"],
        &[
            &traj.times,
            &traj.core_norm,
            &traj.total_norm,
            &traj.peak_amplitude,
            &traj.profile_deviation,
            &traj.origin_phase,
        ],
    )?;
    let xs = traj.final_field.coordinates();
    let re: Vec<f64> = traj.final_field.psi.iter().map(|p| p.re).collect();
    let im: Vec<f64> = traj.final_field.psi.iter().map(|p| p.im).collect();
    out.csv("final.csv", &["x", "re", "im"], &[&xs, &re, &im])?;
    if !traj.snapshots.is_empty() {
        let rows: Vec<Vec<String>> = traj
            .snapshots
            .iter()
            .flat_map(|snap| {
                xs.iter().zip(&snap.psi).map(move |(x, p)| {
                    vec![format_number(snap.t), format_number(*x), format_number(p.re), format_number(p.im)]
                })
            })
            .collect();
        out.csv_text("snapshots.csv", &["t", "x", "re", "im"], &rows)?;
    }
    Ok(())
}

fn trajectory_summary(traj: &Trajectory, cfg: &EvolveConfig) -> Value {
    json!({
        "dt": cfg.dt,
        "core_radius": cfg.core_radius,
        "clamp": cfg.effective_clamp(),
        "box_half_width": traj.final_field.half_width,
        "box_samples": traj.final_field.len(),
        "final_time": traj.times.last(),
        "max_profile_deviation": traj.max_profile_deviation(),
        "initial_core_norm": traj.core_norm.first(),
        "final_core_norm": traj.core_norm.last(),
        "blowup": traj.blowup,
    })
}

fn evolve(s: &Settings, out: &mut OutputDir, inputs: &mut Vec<String>) -> Result<Value, CliError> {
    let spec = s.problem("1d")?;
    let cfg = evolve_config(s, &spec)?;
    let state = match s.raw("state") {
        Some(path) => {
            inputs.push(path.to_string());
            load_state(Path::new(path), &spec, "x")?
        }
        None => unscaled(prepare_state(&spec, s.get("amplitude")?, &cfg, s.get("ppw")?)?),
    };
    let traj = propagate(&state, &spec, &cfg)?;
    write_trajectory(out, &traj)?;
    Ok(merge(json!({ "problem": spec.to_key_values() }), trajectory_summary(&traj, &cfg)))
}

fn stability(s: &Settings, out: &mut OutputDir, _: &mut Vec<String>) -> Result<Value, CliError> {
    let spec = s.problem("1d")?;
    let cfg = evolve_config(s, &spec)?;
    let ppw: u32 = s.get("ppw")?;
    let free = ShootConfig::new(s.get("norm-extent")?).with_points_per_wavelength(ppw);
    let (amplitude, norm) = match s.optional::<f64>("target-norm")? {
        Some(target) => {
            let tuned = solve_for_norm(&spec, &free, target, s.get("amp-low")?, s.get("amp-high")?)?;
            (tuned.amplitude, tuned.norm)
        }
        None => {
            let a: f64 = s.get("amplitude")?;
            let wf = solve_stationary_1d(&spec, &free.with_amplitude(a))?;
            (a, tail_corrected_norm(&wf, &spec)?)
        }
    };
    let state = unscaled(prepare_state(&spec, amplitude, &cfg, ppw)?);
    let (verdict, traj) = stability_run(&state, &spec, s.get("epsilon")?, &cfg)?;
    write_trajectory(out, &traj)?;
    let head = json!({
        "problem": spec.to_key_values(),
        "amplitude": amplitude,
        "norm": norm,
        "verdict": verdict.verdict,
        "max_profile_deviation": verdict.max_profile_deviation,
        "blowup_time": verdict.blowup_time,
    });
    Ok(merge(head, trajectory_summary(&traj, &cfg)))
}

fn scan_xmax(s: &Settings, out: &mut OutputDir, _: &mut Vec<String>) -> Result<Value, CliError> {
    let gamma: f64 = s.get("gamma")?;
    let energies = s.list("energies")?;
    let cfg = ShootConfig::new(s.get("L")?).with_points_per_wavelength(s.get("ppw")?);
    let scan = xmax_scan(gamma, &energies, &cfg)?;
    let e: Vec<f64> = scan.points.iter().map(|p| p.energy).collect();
    let x: Vec<f64> = scan.points.iter().map(|p| p.x_max).collect();
    out.csv("xmax.csv", &["energy", "x_max", "residual"], &[&e, &x, &scan.residuals])?;
    Ok(json!({
        "problem": { "gamma": gamma, "g": 0, "parity": "even", "dimension": "1d" },
        "slope": scan.slope,
        "intercept": scan.intercept,
        "predicted_slope": 1.0 / (2.0 * gamma),
        "points": scan.points,
    }))
}

fn collapse(s: &Settings, out: &mut OutputDir, _: &mut Vec<String>) -> Result<Value, CliError> {
    let spec = s.problem("1d")?;
    let evolve = evolve_config(s, &spec)?;
    let mut cfg = CollapseScanConfig::new(evolve);
    cfg.epsilon = s.get("epsilon")?;
    cfg.points_per_wavelength = s.get("ppw")?;
    cfg.norm_extent = s.get("norm-extent")?;
    cfg.ratio = s.get("ratio")?;
    cfg.max_bisections = s.get("max-bisections")?;
    let bracket = collapse_scan(&spec, &s.list("amplitudes")?, &cfg)?;
    let rows: Vec<Vec<String>> = bracket
        .ladder
        .iter()
        .map(|r| ("ladder", r))
        .chain(bracket.bisections.iter().map(|r| ("bisection", r)))
        .map(|(stage, r)| {
            vec![
                stage.to_string(),
                format_number(r.amplitude),
                format_number(r.norm),
                format!("{:?}", r.verdict.verdict).to_lowercase(),
                format_number(r.verdict.max_profile_deviation),
                r.verdict.blowup_time.map(format_number).unwrap_or_default(),
            ]
        })
        .collect();
    out.csv_text(
        "ladder.csv",
        &["stage", "amplitude", "norm", "verdict", "max_profile_deviation", "blowup_time"],
        &rows,
    )?;
    Ok(json!({
        "problem": spec.to_key_values(),
        "dt": cfg.evolve.dt,
        "n_low": bracket.n_low,
        "n_high": bracket.n_high,
        "ratio": bracket.n_high / bracket.n_low,
        "amplitude_low": bracket.amplitude_low,
        "amplitude_high": bracket.amplitude_high,
        "townes_norm": bracket.townes_norm,
        "ladder": bracket.ladder,
        "bisections": bracket.bisections,
    }))
}

fn coordinates(s: &Settings) -> Result<Vec<f64>, CliError> {
    let (a, b, n): (f64, f64, usize) = (s.get("r-min")?, s.get("r-max")?, s.get("samples")?);
    if !(a >= 0.0 && b > a && n >= 2) {
        return Err(CliError::Config("need 0 <= r-min < r-max and samples >= 2".into()));
    }
    Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect())
}

fn exact(s: &Settings, out: &mut OutputDir, _: &mut Vec<String>) -> Result<Value, CliError> {
    let rs = coordinates(s)?;
    match s.required("object")? {
        "asymptote" => {
            let dimension = if s.contains("vorticity") { "2d-radial" } else { "1d" };
            let spec = s.problem(dimension)?;
            let mut params = AsymptoteParams::new(s.get("phi0")?, s.get("chi0")?, s.get("order")?);
            if let Some(l) = s.optional("core-scale")? {
                params = params.with_core_scale(l);
            }
            let vals = rs
                .iter()
                .map(|&r| tail_model(&spec, &params, r))
                .collect::<expulsive::Result<Vec<f64>>>()?;
            out.csv("table.csv", &["x", "phi"], &[&rs, &vals])?;
            Ok(json!({ "object": "asymptote", "problem": spec.to_key_values(), "params": params }))
        }
        "vortex" => {
            let v: u32 = s.optional("vorticity")?.unwrap_or(1);
            let phi0: f64 = s.get("phi0")?;
            let vals: Vec<f64> = rs.iter().map(|&r| if r == 0.0 { 0.0 } else { exact_vortex(v, phi0, r) }).collect();
            out.csv("table.csv", &["r", "phi"], &[&rs, &vals])?;
            let spec = ProblemSpec::radial(exact_vortex_gamma(v), 0.0, v);
            let norm = match exact_vortex_norm(v, phi0) {
                VortexNorm::Finite(n) => json!(n),
                VortexNorm::Divergent => json!("log-divergent"),
            };
            Ok(json!({ "object": "vortex", "problem": spec.to_key_values(), "phi0": phi0, "norm": norm }))
        }
        "vnw" => {
            let (u, phi): (Vec<f64>, Vec<f64>) = rs.iter().map(|&r| vnw_state(r)).unzip();
            out.csv("table.csv", &["r", "potential", "phi"], &[&rs, &u, &phi])?;
            Ok(json!({ "object": "vnw", "problem": { "dimension": "3d-radial", "energy": 0.0 } }))
        }
        "coupled" => {
            let spec = CoupledSystemSpec::constrained(
                s.optional("lambda")?.unwrap_or(1.0),
                s.optional("kappa")?.unwrap_or(0.0),
                s.optional("vorticity")?.unwrap_or(0),
                s.optional("u0")?.unwrap_or(1.0),
            )?;
            let n = rs.len();
            let grid = Grid {
                start: rs[0],
                extent: rs[n - 1] - rs[0],
                samples: n,
            };
            let fields = coupled_exact_fields(&spec, &grid)?;
            out.csv("table.csv", &["r", "u", "v"], &[&rs, &fields.u, &fields.v])?;
            Ok(json!({ "object": "coupled", "problem": spec, "energy_exact": fields.energy_exact }))
        }
        other => Err(CliError::Config(format!("unknown object '{other}'"))),
    }
}

fn fit_tail_cmd(s: &Settings, out: &mut OutputDir, inputs: &mut Vec<String>) -> Result<Value, CliError> {
    let dimension = s.required("dimension")?;
    let spec = s.problem(dimension)?;
    let path = s.required("state")?;
    inputs.push(path.to_string());
    let axis = if spec.geometry.is_line() { "x" } else { "r" };
    let wf = load_state(Path::new(path), &spec, axis)?;
    let window = fit_window(s, wf.grid.end())?;
    let fit = match s.optional::<u8>("fit-order")? {
        Some(order) => fit_tail_with_order(&wf, &spec, window, order)?,
        None => fit_tail(&wf, &spec, window)?,
    };
    let params = fit.params();
    let (mut xs, mut phi, mut model) = (Vec::new(), Vec::new(), Vec::new());
    for (x, v) in wf.coordinates().into_iter().zip(&wf.values) {
        if x >= window.0 && x <= window.1 {
            xs.push(x);
            phi.push(*v);
            model.push(tail_model(&spec, &params, x)?);
        }
    }
    out.csv("model.csv", &[axis, "phi", "model"], &[&xs, &phi, &model])?;
    Ok(json!({
        "problem": spec.to_key_values(),
        "tail_fit": fit,
        "asymptotic_deviation": attempt(asymptotic_deviation(&wf, &fit, &spec)),
    }))
}

struct Check {
    name: String,
    parameter: String,
    value: f64,
    tolerance: Option<f64>,
}

fn verify(s: &Settings, out: &mut OutputDir, _: &mut Vec<String>) -> Result<Value, CliError> {
    let tol: f64 = s.get("tolerance")?;
    let points: usize = s.get("points")?;
    let span = |a: f64, b: f64| (0..points).map(move |i| a + (b - a) * i as f64 / (points - 1).max(1) as f64);
    let mut checks = Vec::new();
    for v in 1..=3 {
        let worst = span(0.1, 10.0).map(|r| exact_vortex_residual(v, r).relative()).fold(0.0, f64::max);
        checks.push(Check {
            name: "vortex".into(),
            parameter: format!("S={v}"),
            value: worst,
            tolerance: Some(tol),
        });
    }
    let worst = span(0.2, 3.0).map(|r| vnw_residual(r).relative()).fold(0.0, f64::max);
    checks.push(Check {
        name: "vnw".into(),
        parameter: "E=0".into(),
        value: worst,
        tolerance: Some(tol),
    });
    let h = 0.002;
    let grid = Grid {
        start: 0.1 - 4.0 * h,
        extent: 5.9 + 8.0 * h,
        samples: (((5.9 + 8.0 * h) / h).round() as usize) + 1,
    };
    for (v, lambda) in [(0u32, 1.0), (1, 2.0), (2, 1.5)] {
        let spec = CoupledSystemSpec::constrained(lambda, 0.0, v, 1.0)?;
        let fields = coupled_exact_fields(&spec, &grid)?;
        let res = coupled_residual(&spec, &fields, tol)?;
        checks.push(Check {
            name: "coupled-u".into(),
            parameter: format!("S={v} lambda={lambda}"),
            value: res.max_u(),
            tolerance: Some(tol),
        });
    }
    let sweep = kappa_sweep(1.0, 0, 1.0, &grid, &[0.0, 0.5, 1.0, 2.0], tol)?;
    for (kappa, res) in &sweep.samples {
        checks.push(Check {
            name: "coupled-v".into(),
            parameter: format!("S=0 lambda=1 kappa={kappa}"),
            value: *res,
            tolerance: None,
        });
    }
    let failed: Vec<String> = checks
        .iter()
        .filter(|c| c.tolerance.is_some_and(|t| !(c.value < t)))
        .map(|c| format!("{} {}", c.name, c.parameter))
        .collect();
    let rows: Vec<Vec<String>> = checks
        .iter()
        .map(|c| {
            let status = match c.tolerance {
                None => "info",
                Some(t) if c.value < t => "pass",
                Some(_) => "fail",
            };
            vec![
                c.name.clone(),
                c.parameter.clone(),
                format_number(c.value),
                c.tolerance.map(format_number).unwrap_or_default(),
                status.to_string(),
            ]
        })
        .collect();
    out.csv_text("verify.csv", &["check", "parameter", "max_residual", "tolerance", "status"], &rows)?;
    if !failed.is_empty() {
        return Err(CliError::Check(failed.join(", ")));
    }
    Ok(json!({
        "problem": { "suite": ["vortex S=1..3", "vnw", "coupled S,lambda = (0,1), (1,2), (2,1.5)"] },
        "checks": checks.len(),
        "kappa_sweep": sweep,
    }))
}
