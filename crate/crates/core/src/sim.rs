//! Scenario configuration and the closed-loop simulation driver.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::beam::{measure, BeamMesh, BeamPlant, MapConfig, Sampler};
use crate::controller::{ControlOptions, ControllerState, EsController, EsGains, GradientFeedback};
use crate::dither::DitherParams;
use crate::error::{file_error, Error, Result};
use crate::kernel::{KernelTable, DEFAULT_QUAD_ORDER};
use crate::scalar::{lit, to_f64, Real};

/// Number of beam profiles written to `snapshots.csv`.
pub const SNAPSHOT_COUNT: usize = 100;

/// Number of trailing dither periods the summary averages over.
pub const SUMMARY_PERIODS: f64 = 5.0;

/// Half-width of the band around `Θ*` that the one-period running mean of
/// `θ̂₁` must settle into. The mean is used because `θ̂₁` carries a ripple
/// at the dither frequency.
pub const SETTLE_BAND: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig<T> {
    pub map: MapConfig<T>,
    pub dither: DitherParams<T>,
    pub gains: EsGains<T>,
    pub n_elems: usize,
    pub dt: T,
    pub t_end: T,
    pub quad_order: usize,
    pub theta1_hat0: T,
    pub theta2_hat0: T,
    /// Initial Hessian guess; also sets the floor below which `K̄` is held.
    pub hhat0: T,
    pub use_true_hessian: bool,
    pub u1_sign_variant: bool,
    pub feedback: GradientFeedback,
    /// Write every `decimation`-th step to `timeseries.csv`.
    pub decimation: usize,
    pub out_dir: Option<PathBuf>,
}

const KEYS: &[&str] = &[
    "H",
    "Theta_star",
    "y_star",
    "a",
    "omega",
    "K",
    "c",
    "cbar",
    "n_elems",
    "dt",
    "t_end",
    "quad_order",
    "theta1_hat0",
    "theta2_hat0",
    "hhat0",
    "use_true_hessian",
    "u1_sign_variant",
    "feedback",
    "decimation",
    "out_dir",
];

fn invalid(field: &str, msg: impl Into<String>) -> Error {
    Error::ConfigInvalid { field: field.to_string(), msg: msg.into() }
}

fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "true" | "1" | "yes" => Some(true),
        "false" | "0" | "no" => Some(false),
        _ => None,
    }
}

impl<T: Real> SimConfig<T> {
    /// Parses `key = value` lines on top of the default scenario.
    pub fn parse(text: &str) -> Result<Self> {
        let mut num: std::collections::HashMap<&str, f64> = std::collections::HashMap::new();
        let mut flags: std::collections::HashMap<&str, bool> = std::collections::HashMap::new();
        let mut feedback = GradientFeedback::default();
        let mut out_dir = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::ConfigParse {
                line: line_no,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            let key = *KEYS.iter().find(|k| **k == key).ok_or_else(|| Error::ConfigParse {
                line: line_no,
                msg: format!("unknown key `{key}`"),
            })?;
            let perr = |msg: String| Error::ConfigParse { line: line_no, msg };
            match key {
                "use_true_hessian" | "u1_sign_variant" => {
                    let b = parse_bool(value)
                        .ok_or_else(|| perr(format!("`{key}` expects true/false, got `{value}`")))?;
                    flags.insert(key, b);
                }
                "feedback" => feedback = value.parse().map_err(perr)?,
                "out_dir" => out_dir = Some(PathBuf::from(value)),
                _ => {
                    let v: f64 = value
                        .parse()
                        .map_err(|_| perr(format!("`{key}` expects a number, got `{value}`")))?;
                    num.insert(key, v);
                }
            }
        }

        let get = |k: &str, d: f64| num.get(k).copied().unwrap_or(d);
        let get_usize = |k: &str, d: usize| -> Result<usize> {
            match num.get(k) {
                None => Ok(d),
                Some(&v) if v >= 0.0 && v.fract() == 0.0 => Ok(v as usize),
                Some(&v) => Err(invalid(k, format!("expected a non-negative integer, got {v}"))),
            }
        };

        let map = MapConfig::new(lit(get("H", -1.0)), lit(get("Theta_star", 1.5)), lit(get("y_star", 2.4)))
            .map_err(|e| invalid("H", e.to_string()))?;
        let a = get("a", 0.2);
        if a == 0.0 || !a.is_finite() {
            return Err(invalid("a", "dither amplitude must be nonzero"));
        }
        let omega = get("omega", 5.0);
        let dither = DitherParams::new(lit(a), lit(omega)).map_err(|e| invalid("omega", e.to_string()))?;
        let gains = EsGains::new(lit(get("K", 0.1)), lit(get("c", 0.1)), lit(get("cbar", 6.0)))
            .map_err(|e| invalid("K/c/cbar", e.to_string()))?;
        let n_elems = get_usize("n_elems", 20)?;
        if n_elems < 4 {
            return Err(invalid("n_elems", "need at least 4 elements"));
        }
        let dt = get("dt", 1e-3 * 2.0 * std::f64::consts::PI / omega);
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("dt", "time step must be > 0"));
        }
        let t_end = get("t_end", 200.0);
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(invalid("t_end", "run length must be > 0"));
        }
        let quad_order = get_usize("quad_order", DEFAULT_QUAD_ORDER)?;
        if quad_order < 8 {
            return Err(invalid("quad_order", "need at least 8 nodes"));
        }
        let hhat0 = get("hhat0", -0.5);
        if hhat0.is_nan() || hhat0 >= 0.0 {
            return Err(invalid("hhat0", "initial Hessian guess must be negative"));
        }
        let decimation = get_usize("decimation", 10)?;
        if decimation == 0 {
            return Err(invalid("decimation", "must be >= 1"));
        }
        Ok(Self {
            map,
            dither,
            gains,
            n_elems,
            dt: lit(dt),
            t_end: lit(t_end),
            quad_order,
            theta1_hat0: lit(get("theta1_hat0", 0.0)),
            theta2_hat0: lit(get("theta2_hat0", 0.0)),
            hhat0: lit(hhat0),
            use_true_hessian: flags.get("use_true_hessian").copied().unwrap_or(false),
            u1_sign_variant: flags.get("u1_sign_variant").copied().unwrap_or(false),
            feedback,
            decimation,
            out_dir,
        })
    }

    /// The default scenario: `H = -1`, `Θ* = 1.5`, `y* = 2.4`, `ω = 5`,
    /// `a = 0.2`, `c = 0.1`, `c̄ = 6`, `K = 0.1`.
    pub fn default_scenario() -> Self {
        Self::parse("").expect("defaults are valid")
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round().to_usize().unwrap_or(0)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let f = to_f64::<T>;
        let _ = writeln!(s, "H = {}", f(self.map.hessian));
        let _ = writeln!(s, "Theta_star = {}", f(self.map.theta_star));
        let _ = writeln!(s, "y_star = {}", f(self.map.y_star));
        let _ = writeln!(s, "a = {}", f(self.dither.a));
        let _ = writeln!(s, "omega = {}", f(self.dither.omega));
        let _ = writeln!(s, "K = {}", f(self.gains.k));
        let _ = writeln!(s, "c = {}", f(self.gains.c));
        let _ = writeln!(s, "cbar = {}", f(self.gains.cbar));
        let _ = writeln!(s, "n_elems = {}", self.n_elems);
        let _ = writeln!(s, "dt = {}", f(self.dt));
        let _ = writeln!(s, "t_end = {}", f(self.t_end));
        let _ = writeln!(s, "quad_order = {}", self.quad_order);
        let _ = writeln!(s, "theta1_hat0 = {}", f(self.theta1_hat0));
        let _ = writeln!(s, "theta2_hat0 = {}", f(self.theta2_hat0));
        let _ = writeln!(s, "hhat0 = {}", f(self.hhat0));
        let _ = writeln!(s, "use_true_hessian = {}", self.use_true_hessian);
        let _ = writeln!(s, "u1_sign_variant = {}", self.u1_sign_variant);
        let fb = match self.feedback {
            GradientFeedback::Estimate => "estimate",
            GradientFeedback::Literal => "literal",
        };
        let _ = writeln!(s, "feedback = {fb}");
        let _ = writeln!(s, "decimation = {}", self.decimation);
        if let Some(d) = &self.out_dir {
            let _ = writeln!(s, "out_dir = {}", d.display());
        }
        s
    }
}

pub fn load_config<T: Real>(path: &Path) -> Result<SimConfig<T>> {
    let text = std::fs::read_to_string(path).map_err(file_error(path))?;
    SimConfig::parse(&text)
}

/// One recorded sample of the closed loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub theta: f64,
    pub y: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub g: f64,
    pub hhat: f64,
    pub u1: f64,
    pub u2: f64,
    pub theta1_hat: f64,
    pub theta2_hat: f64,
    pub hhat_filt: f64,
    pub kbar: f64,
    pub beta_at_1: f64,
}

pub const TIMESERIES_HEADER: &str = "t,Theta,y,theta1,theta2,G,Hhat,U1,U2";

impl TraceRow {
    pub fn csv_line(&self) -> String {
        [
            self.t, self.theta, self.y, self.theta1, self.theta2, self.g, self.hhat, self.u1,
            self.u2,
        ]
        .iter()
        .map(|v| format!("{v:.16e}"))
        .collect::<Vec<_>>()
        .join(",")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    /// Mean of `|Θ - Θ*|` over the last five dither periods.
    pub final_theta_err: f64,
    /// Mean of `|y - y*|` over the last five dither periods.
    pub final_y_err: f64,
    /// Max of `|θ₁ - Θ*|` over the last five dither periods.
    pub final_theta1_err: f64,
    pub final_theta1_hat: f64,
    /// Time after which the one-period mean of `θ̂₁` stays within `Θ* ± 0.3`.
    pub settle_time: Option<f64>,
    pub settled: bool,
    pub n_steps: usize,
    pub wall_time: f64,
}

impl RunSummary {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "final_Theta_err: {:.16e}", self.final_theta_err);
        let _ = writeln!(s, "final_y_err: {:.16e}", self.final_y_err);
        let _ = writeln!(s, "final_theta1_err: {:.16e}", self.final_theta1_err);
        let _ = writeln!(s, "final_theta1_hat: {:.16e}", self.final_theta1_hat);
        match self.settle_time {
            Some(t) => {
                let _ = writeln!(s, "settle_time: {t:.16e}");
            }
            None => {
                let _ = writeln!(s, "settle_time: none");
            }
        }
        let _ = writeln!(s, "settled: {}", self.settled);
        let _ = writeln!(s, "n_steps: {}", self.n_steps);
        let _ = writeln!(s, "wall_time: {:.3}", self.wall_time);
        s
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: RunSummary,
    /// Decimated trace (same rows as `timeseries.csv`).
    pub trace: Vec<TraceRow>,
    /// `(t, nodal displacements)` at evenly spaced times.
    pub snapshots: Vec<(f64, Vec<f64>)>,
    pub node_x: Vec<f64>,
}

/// Index of the first step inside the summary window.
pub fn summary_window_start(n_steps: usize, period_steps: f64) -> usize {
    let w = (SUMMARY_PERIODS * period_steps).round() as usize;
    n_steps.saturating_sub(w)
}

/// Runs the closed loop and, if `out_dir` is set, writes the output files.
pub fn run<T: Real>(cfg: &SimConfig<T>) -> Result<RunOutput> {
    let started = Instant::now();
    let table = KernelTable::build(cfg.gains.c, cfg.quad_order)?;
    let mesh = BeamMesh::new(cfg.n_elems)?;
    let plant = BeamPlant::new(mesh, cfg.dt)?;
    let sampler = Sampler::new(&mesh, &table.grid.nodes);
    let opts = ControlOptions {
        feedback: cfg.feedback,
        u1_sign_variant: cfg.u1_sign_variant,
        true_hessian: cfg.use_true_hessian.then_some(cfg.map.hessian),
    };
    let mut ctrl = EsController::new(table, cfg.gains, cfg.dither, opts, cfg.hhat0, cfg.dt)?;
    let mut cs = ControllerState::new(cfg.theta1_hat0, cfg.theta2_hat0, cfg.hhat0);
    let mut beam = plant.trajectory_state(&cfg.dither, cfg.theta1_hat0, cfg.theta2_hat0, T::zero());
    let mut applied = cs.applied_inputs(&cfg.dither, T::zero());

    let n_steps = cfg.n_steps();
    let period_steps = to_f64(cfg.dither.period() / cfg.dt);
    let win_start = summary_window_start(n_steps, period_steps);
    let snap_at: Vec<usize> = (0..SNAPSHOT_COUNT)
        .map(|i| ((i as f64) * n_steps as f64 / (SNAPSHOT_COUNT - 1) as f64).round() as usize)
        .collect();
    let theta_star = to_f64(cfg.map.theta_star);
    let y_star = to_f64(cfg.map.y_star);

    let mut trace = Vec::with_capacity(n_steps / cfg.decimation + 1);
    let mut snapshots = Vec::with_capacity(SNAPSHOT_COUNT);
    let (mut sum_theta, mut sum_y, mut max_theta1, mut n_win) = (0.0, 0.0, 0.0_f64, 0usize);
    let mut last_outside: Option<f64> = None;
    let band = SETTLE_BAND;
    let mean_len = period_steps.round().max(1.0) as usize;
    let mut hat_window = std::collections::VecDeque::with_capacity(mean_len + 1);
    let mut hat_sum = 0.0;

    for n in 0..=n_steps {
        let t: T = cfg.dt * lit(n as f64);
        let meas = measure(&beam, &mesh, &sampler, &cfg.map, &cfg.dither);
        let next = ctrl
            .update(&mut cs, t, &meas)
            .map_err(|e| Error::Run { step: n, t: to_f64(t), source: Box::new(e) })?;

        let row = TraceRow {
            t: to_f64(t),
            theta: to_f64(meas.theta),
            y: to_f64(meas.y),
            theta1: to_f64(applied.theta1),
            theta2: to_f64(applied.theta2),
            g: to_f64(cs.g),
            hhat: to_f64(cs.hhat),
            u1: to_f64(cs.lp1),
            u2: to_f64(cs.lp2),
            theta1_hat: to_f64(cs.theta1_hat),
            theta2_hat: to_f64(cs.theta2_hat),
            hhat_filt: to_f64(cs.hhat_filt),
            kbar: to_f64(cs.kbar),
            beta_at_1: to_f64(meas.beta_at_1),
        };
        if n >= win_start {
            sum_theta += (row.theta - theta_star).abs();
            sum_y += (row.y - y_star).abs();
            max_theta1 = max_theta1.max((row.theta1 - theta_star).abs());
            n_win += 1;
        }
        hat_window.push_back(row.theta1_hat);
        hat_sum += row.theta1_hat;
        if hat_window.len() > mean_len {
            hat_sum -= hat_window.pop_front().unwrap_or(0.0);
        }
        let hat_mean = hat_sum / hat_window.len() as f64;
        if hat_window.len() < mean_len || (hat_mean - theta_star).abs() > band {
            last_outside = Some(row.t);
        }
        if n % cfg.decimation == 0 {
            trace.push(row);
        }
        if snap_at.binary_search(&n).is_ok() {
            let u: Vec<f64> = (0..mesh.n_nodes()).map(|i| to_f64(beam.d[2 * i])).collect();
            snapshots.push((row.t, u));
        }
        if n == n_steps {
            break;
        }
        beam = plant
            .step(&beam, next)
            .map_err(|e| Error::Run { step: n, t: to_f64(t), source: Box::new(e) })?;
        applied = next;
    }

    let t_end = to_f64(cfg.dt) * n_steps as f64;
    let settle_time = match last_outside {
        None => Some(0.0),
        Some(t) if t < t_end => Some(t),
        Some(_) => None,
    };
    let win_t0 = to_f64(cfg.dt) * win_start as f64;
    let summary = RunSummary {
        final_theta_err: sum_theta / n_win.max(1) as f64,
        final_y_err: sum_y / n_win.max(1) as f64,
        final_theta1_err: max_theta1,
        final_theta1_hat: to_f64(cs.theta1_hat),
        settle_time,
        settled: settle_time.is_some_and(|t| t <= win_t0),
        n_steps,
        wall_time: started.elapsed().as_secs_f64(),
    };
    let out = RunOutput {
        summary,
        trace,
        snapshots,
        node_x: mesh.nodes().into_iter().map(to_f64).collect(),
    };
    if let Some(dir) = &cfg.out_dir {
        write_outputs(dir, &out)?;
    }
    Ok(out)
}

/// Writes `timeseries.csv`, `snapshots.csv` and `summary.txt` into `dir`.
pub fn write_outputs(dir: &Path, out: &RunOutput) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(file_error(dir))?;
    let ts_path = dir.join("timeseries.csv");
    let mut ts = std::io::BufWriter::new(std::fs::File::create(&ts_path).map_err(file_error(&ts_path))?);
    writeln!(ts, "{TIMESERIES_HEADER}")?;
    for row in &out.trace {
        writeln!(ts, "{}", row.csv_line())?;
    }
    ts.flush()?;

    let sn_path = dir.join("snapshots.csv");
    let mut sn = std::io::BufWriter::new(std::fs::File::create(&sn_path).map_err(file_error(&sn_path))?);
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain(out.node_x.iter().map(|x| format!("x={x:.6}")))
        .collect();
    writeln!(sn, "{}", header.join(","))?;
    for (t, u) in &out.snapshots {
        let line: Vec<String> =
            std::iter::once(*t).chain(u.iter().copied()).map(|v| format!("{v:.16e}")).collect();
        writeln!(sn, "{}", line.join(","))?;
    }
    sn.flush()?;

    let sum_path = dir.join("summary.txt");
    std::fs::write(&sum_path, out.summary.to_text()).map_err(file_error(&sum_path))?;
    Ok(())
}
