//! Executes a [`RunConfig`] and renders the result as a CSV table with a
//! provenance header.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::config::{ConfigError, GridSpec, ModelSetting, RunConfig, Task, EMBEDDED_PREFIX};
use crate::correl::{
    detector_g2_zero, detector_g2_zero_converged, emission_spectrum_with, g2_emitter_with, log_dense_grid,
    spectrum_bandwidth, Stationary, SPECTRUM_CONVENTION,
};
use crate::error::Error;

/// Relative change allowed under `--strict` when the cutoff grows by one.
pub const CUTOFF_TOLERANCE: f64 = 5e-3;
/// Relative change allowed under `--strict` when a passive coupling is halved.
pub const COUPLING_TOLERANCE: f64 = 1e-2;
/// Largest imaginary residue accepted under `--strict`.
pub const IMAG_TOLERANCE: f64 = 1e-10;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Model(Error),
    #[error("{0}")]
    Convergence(String),
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            Error::NoStationaryState { .. }
            | Error::DegenerateKernel { .. }
            | Error::EigenFailure
            | Error::SingularResolvent { .. }
            | Error::NotConverged(_)
            | Error::ZeroPopulation(_) => RunError::Convergence(e.to_string()),
            other => RunError::Model(other),
        }
    }
}

impl RunError {
    /// Process exit code: 2 for configuration problems, 3 for numerical ones.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Model(_) => 2,
            RunError::Convergence(_) => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Extra convergence checks; failures become [`RunError::Convergence`].
    pub strict: bool,
}

/// Tabular output plus scalar metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub task: Task,
    pub config: BTreeMap<String, String>,
    pub meta: BTreeMap<String, f64>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Fixed 12-significant-digit rendering used for all table values.
pub fn fmt_value(x: f64) -> String {
    format!("{x:.11e}")
}

impl Table {
    /// CSV text: `#` header lines, a column line, then data rows.
    pub fn to_csv(&self, stamp: Option<&str>) -> String {
        let mut out = format!("# sps {}\n# task = {}\n", env!("CARGO_PKG_VERSION"), self.task);
        if matches!(self.task, Task::Spectrum | Task::Bandwidth) {
            out += &format!("# convention = {SPECTRUM_CONVENTION}\n");
        }
        if let Some(s) = stamp {
            out += &format!("# stamp = {s}\n");
        }
        for (k, v) in &self.config {
            out += &format!("{EMBEDDED_PREFIX}{k} = {v}\n");
        }
        for (k, v) in &self.meta {
            out += &format!("# {k}={}\n", fmt_value(*v));
        }
        out += &self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|x| fmt_value(*x)).collect();
            out += &cells.join(",");
            out.push('\n');
        }
        out
    }

    /// Header information as JSON.
    pub fn header_json(&self, stamp: Option<&str>) -> serde_json::Value {
        let meta: BTreeMap<&str, String> = self.meta.iter().map(|(k, v)| (k.as_str(), fmt_value(*v))).collect();
        let mut v = serde_json::json!({
            "version": env!("CARGO_PKG_VERSION"),
            "task": self.task.name(),
            "config": self.config,
            "meta": meta,
            "columns": self.columns,
            "rows": self.rows.len(),
        });
        if matches!(self.task, Task::Spectrum | Task::Bandwidth) {
            v["convention"] = SPECTRUM_CONVENTION.into();
        }
        if let Some(s) = stamp {
            v["stamp"] = s.into();
        }
        v
    }
}

pub fn run(cfg: &RunConfig, opts: RunOptions) -> Result<Table, RunError> {
    let mut table = if cfg.sweeps.is_empty() { run_single(cfg, opts)? } else { run_sweep(cfg, opts)? };
    table.config = cfg.canonical().clone();
    Ok(table)
}

fn table(task: Task, columns: &[&str]) -> Table {
    Table {
        task,
        config: BTreeMap::new(),
        meta: BTreeMap::new(),
        columns: columns.iter().map(|s| s.to_string()).collect(),
        rows: Vec::new(),
    }
}

fn run_single(cfg: &RunConfig, opts: RunOptions) -> Result<Table, RunError> {
    let sc = cfg.scenario()?;
    match cfg.task {
        Task::Steady => {
            let st = Stationary::new(&sc.model)?;
            let rho = st.state();
            let mut t = table(Task::Steady, &["row", "col", "re", "im"]);
            t.meta.insert("emission_rate".into(), emission_rate(&st, &sc.lowering));
            let d = rho.matrix().nrows();
            for c in 0..d {
                for r in 0..d {
                    let z = rho.matrix()[(r, c)];
                    t.rows.push(vec![r as f64, c as f64, z.re, z.im]);
                }
            }
            Ok(t)
        }
        Task::Spectrum => {
            let omegas = omega_grid(cfg, &cfg.omega_grid, false);
            let st = Stationary::new(&sc.model)?;
            let s = emission_spectrum_with(&st, &sc.lowering, &omegas)?;
            if opts.strict && !(s.imag_residue < IMAG_TOLERANCE) {
                return Err(RunError::Convergence(format!("spectrum imaginary residue {:e}", s.imag_residue)));
            }
            let mut cols = vec!["omega", "S_incoherent"];
            if cfg.gamma_mhz.is_some() {
                cols.push("omega_mhz");
            }
            let mut t = table(Task::Spectrum, &cols);
            t.meta.insert("coherent_weight".into(), s.coherent_weight);
            t.meta.insert("total_incoherent".into(), s.total_incoherent);
            t.meta.insert("imag_residue".into(), s.imag_residue);
            for (w, y) in s.frequencies.iter().zip(&s.incoherent) {
                let mut row = vec![*w, *y];
                if let Some(u) = cfg.gamma_mhz {
                    row.push(w * u);
                }
                t.rows.push(row);
            }
            Ok(t)
        }
        Task::G2 => {
            let taus = tau_grid(cfg);
            let st = Stationary::new(&sc.model)?;
            let trace = g2_emitter_with(&st, &sc.lowering, &taus)?;
            let imag = trace.max_imag();
            if opts.strict && !(imag < IMAG_TOLERANCE) {
                return Err(RunError::Convergence(format!("g2 imaginary part {imag:e}")));
            }
            let mut cols = vec!["tau", "g2"];
            if cfg.gamma_mhz.is_some() {
                cols.push("tau_us");
            }
            let mut t = table(Task::G2, &cols);
            t.meta.insert("mean_intensity".into(), trace.normalization.unwrap_or(f64::NAN));
            t.meta.insert("max_imag".into(), imag);
            for (tau, g) in trace.delays.iter().zip(trace.real_values()) {
                let mut row = vec![*tau, g];
                if let Some(u) = cfg.gamma_mhz {
                    row.push(tau / u);
                }
                t.rows.push(row);
            }
            Ok(t)
        }
        Task::DetectorG2 | Task::Bandwidth => {
            let (name, v) = scalar(cfg, opts)?;
            let mut t = table(cfg.task, &[name]);
            if cfg.task == Task::Bandwidth {
                t.meta.insert("mass".into(), cfg.mass);
            }
            t.rows.push(vec![v]);
            Ok(t)
        }
    }
}

fn emission_rate(st: &Stationary, lowering: &crate::Operator) -> f64 {
    let n = lowering.adjoint().matmul(lowering).expect("same layout");
    st.state().expect(&n).map(|z| z.re).unwrap_or(f64::NAN)
}

/// Scalar result of a sweepable task: column name and value.
fn scalar(cfg: &RunConfig, opts: RunOptions) -> Result<(&'static str, f64), RunError> {
    match cfg.task {
        Task::Steady => {
            let sc = cfg.scenario()?;
            let st = Stationary::new(&sc.model)?;
            Ok(("emission_rate", emission_rate(&st, &sc.lowering)))
        }
        Task::DetectorG2 => Ok(("g2_0", detector_value(cfg, opts)?)),
        Task::Bandwidth => {
            let sc = cfg.scenario()?;
            let st = Stationary::new(&sc.model)?;
            let omegas = omega_grid(cfg, &cfg.omega_grid, true);
            let s = emission_spectrum_with(&st, &sc.lowering, &omegas)?;
            Ok(("bandwidth", spectrum_bandwidth(&s, cfg.mass)?))
        }
        Task::Spectrum | Task::G2 => unreachable!("non-scalar tasks are rejected at resolution"),
    }
}

fn detector_value(cfg: &RunConfig, opts: RunOptions) -> Result<f64, RunError> {
    let d = cfg.detector.expect("validated: detector-g2 has a detector").params();
    let build = |n_max: usize| {
        let mut dd = d;
        dd.n_max = n_max;
        cfg.model.scenario(Some(&dd)).map(|s| s.model)
    };
    if !opts.strict {
        let sc = cfg.scenario()?;
        return Ok(detector_g2_zero(&sc.model, sc.detector_slot.expect("detector attached"))?);
    }
    let g2 = detector_g2_zero_converged(build, d.n_max, CUTOFF_TOLERANCE)?;
    if matches!(cfg.detector.unwrap().coupling, crate::config::Coupling::Passive) {
        let mut half = d;
        half.g *= 0.5;
        let sc = cfg.model.scenario(Some(&half))?;
        let g2_half = detector_g2_zero(&sc.model, sc.detector_slot.expect("detector attached"))?;
        let rel = (g2_half - g2).abs() / g2.abs().max(f64::MIN_POSITIVE);
        if rel > COUPLING_TOLERANCE {
            return Err(RunError::Convergence(format!(
                "g2(0) changes by {:.3}% when the detector coupling is halved",
                100.0 * rel
            )));
        }
    }
    Ok(g2)
}

fn run_sweep(cfg: &RunConfig, opts: RunOptions) -> Result<Table, RunError> {
    let mut points: Vec<Vec<(usize, f64)>> = vec![vec![]];
    for (a, axis) in cfg.sweeps.iter().enumerate() {
        points = points
            .into_iter()
            .flat_map(|p| axis.values.iter().map(move |v| [p.clone(), vec![(a, *v)]].concat()))
            .collect();
    }
    points.sort_by(|a, b| {
        let key = |p: &Vec<(usize, f64)>| p.iter().map(|&(_, v)| v).collect::<Vec<f64>>();
        key(a).partial_cmp(&key(b)).expect("finite sweep values")
    });
    let eval = |p: &Vec<(usize, f64)>| -> Result<(&'static str, f64), RunError> {
        let assignments: Vec<(&str, f64)> =
            p.iter().flat_map(|&(a, v)| cfg.sweeps[a].keys.iter().map(move |k| (k.as_str(), v))).collect();
        scalar(&cfg.at_point(&assignments)?, opts)
    };
    let results: Vec<Result<(&'static str, f64), RunError>> = with_pool(|| points.par_iter().map(eval).collect())?;
    let mut t = table(cfg.task, &[]);
    t.columns = cfg.sweeps.iter().map(|a| a.label.clone()).collect();
    let mut name = "";
    for (p, r) in points.iter().zip(results) {
        let (n, v) = r?;
        name = n;
        let mut row: Vec<f64> = p.iter().map(|&(_, x)| x).collect();
        row.push(v);
        t.rows.push(row);
    }
    t.columns.push(name.to_string());
    Ok(t)
}

/// Runs `f` on a pool sized by `SPS_THREADS` when set.
fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T, RunError> {
    match std::env::var("SPS_THREADS").ok().map(|s| s.parse::<usize>()) {
        None => Ok(f()),
        Some(Ok(n)) if n > 0 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| RunError::Convergence(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        Some(_) => {
            Err(ConfigError::BadValue { key: "SPS_THREADS".into(), reason: "must be a positive integer".into() }.into())
        }
    }
}

/// Frequency grid. `Auto` covers the narrow window, or a window wide enough
/// for the broad component when `wide` is set.
pub fn omega_grid(cfg: &RunConfig, spec: &GridSpec, wide: bool) -> Vec<f64> {
    let lw = cfg.model.linewidth();
    let peaks = cfg.model.peak_offsets();
    let outer = peaks.last().copied().unwrap_or(0.0);
    let mut centers = vec![0.0];
    centers.extend(&peaks);
    match spec {
        GridSpec::Auto if wide => log_dense_grid(&centers, lw / 1e3, 1e3 * broad_scale(&cfg.model), 40),
        GridSpec::Auto => log_dense_grid(&centers, lw / 1e3, 10.0 * lw + 3.0 * outer, 60),
        GridSpec::LogDense { span, min_offset, per_decade } => {
            log_dense_grid(&centers, *min_offset, *span, *per_decade)
        }
        explicit => explicit.explicit_points().expect("explicit grid"),
    }
}

fn broad_scale(m: &ModelSetting) -> f64 {
    match m {
        ModelSetting::Lambda(p) => p.gamma1.max(p.gamma2),
        ModelSetting::Hyperfine { spec, .. } => spec.gamma,
    }
}

/// Delay grid; `Auto` spans twenty narrow-feature lifetimes.
pub fn tau_grid(cfg: &RunConfig) -> Vec<f64> {
    match &cfg.tau_grid {
        GridSpec::Auto => crate::correl::linear_grid(0.0, 20.0 / cfg.model.linewidth(), 2001),
        spec => spec.explicit_points().unwrap_or_else(|| omega_grid(cfg, spec, false)),
    }
}

/// Human-readable summary of the resolved run: parameters, dimensions and a
/// rough operation count.
pub fn validate_report(cfg: &RunConfig) -> String {
    let d = cfg.hilbert_dim();
    let n = (d * d) as f64;
    let lu = n.powi(3) / 3.0;
    let per_run = match cfg.task {
        Task::Steady => lu,
        Task::Spectrum => lu + 2.0 * lu * omega_grid(cfg, &cfg.omega_grid, false).len() as f64,
        Task::Bandwidth => lu + 2.0 * lu * omega_grid(cfg, &cfg.omega_grid, true).len() as f64,
        Task::G2 => lu + 10.0 * n.powi(3) + 2.0 * n * n * tau_grid(cfg).len() as f64,
        Task::DetectorG2 => lu,
    };
    let runs: usize = cfg.sweeps.iter().map(|a| a.values.len()).product();
    let mut out = String::new();
    for line in cfg.to_text().lines() {
        out += &format!("{EMBEDDED_PREFIX}{line}\n");
    }
    out += &format!("hilbert_dim = {d}\n");
    out += &format!("liouvillian_dim = {}x{}\n", d * d, d * d);
    out += &format!("runs = {runs}\n");
    out += &format!("estimated_flops = {:.2e}\n", per_run * runs as f64);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{preset, RunConfig};

    fn cfg(name: &str, extra: &[(&str, &str)]) -> RunConfig {
        let mut m = preset(name).unwrap();
        for (k, v) in extra {
            m.insert(k.to_string(), v.to_string());
        }
        RunConfig::resolve(&m).unwrap()
    }

    #[test]
    fn spectrum_table_has_header_and_rows() {
        let c = cfg("fig2b", &[("grid.omega", "linear(-5e-3,5e-3,41)")]);
        let t = run(&c, RunOptions { strict: true }).unwrap();
        assert_eq!(t.rows.len(), 41);
        let csv = t.to_csv(None);
        assert!(csv.contains("# coherent_weight="));
        assert!(csv.contains("# cfg model.omega_r = 1e-3"));
        assert!(csv.lines().any(|l| l == "omega,S_incoherent"));
        assert_eq!(csv, run(&c, RunOptions::default()).unwrap().to_csv(None));
    }

    #[test]
    fn steady_rows_cover_density_matrix() {
        let t = run(&cfg("fig2a", &[("task", "steady")]), RunOptions::default()).unwrap();
        assert_eq!(t.rows.len(), 9);
        let tr: f64 = t.rows.iter().filter(|r| r[0] == r[1]).map(|r| r[2]).sum();
        assert!((tr - 1.0).abs() < 1e-12);
        assert!(t.meta["emission_rate"] > 0.0);
    }

    #[test]
    fn detector_sweep_and_strict_checks() {
        let c = cfg("fig3", &[("sweep.param", "kappa"), ("sweep.values", "0.1,1")]);
        let t = run(&c, RunOptions { strict: true }).unwrap();
        assert_eq!(t.columns, vec!["kappa", "g2_0"]);
        assert_eq!(t.rows.len(), 2);
        assert!(t.rows[1][1] < t.rows[0][1]);
        assert_eq!(RunError::from(Error::NotConverged("x".into())).exit_code(), 3);
        assert_eq!(RunError::from(Error::param("g", "negative")).exit_code(), 2);
    }

    #[test]
    fn fixed_width_values() {
        assert_eq!(fmt_value(0.5), "5.00000000000e-1");
        assert_eq!(fmt_value(-1234.5), "-1.23450000000e3");
    }

    #[test]
    fn report_lists_dimensions() {
        let r = validate_report(&cfg("fig3", &[]));
        assert!(r.contains("hilbert_dim = 12"));
        assert!(r.contains("liouvillian_dim = 144x144"));
    }
}
