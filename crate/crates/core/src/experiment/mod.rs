//! Experiment driver: resolves a [`RunConfig`], evaluates the requested
//! experiment and writes CSV files, optional SVG figures and a manifest.
//!
//! Output files:
//!
//! * `otoc.csv`: `t_us`, then `re_F_<protocol>`, `im_F_<protocol>` per selected protocol.
//! * `qpd.csv`: `t_us`, then `re_p_<abcd>`, `im_p_<abcd>` for abcd = 0000 ... 1111.
//! * `nonclassicality.csv`: `t_us`, `n_tilde`.
//! * `timescales.csv`: `h_over_j`, `t_star_us`, `t_m_us`, `t_z_us`, `ratio`,
//!   `censored_star`, `censored_m`, `censored_z` (censored cells are empty).
//! * `cumulative.csv` (sweeps): `h_over_j`, `cumulative_n_tilde` over [0, 60] us.
//! * `manifest.json`: the resolved configuration and library version.

pub mod config;
pub mod csv;
pub mod plot;

use std::path::{Path, PathBuf};

use serde_json::{json, Value};

pub use config::{ConfigBuilder, Experiment, RunConfig, OUTPUT_DIR_ENV};
pub use csv::{format_f64, Table};
pub use plot::{emit_plot, render_svg, PlotKind};

use crate::operator::hermitian_eigendecompose;
use crate::parallel::try_map_indexed;
use crate::protocols::protocol_otoc;
use crate::qpd::{
    extract_timescales_with_threshold, linspace, qpd_series, sweep_h_over_j, NonclassicalitySeries, QpdKey,
    SeriesOptions, StopRule, SweepCell, SweepConfig, TimescaleReport,
};
use crate::spin_chain::{build_hamiltonian, butterfly_operators};
use crate::{Result, VERSION};

/// Files written by one run.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub manifest: PathBuf,
}

/// `t_us` plus real and imaginary OTOC columns for every selected protocol.
pub fn otoc_table(cfg: &RunConfig) -> Result<Table> {
    let params = cfg.chain(cfg.h_over_j);
    let eig = hermitian_eigendecompose(&build_hamiltonian(&params)?)?;
    let (w, v) = butterfly_operators(&params)?;
    let rho = cfg.initial_state().build(&params, &eig)?;
    let noise = cfg.decoherence();
    let grid = cfg.grid()?;
    let mut header = vec!["t_us".to_string()];
    for p in &cfg.protocols {
        header.push(format!("re_F_{}", p.name()));
        header.push(format!("im_F_{}", p.name()));
    }
    let rows = try_map_indexed(cfg.worker_count, grid.len(), |k| {
        let t = grid.time(k);
        let mut row = vec![t];
        for &p in &cfg.protocols {
            let point = protocol_otoc(p, &w, &v, &rho, &eig, t, noise.as_ref())?;
            row.push(point.value.re);
            row.push(point.value.im);
        }
        Ok(row)
    })?;
    let mut table = Table::new(header);
    for row in rows {
        table.push_values(&row);
    }
    Ok(table)
}

fn qpds(cfg: &RunConfig) -> Result<Vec<crate::qpd::Qpd>> {
    let params = cfg.chain(cfg.h_over_j);
    let eig = hermitian_eigendecompose(&build_hamiltonian(&params)?)?;
    let (w, v) = butterfly_operators(&params)?;
    let rho = cfg.initial_state().build(&params, &eig)?;
    let opts = SeriesOptions { workers: cfg.worker_count, stop: StopRule::Horizon };
    qpd_series(&rho, &w, &v, &eig, &cfg.grid()?, cfg.decoherence().as_ref(), &opts)
}

/// `t_us` plus real and imaginary parts of the 16 quasiprobabilities.
pub fn qpd_table(cfg: &RunConfig) -> Result<Table> {
    let mut header = vec!["t_us".to_string()];
    for key in QpdKey::all() {
        header.push(format!("re_p_{}", key.label()));
        header.push(format!("im_p_{}", key.label()));
    }
    let mut table = Table::new(header);
    for q in qpds(cfg)? {
        let mut row = vec![q.t];
        for z in q.values {
            row.push(z.re);
            row.push(z.im);
        }
        table.push_values(&row);
    }
    Ok(table)
}

/// The nonclassicality series and its timescales.
pub fn nonclassicality(cfg: &RunConfig) -> Result<(NonclassicalitySeries, TimescaleReport)> {
    let series = NonclassicalitySeries::from_qpds(&qpds(cfg)?)?;
    let mut report = extract_timescales_with_threshold(&series, cfg.threshold)?;
    report.h_over_j = Some(cfg.h_over_j);
    Ok((series, report))
}

pub fn nonclassicality_table(series: &NonclassicalitySeries) -> Table {
    let mut table = Table::new(vec!["t_us".into(), "n_tilde".into()]);
    for (t, n) in series.times().iter().zip(series.values()) {
        table.push_values(&[*t, *n]);
    }
    table
}

/// One sweep cell per h/J over [0, 0.5] with the configured noise and initial state.
pub fn sweep(cfg: &RunConfig) -> Result<Vec<SweepCell>> {
    let sc = SweepConfig {
        base: cfg.chain(0.0),
        h_values: linspace(0.0, config::SWEEP_H_MAX, cfg.sweep_points),
        decoherence: vec![cfg.decoherence()],
        initial_states: vec![cfg.initial_state()],
        grid: cfg.grid()?,
        threshold: cfg.threshold,
        cumulative_window: config::CUMULATIVE_WINDOW_US,
        early_stop: true,
        workers: cfg.worker_count,
    };
    sweep_h_over_j(&sc)
}

fn flag(b: bool) -> Option<f64> {
    Some(if b { 1.0 } else { 0.0 })
}

pub fn timescales_table(reports: &[TimescaleReport]) -> Table {
    let header = ["h_over_j", "t_star_us", "t_m_us", "t_z_us", "ratio", "censored_star", "censored_m", "censored_z"];
    let mut table = Table::new(header.iter().map(|s| s.to_string()).collect());
    for r in reports {
        table.push(vec![
            r.h_over_j,
            r.t_star,
            r.t_m,
            r.t_z,
            r.ratio,
            flag(r.censored_star()),
            flag(r.censored_m()),
            flag(r.censored_z()),
        ]);
    }
    table
}

pub fn cumulative_table(cells: &[SweepCell]) -> Table {
    let mut table = Table::new(vec!["h_over_j".into(), "cumulative_n_tilde".into()]);
    for c in cells {
        table.push_values(&[c.h_over_j, c.cumulative]);
    }
    table
}

fn report_json(r: &TimescaleReport) -> Value {
    json!({
        "h_over_j": r.h_over_j,
        "t_star_us": r.t_star,
        "t_m_us": r.t_m,
        "t_z_us": r.t_z,
        "ratio": r.ratio,
        "threshold": r.threshold,
    })
}

/// Manifest content: every resolved setting plus derived quantities. Contains no
/// timestamps so identical configurations give identical manifests.
pub fn manifest(cfg: &RunConfig, outputs: &[PathBuf], extra: Value) -> Value {
    let names: Vec<String> =
        outputs.iter().map(|p| p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()).collect();
    let protocols: Vec<Value> = cfg
        .protocols
        .iter()
        .map(|p| json!({ "name": p.name(), "lab_time_factor": p.lab_time_factor(), "ancillas": p.n_ancilla() }))
        .collect();
    json!({
        "library": "otoc-core",
        "version": VERSION,
        "experiment": cfg.experiment.name(),
        "config": {
            "experiment": cfg.experiment.name(),
            "n_qubits": cfg.n_qubits,
            "h_over_j": cfg.h_over_j,
            "g_over_j": cfg.g_over_j,
            "j_coupling_rad_per_us": cfg.j_coupling,
            "t2_star_us": cfg.t2_star_us.map_or(json!("none"), |t| json!(t)),
            "gamma_per_us": cfg.t2_star_us.map_or(0.0, |t| 1.0 / (2.0 * t)),
            "temperature_over_j": cfg.temperature_over_j.map_or(json!("infinite"), |t| json!(t)),
            "initial_state": cfg.initial_state().label(),
            "t_max_us": cfg.t_max_us,
            "dt_grid_us": cfg.dt_grid_us,
            "dt_integration_us": cfg.dt_integration_us,
            "threshold": cfg.threshold,
            "protocols": protocols,
            "sweep_points": cfg.sweep_points,
            "sweep_h_over_j_range": [0.0, config::SWEEP_H_MAX],
            "cumulative_window_us": config::CUMULATIVE_WINDOW_US,
            "output_dir": cfg.output_dir.display().to_string(),
            "worker_count": cfg.worker_count,
            "plot": cfg.plot,
            "w_operator": "sigma_z on site 1",
            "v_operator": format!("sigma_z on site {}", cfg.n_qubits),
        },
        "outputs": names,
        "results": extra,
    })
}

fn write_table(
    dir: &Path,
    name: &str,
    table: &Table,
    kind: Option<PlotKind>,
    plot: bool,
    files: &mut Vec<PathBuf>,
) -> Result<()> {
    let path = dir.join(name);
    table.write(&path)?;
    files.push(path.clone());
    if let (true, Some(kind)) = (plot, kind) {
        let svg = render_svg(table, kind, &path.display().to_string())?;
        let svg_path = path.with_extension("svg");
        std::fs::write(&svg_path, svg)?;
        files.push(svg_path);
    }
    Ok(())
}

/// Runs the configured experiment and writes its files into `cfg.output_dir`.
pub fn run_experiment(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    // Compute everything before touching the filesystem.
    let (tables, extra): (Vec<(&str, Table, Option<PlotKind>)>, Value) = match cfg.experiment {
        Experiment::Otoc => (vec![("otoc.csv", otoc_table(cfg)?, Some(PlotKind::Otoc))], Value::Null),
        Experiment::Qpd => (vec![("qpd.csv", qpd_table(cfg)?, Some(PlotKind::Qpd))], Value::Null),
        Experiment::Nonclassicality => {
            let (series, report) = nonclassicality(cfg)?;
            (
                vec![("nonclassicality.csv", nonclassicality_table(&series), Some(PlotKind::Nonclassicality))],
                json!({ "timescales": report_json(&report) }),
            )
        }
        Experiment::Sweep => {
            let cells = sweep(cfg)?;
            let reports: Vec<TimescaleReport> = cells.iter().map(|c| c.report).collect();
            let horizons: Vec<f64> = cells.iter().map(|c| *c.series.times().last().unwrap_or(&0.0)).collect();
            (
                vec![
                    ("timescales.csv", timescales_table(&reports), Some(PlotKind::Ratio)),
                    ("cumulative.csv", cumulative_table(&cells), None),
                ],
                json!({ "evaluated_horizon_us": horizons }),
            )
        }
    };
    std::fs::create_dir_all(&cfg.output_dir)?;
    let mut files = Vec::new();
    for (name, table, kind) in &tables {
        write_table(&cfg.output_dir, name, table, *kind, cfg.plot, &mut files)?;
    }
    let manifest_path = cfg.output_dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest(cfg, &files, extra)).map_err(std::io::Error::other)?;
    std::fs::write(&manifest_path, text + "\n")?;
    Ok(RunOutcome { files, manifest: manifest_path })
}
