use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ddadapt_core::grid::Subset;
use ddadapt_core::harness::{Experiment, MonteCarloResult, Pipeline, RocRow};
use ddadapt_core::scene::SceneTruth;
use ddadapt_core::{generate_ofdm_reference, synthesize_capture, DDSurface};
use num_complex::Complex64;
use serde::Serialize;

use crate::config::RunConfigFile;
use crate::error::{CliError, CliResult};
use crate::{Overrides, SurfaceMode};

const EFFECTIVE_CONFIG: &str = "effective_config.toml";

/// Load the config file (or defaults) and apply command-line overrides.
pub fn resolve(o: &Overrides) -> CliResult<RunConfigFile> {
    let mut cfg = match &o.config {
        Some(path) => RunConfigFile::load(path)?,
        None => RunConfigFile::default(),
    };
    if let Some(seed) = o.seed {
        cfg.run.base_seed = seed;
    }
    if !o.gamma.is_empty() {
        cfg.run.gamma_list = o.gamma.clone();
    }
    if !o.pfa.is_empty() {
        cfg.run.pfa_list = o.pfa.clone();
    }
    if let Some(n) = o.trials {
        cfg.run.n_trials = n;
    }
    if let Some(dir) = &o.out {
        cfg.output.dir = dir.clone();
    }
    cfg.experiment().validate()?;
    Ok(cfg)
}

/// Files are collected in memory and written only once all computation has
/// succeeded.
#[derive(Default)]
struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    fn add(&mut self, path: PathBuf, bytes: impl Into<Vec<u8>>) {
        self.files.push((path, bytes.into()));
    }

    fn commit(self) -> CliResult<Vec<PathBuf>> {
        let mut written = Vec::with_capacity(self.files.len());
        for (path, bytes) in self.files {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
            }
            std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
            written.push(path);
        }
        Ok(written)
    }
}

fn report_written(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

pub fn waveform(o: &Overrides) -> CliResult<()> {
    let cfg = resolve(o)?;
    let fs = cfg.run.sample_rate_hz;
    let x = generate_ofdm_reference(&cfg.waveform, fs)?;
    let mut csv = String::from("n,re,im\n");
    for (n, v) in x.samples().iter().enumerate() {
        writeln!(csv, "{n},{},{}", v.re, v.im).expect("writing to a String");
    }
    let mut out = Outputs::default();
    out.add(cfg.output.dir.join("waveform.csv"), csv);
    out.add(cfg.output.dir.join(EFFECTIVE_CONFIG), cfg.to_toml());
    let written = out.commit()?;
    println!(
        "{} samples ({:.3} ms at {} Hz), mean power {:.6}",
        x.len(),
        x.len() as f64 / fs * 1e3,
        fs,
        x.mean_power()
    );
    report_written(&written);
    Ok(())
}

#[derive(Serialize)]
struct PeakReport {
    row: usize,
    col: usize,
    doppler_hz: f64,
    delay_samples: usize,
    in_clutter_row: bool,
}

#[derive(Serialize)]
struct SurfaceReport {
    mode: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    trial: u64,
    seed: u64,
    peak: PeakReport,
    /// Strongest clutter-row cell relative to the surface peak.
    clutter_row_residual_db: f64,
    /// Strongest surveillance response to the clutter-only part of the
    /// capture, relative to the surface peak.
    clutter_leak_db: f64,
    truth: SceneTruth,
}

/// Lowest level reported, well below double-precision round-off.
const DB_FLOOR: f64 = -400.0;

fn power_db(p: f64, reference: f64) -> f64 {
    (10.0 * (p / reference).log10()).max(DB_FLOOR)
}

pub fn surface(o: &Overrides, mode: SurfaceMode, trial: u64) -> CliResult<()> {
    let mut cfg = resolve(o)?;
    let gamma = match mode {
        SurfaceMode::Adapted => {
            let g = cfg
                .run
                .gamma_list
                .first()
                .copied()
                .ok_or_else(|| CliError::Config("no gamma given".into()))?;
            cfg.run.gamma_list = vec![g];
            cfg.run.pipeline = Pipeline::Adapted;
            Some(g)
        }
        SurfaceMode::Unadapted => {
            cfg.run.pipeline = Pipeline::Unadapted;
            None
        }
    };
    let exp_cfg = cfg.experiment();
    let exp = Experiment::prepare(&exp_cfg)?;
    let grid = exp.grid();
    let truth = exp.scene(trial)?;

    // Responses over every grid cell in canonical order.
    let respond = |truth: &SceneTruth| -> CliResult<Vec<Complex64>> {
        let y = synthesize_capture(exp.reference(), truth)?;
        let (r_s, r_c) = exp.engine().cross_correlations(&y)?;
        Ok(match exp.filters().first() {
            Some(f) => {
                let mut all = f.apply(&r_s, &r_c)?;
                all.resize(grid.n_cells(), Complex64::new(0.0, 0.0));
                all
            }
            None => r_s.into_iter().chain(r_c).collect(),
        })
    };
    let full = DDSurface::full_grid(grid, &respond(&truth)?)?;
    let clutter_only = SceneTruth {
        targets: Vec::new(),
        noise_seed: None,
        ..truth.clone()
    };
    let leak = respond(&clutter_only)?;

    let (row, col, peak_mag) = full.peak();
    if !(peak_mag > 0.0) {
        return Err(CliError::Numeric("surface is identically zero".into()));
    }
    let peak_power = peak_mag * peak_mag;
    let cols = full.cols();
    let clutter_max = grid
        .clutter_cells()
        .iter()
        .map(|c| full.get(c.doppler, c.delay).norm_sqr())
        .fold(0.0, f64::max);
    let leak_max = leak[..grid.n_surveillance()]
        .iter()
        .map(|v| v.norm_sqr())
        .fold(0.0, f64::max);
    let peak_cell = grid
        .cells(Subset::All)
        .into_iter()
        .find(|c| c.doppler == row && c.delay == col);

    let report = SurfaceReport {
        mode: if gamma.is_some() {
            "adapted"
        } else {
            "unadapted"
        },
        gamma,
        trial,
        seed: exp_cfg.trial_seed(trial),
        peak: PeakReport {
            row,
            col,
            doppler_hz: grid.doppler_bins_hz()[row],
            delay_samples: grid.delay_bins()[col],
            in_clutter_row: peak_cell.is_some_and(|c| grid.is_clutter(c)),
        },
        clutter_row_residual_db: power_db(clutter_max, peak_power),
        clutter_leak_db: power_db(leak_max, peak_power),
        truth,
    };

    let mut csv = String::from("doppler_hz,delay_samples,magnitude_db\n");
    let db = full.normalized().magnitude_db();
    for (i, v) in db.iter().enumerate() {
        let (r, c) = (i / cols, i % cols);
        writeln!(
            csv,
            "{},{},{}",
            grid.doppler_bins_hz()[r],
            grid.delay_bins()[c],
            v
        )
        .expect("writing to a String");
    }
    let mut dds = Vec::new();
    full.write_dds1(&mut dds)?;

    let stem = format!("surface_{}", report.mode);
    let dir = &cfg.output.dir;
    let mut out = Outputs::default();
    out.add(dir.join(format!("{stem}.csv")), csv);
    out.add(dir.join(format!("{stem}.dds1")), dds);
    let json =
        serde_json::to_string_pretty(&report).map_err(|e| CliError::Numeric(e.to_string()))?;
    out.add(dir.join(format!("{stem}.json")), json);
    out.add(dir.join(EFFECTIVE_CONFIG), cfg.to_toml());
    let written = out.commit()?;

    println!(
        "{} surface, trial {trial}: peak at {:+} Hz / delay {} ({})",
        report.mode,
        report.peak.doppler_hz,
        report.peak.delay_samples,
        if report.peak.in_clutter_row {
            "clutter row"
        } else {
            "surveillance"
        }
    );
    println!(
        "clutter-row residual {:.1} dB, clutter leak {:.1} dB",
        report.clutter_row_residual_db, report.clutter_leak_db
    );
    report_written(&written);
    Ok(())
}

fn summary(rows: &[&RocRow]) -> String {
    let mut s = format!(
        "{:<10} {:>6} {:>10} {:>7} {:>12} {:>7}\n",
        "pipeline", "gamma", "pfa_tuned", "pd", "pfa_obs", "trials"
    );
    for r in rows {
        let pipeline = match r.pipeline {
            Pipeline::Unadapted => "unadapted",
            _ => "adapted",
        };
        let gamma = r.gamma.map(|g| g.to_string()).unwrap_or_else(|| "-".into());
        writeln!(
            s,
            "{pipeline:<10} {gamma:>6} {:>10.1e} {:>7.4} {:>12.3e} {:>7}",
            r.pfa_tuned, r.pd, r.pfa_observed, r.n_trials
        )
        .expect("writing to a String");
    }
    s
}

fn csv_for(result: &MonteCarloResult, pipeline: Pipeline) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    result.table.write_csv(pipeline, &mut buf)?;
    Ok(buf)
}

fn jsonl(result: &MonteCarloResult) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    result.write_jsonl(&mut buf)?;
    Ok(buf)
}

/// Fail only when no trial produced a score.
fn check_failures(result: &MonteCarloResult) -> CliResult<()> {
    let failed = result.n_failed();
    if failed == 0 {
        return Ok(());
    }
    let first = result
        .records
        .iter()
        .find_map(|r| r.error.as_deref())
        .unwrap_or_default();
    eprintln!(
        "warning: {failed} of {} trials failed; first error: {first}",
        result.records.len()
    );
    if failed == result.records.len() {
        return Err(CliError::Numeric(format!(
            "every trial failed; first error: {first}"
        )));
    }
    Ok(())
}

fn dump_surfaces(exp: &Experiment, dir: &Path, out: &mut Outputs) -> CliResult<()> {
    let gammas = &exp.config().gamma_list;
    for trial in 0..exp.config().n_trials as u64 {
        let s = exp.surfaces(trial)?;
        if exp.config().pipeline.runs_unadapted() {
            let mut buf = Vec::new();
            s.unadapted.write_dds1(&mut buf)?;
            out.add(dir.join(format!("trial{trial:05}_unadapted.dds1")), buf);
        }
        for (g, surf) in gammas.iter().zip(&s.adapted) {
            let mut buf = Vec::new();
            surf.write_dds1(&mut buf)?;
            let name = if gammas.len() == 1 {
                format!("trial{trial:05}_adapted.dds1")
            } else {
                format!("trial{trial:05}_adapted_g{g}.dds1")
            };
            out.add(dir.join(name), buf);
        }
    }
    Ok(())
}

pub fn simulate(o: &Overrides, dump: Option<&Path>) -> CliResult<()> {
    let cfg = resolve(o)?;
    let exp = Experiment::prepare(&cfg.experiment())?;
    let result = exp.run();

    let dir = &cfg.output.dir;
    let mut out = Outputs::default();
    for (pipeline, name) in [
        (Pipeline::Unadapted, "roc_unadapted.csv"),
        (Pipeline::Adapted, "roc_adapted.csv"),
    ] {
        if result.table.rows_for(pipeline).next().is_some() {
            out.add(dir.join(name), csv_for(&result, pipeline)?);
        }
    }
    out.add(dir.join("trials.jsonl"), jsonl(&result)?);
    out.add(dir.join(EFFECTIVE_CONFIG), cfg.to_toml());
    if let Some(d) = dump {
        dump_surfaces(&exp, d, &mut out)?;
    }
    let written = out.commit()?;

    print!("{}", summary(&result.table.rows.iter().collect::<Vec<_>>()));
    report_written(&written);
    check_failures(&result)
}

pub fn sweep(o: &Overrides) -> CliResult<()> {
    let mut cfg = resolve(o)?;
    cfg.run.pipeline = Pipeline::Both;
    let exp = Experiment::prepare(&cfg.experiment())?;
    let result = exp.run();

    let mut csv = csv_for(&result, Pipeline::Unadapted)?;
    let adapted = csv_for(&result, Pipeline::Adapted)?;
    // Append the adapted rows under the single header.
    let body = adapted
        .iter()
        .position(|&b| b == b'\n')
        .map_or(&adapted[..0], |i| &adapted[i + 1..]);
    csv.extend_from_slice(body);

    let dir = &cfg.output.dir;
    let mut out = Outputs::default();
    out.add(dir.join("sweep.csv"), csv);
    out.add(dir.join("trials.jsonl"), jsonl(&result)?);
    out.add(dir.join(EFFECTIVE_CONFIG), cfg.to_toml());
    let written = out.commit()?;

    let mut pivot = format!("{:>10}", "Pd");
    for p in &cfg.run.pfa_list {
        write!(pivot, " {:>9}", format!("{p:.0e}")).expect("writing to a String");
    }
    pivot.push('\n');
    let mut line = |label: String, pipeline: Pipeline, gamma: Option<f64>| {
        write!(pivot, "{label:>10}").expect("writing to a String");
        for &p in &cfg.run.pfa_list {
            let pd = result
                .table
                .find(pipeline, gamma, p)
                .map_or(f64::NAN, |r| r.pd);
            write!(pivot, " {pd:>9.4}").expect("writing to a String");
        }
        pivot.push('\n');
    };
    line("unadapted".into(), Pipeline::Unadapted, None);
    for &g in &cfg.run.gamma_list {
        line(format!("γ={g}"), Pipeline::Adapted, Some(g));
    }
    print!("{pivot}");
    report_written(&written);
    check_failures(&result)
}
