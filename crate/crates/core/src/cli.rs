//! Commands behind the `hybridstab` binary: check, simulate, sweep and kron.
//! Each writes to caller-supplied sinks and returns the process exit code.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::buslib::BusId;
use crate::case::{Analysis, Case, CaseFile, DisturbanceEntry};
use crate::closedloop::{assemble, freq_response, simulate, steady_state, SimulationResult};
use crate::error::{Error, Result};
use crate::network::{build_laplacians, kron_reduce, LaplacianSet, NetworkCase};
use crate::stability::{certify_with, coherency_quantities, condition23_margin, FrequencyGrid, StabilityReport, Verdict};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const EXIT_PASS: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_FAIL: i32 = 2;
pub const EXIT_MARGINAL: i32 = 3;
pub const EXIT_DIVERGED: i32 = 4;

pub fn verdict_exit_code(v: Verdict) -> i32 {
    match v {
        Verdict::Pass => EXIT_PASS,
        Verdict::Fail => EXIT_FAIL,
        Verdict::Marginal => EXIT_MARGINAL,
    }
}

pub fn error_exit_code(e: &Error) -> i32 {
    match e {
        Error::SimulationDiverged { .. } => EXIT_DIVERGED,
        _ => EXIT_INPUT,
    }
}

/// Command-line overrides of the case's `analysis` section.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub delta: Option<f64>,
    pub grid_min: Option<f64>,
    pub grid_max: Option<f64>,
    pub points: Option<usize>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, a: Analysis) -> Analysis {
        Analysis {
            delta: self.delta.unwrap_or(a.delta),
            grid_min: self.grid_min.unwrap_or(a.grid_min),
            grid_max: self.grid_max.unwrap_or(a.grid_max),
            points: self.points.unwrap_or(a.points),
            dt: self.dt.unwrap_or(a.dt),
            t_end: self.t_end.unwrap_or(a.t_end),
        }
    }
}

/// Format used for every CSV number: 17 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn header(w: &mut dyn Write, case: &Case, a: &Analysis, time_series: bool) -> io::Result<()> {
    writeln!(w, "# hybridstab {VERSION}")?;
    writeln!(w, "# case {} sha256 {}", case.file.meta.name, case.sha256)?;
    if time_series {
        writeln!(w, "# dt {} t_end {}", a.dt, a.t_end)?;
    } else {
        writeln!(
            w,
            "# grid omega_min {} omega_max {} points {} delta {}",
            a.grid_min, a.grid_max, a.points, a.delta
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// check

#[derive(Serialize)]
struct JsonReport<'a> {
    tool: &'static str,
    version: &'static str,
    case_sha256: &'a str,
    #[serde(flatten)]
    report: &'a StabilityReport,
}

pub fn report_json(case: &Case, report: &StabilityReport) -> Result<String> {
    serde_json::to_string_pretty(&JsonReport {
        tool: "hybridstab",
        version: VERSION,
        case_sha256: &case.sha256,
        report,
    })
    .map_err(|e| Error::InvalidArgument(e.to_string()))
}

pub fn check_case(case: &Case, ov: &Overrides) -> Result<StabilityReport> {
    let grid = ov.apply(case.file.analysis).grid()?;
    certify_with(&case.network, &grid)
}

pub fn cmd_check(path: &Path, ov: &Overrides, json: bool, out: &mut dyn Write) -> Result<i32> {
    let case = Case::load(path)?;
    let report = check_case(&case, ov)?;
    if json {
        writeln!(out, "{}", report_json(&case, &report)?)?;
    } else {
        writeln!(out, "{report}")?;
    }
    Ok(verdict_exit_code(report.verdict))
}

// ---------------------------------------------------------------------------
// sweep

/// One row of the frequency sweep. Coherency columns are NaN for cases
/// without a DC subnetwork.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub omega: f64,
    pub sigma_max_h: f64,
    pub sigma_max_kinv_h: f64,
    pub herm_min_hinv: f64,
    pub xi_min: f64,
    pub xi_avg: f64,
    pub re_kbar_min: f64,
    pub delta: f64,
    pub c23_margin: f64,
}

pub const SWEEP_COLUMNS: [&str; 9] = [
    "omega_rad_s",
    "sigma_max_h",
    "sigma_max_kinv_h",
    "herm_min_hinv",
    "xi_min",
    "xi_avg",
    "re_kbar_min",
    "delta",
    "c23_margin",
];

pub fn sweep(case: &NetworkCase, lap: &LaplacianSet, grid: &FrequencyGrid) -> Result<Vec<SweepRow>> {
    let points = freq_response(case, lap, &grid.omega_points)?;
    let buses = case.models();
    let has_dc = !lap.subnetworks.is_empty();
    points
        .par_iter()
        .map(|p| {
            let s = Complex64::new(0.0, p.omega);
            let c = coherency_quantities(&buses, &lap.subnetworks, s)?;
            let mut xi_sum = 0.0;
            for b in &buses {
                xi_sum += b.xi(s)?;
            }
            let re_kbar_min = c.k_bar_inv.iter().map(|k| k.re).fold(f64::INFINITY, f64::min);
            Ok(SweepRow {
                omega: p.omega,
                sigma_max_h: p.sigma_max_h,
                sigma_max_kinv_h: p.sigma_max_kinv_h,
                herm_min_hinv: p.herm_min_hinv,
                xi_min: c.xi_min,
                xi_avg: xi_sum / buses.len() as f64,
                re_kbar_min: if has_dc { re_kbar_min } else { f64::NAN },
                delta: if has_dc { c.delta } else { f64::NAN },
                c23_margin: if has_dc { condition23_margin(&buses, lap, s)? } else { f64::NAN },
            })
        })
        .collect()
}

pub fn write_sweep_csv(w: &mut dyn Write, case: &Case, a: &Analysis, rows: &[SweepRow]) -> Result<()> {
    header(w, case, a, false)?;
    writeln!(w, "{}", SWEEP_COLUMNS.join(","))?;
    for r in rows {
        let vals = [
            r.omega,
            r.sigma_max_h,
            r.sigma_max_kinv_h,
            r.herm_min_hinv,
            r.xi_min,
            r.xi_avg,
            r.re_kbar_min,
            r.delta,
            r.c23_margin,
        ];
        writeln!(w, "{}", vals.map(num).join(","))?;
    }
    Ok(())
}

pub fn cmd_sweep(path: &Path, ov: &Overrides, out_path: Option<&Path>, out: &mut dyn Write) -> Result<i32> {
    let case = Case::load(path)?;
    let a = ov.apply(case.file.analysis);
    let grid = a.grid()?;
    let lap = build_laplacians(&case.network)?;
    let rows = sweep(&case.network, &lap, &grid)?;
    with_output(out_path, out, |w| write_sweep_csv(w, &case, &a, &rows))?;
    Ok(EXIT_PASS)
}

fn with_output(
    path: Option<&Path>,
    stdout: &mut dyn Write,
    f: impl FnOnce(&mut dyn Write) -> Result<()>,
) -> Result<()> {
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            f(&mut w)?;
            w.flush()?;
        }
        None => f(stdout)?,
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// simulate

pub fn write_timeseries_csv(w: &mut dyn Write, case: &Case, a: &Analysis, res: &SimulationResult) -> Result<()> {
    header(w, case, a, true)?;
    let mut cols = vec!["t".to_string()];
    cols.extend(res.bus_ids.iter().map(|id| format!("f_{id}")));
    cols.push("f_bar".into());
    cols.extend(res.bus_ids.iter().map(|id| format!("df_{id}")));
    let conv: Vec<usize> = (0..res.bus_ids.len()).filter(|&i| res.converter[i]).collect();
    cols.extend(conv.iter().map(|&i| format!("v_{}", res.bus_ids[i])));
    writeln!(w, "{}", cols.join(","))?;
    let mut line = Vec::with_capacity(cols.len());
    for k in 0..res.time.len() {
        line.clear();
        line.push(num(res.time[k]));
        line.extend(res.freq.iter().map(|f| num(f[k])));
        line.push(num(res.f_bar[k]));
        line.extend(res.freq.iter().map(|f| num(f[k] - res.f_bar[k])));
        line.extend(conv.iter().map(|&i| num(res.z[i][k])));
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

/// Headline numbers of a simulation, frequencies in Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSummary {
    pub nadir_hz: f64,
    pub nadir_bus: BusId,
    pub nadir_time: f64,
    pub final_f_bar_hz: f64,
    pub max_spread_hz: f64,
    pub max_spread_time: f64,
    /// Final-value prediction for `f̄`, when `H(0⁺)` exists.
    pub predicted_f_hz: Option<f64>,
}

pub fn summarize(case: &NetworkCase, res: &SimulationResult) -> SimulationSummary {
    let mut nadir = (f64::INFINITY, 0, 0.0);
    for (i, f) in res.freq.iter().enumerate() {
        for (k, &v) in f.iter().enumerate() {
            if v < nadir.0 {
                nadir = (v, res.bus_ids[i], res.time[k]);
            }
        }
    }
    let spread = res.spread();
    let (k_spread, max_spread) = spread
        .iter()
        .enumerate()
        .fold((0, 0.0), |best, (k, &v)| if v > best.1 { (k, v) } else { best });
    let t_last = res.time.last().copied().unwrap_or(0.0);
    let predicted = build_laplacians(case)
        .and_then(|lap| steady_state(case, &lap, &case.disturbance_at(t_last)))
        .ok()
        .map(|w| w.iter().sum::<f64>() / w.len() as f64 * case.hz_per_unit);
    SimulationSummary {
        nadir_hz: nadir.0,
        nadir_bus: nadir.1,
        nadir_time: nadir.2,
        final_f_bar_hz: res.f_bar.last().copied().unwrap_or(0.0),
        max_spread_hz: max_spread,
        max_spread_time: res.time.get(k_spread).copied().unwrap_or(0.0),
        predicted_f_hz: predicted,
    }
}

pub fn write_summary(w: &mut dyn Write, s: &SimulationSummary) -> io::Result<()> {
    writeln!(w, "nadir: {:.6e} Hz at bus {} (t = {:.4} s)", s.nadir_hz, s.nadir_bus, s.nadir_time)?;
    writeln!(w, "final average frequency deviation: {:.9e} Hz", s.final_f_bar_hz)?;
    if let Some(p) = s.predicted_f_hz {
        writeln!(w, "steady-state prediction from H(0+): {p:.9e} Hz")?;
    }
    writeln!(
        w,
        "max inter-bus spread |f_i - f_bar|: {:.6e} Hz (t = {:.4} s)",
        s.max_spread_hz, s.max_spread_time
    )
}

pub fn simulate_case(case: &Case, ov: &Overrides) -> Result<SimulationResult> {
    let a = ov.apply(case.file.analysis);
    let lap = build_laplacians(&case.network)?;
    let model = assemble(&case.network, &lap)?;
    simulate(&model, &case.network, &a.simulation())
}

/// Writes the CSV to `out_path` (summary to `out`) or, without a path, the
/// CSV to `out` and the summary to `diag`.
pub fn cmd_simulate(
    path: &Path,
    ov: &Overrides,
    out_path: Option<&Path>,
    out: &mut dyn Write,
    diag: &mut dyn Write,
) -> Result<i32> {
    let case = Case::load(path)?;
    let a = ov.apply(case.file.analysis);
    let res = simulate_case(&case, ov)?;
    let summary = summarize(&case.network, &res);
    match out_path {
        Some(_) => {
            with_output(out_path, out, |w| write_timeseries_csv(w, &case, &a, &res))?;
            write_summary(out, &summary)?;
        }
        None => {
            write_timeseries_csv(out, &case, &a, &res)?;
            write_summary(diag, &summary)?;
        }
    }
    Ok(EXIT_PASS)
}

// ---------------------------------------------------------------------------
// kron

/// Kron reduction of a case's AC network onto a subset of its buses.
#[derive(Debug, Clone, PartialEq)]
pub struct KronOutput {
    pub keep: Vec<BusId>,
    pub eliminated: Vec<BusId>,
    pub reduced: DMatrix<f64>,
    /// `|keep| × n` map of bus loads onto the kept buses.
    pub load_map: DMatrix<f64>,
    /// Case over the kept buses; the dynamics of eliminated buses are
    /// dropped, so this is meaningful when they act as network nodes only.
    pub reduced_case: CaseFile,
}

/// Reduced AC lines with susceptance below this fraction of the largest
/// one are dropped.
const KRON_LINE_TOL: f64 = 1e-12;

pub fn kron_case(case: &Case, keep: &[BusId]) -> Result<KronOutput> {
    let net = &case.network;
    let mut idx = Vec::with_capacity(keep.len());
    for &id in keep {
        idx.push(
            net.index_of(id)
                .ok_or_else(|| Error::InvalidArgument(format!("bus {id} is not in the case")))?,
        );
    }
    let lap = build_laplacians(net)?;
    let red = kron_reduce(&lap.l_ac, &idx)?;
    let eliminated: Vec<BusId> = red.eliminate.iter().map(|&i| net.buses[i].id()).collect();
    for l in &net.dc_lines {
        if eliminated.contains(&l.from) || eliminated.contains(&l.to) {
            return Err(Error::InvalidArgument(format!(
                "dc line {}-{} touches an eliminated bus",
                l.from, l.to
            )));
        }
    }

    let mut file = case.file.clone();
    file.meta.name = format!("{}_kron", file.meta.name);
    let scale = red.reduced.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    file.ac_lines.clear();
    for a in 0..keep.len() {
        for b in a + 1..keep.len() {
            let bij = -red.reduced[(a, b)];
            if bij > KRON_LINE_TOL * scale {
                file.ac_lines.push(crate::case::AcLineEntry { from: keep[a], to: keep[b], b: bij });
            }
        }
    }
    let loads: Vec<f64> = net.buses.iter().map(|b| b.p_load).collect();
    file.buses = keep
        .iter()
        .zip(&idx)
        .enumerate()
        .map(|(a, (_, &i))| {
            let mut entry = case.file.buses.iter().find(|e| e.id == net.buses[i].id()).unwrap().clone();
            entry.p_load = (0..loads.len()).map(|j| red.load_map[(a, j)] * loads[j]).sum();
            entry
        })
        .collect();
    file.disturbances.clear();
    for d in &net.disturbances {
        let col = net.index_of(d.bus).unwrap();
        for (a, &id) in keep.iter().enumerate() {
            let w = red.load_map[(a, col)];
            if w == 0.0 {
                continue;
            }
            match file.disturbances.iter_mut().find(|e| e.bus == id && e.time == d.time) {
                Some(e) => e.magnitude += w * d.magnitude,
                None => file.disturbances.push(DisturbanceEntry {
                    bus: id,
                    magnitude: w * d.magnitude,
                    time: d.time,
                }),
            }
        }
    }
    file.build()?;
    Ok(KronOutput {
        keep: keep.to_vec(),
        eliminated,
        reduced: red.reduced,
        load_map: red.load_map,
        reduced_case: file,
    })
}

fn write_matrix(w: &mut dyn Write, rows: &[BusId], cols: &[BusId], m: &DMatrix<f64>) -> io::Result<()> {
    write!(w, "{:>8}", "")?;
    for c in cols {
        write!(w, " {c:>14}")?;
    }
    writeln!(w)?;
    for (i, r) in rows.iter().enumerate() {
        write!(w, "{r:>8}")?;
        for j in 0..cols.len() {
            write!(w, " {:>14.6e}", m[(i, j)])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn cmd_kron(path: &Path, keep: &[BusId], out_path: Option<&Path>, out: &mut dyn Write) -> Result<i32> {
    let case = Case::load(path)?;
    let k = kron_case(&case, keep)?;
    writeln!(out, "kept buses: {:?}", k.keep)?;
    writeln!(out, "eliminated buses: {:?}", k.eliminated)?;
    writeln!(out, "reduced AC Laplacian:")?;
    write_matrix(out, &k.keep, &k.keep, &k.reduced)?;
    writeln!(out, "load map (kept x all):")?;
    write_matrix(out, &k.keep, &case.network.bus_ids(), &k.load_map)?;
    if let Some(p) = out_path {
        std::fs::write(p, k.reduced_case.to_toml_string()?)?;
        writeln!(out, "reduced case written to {}", p.display())?;
    }
    Ok(EXIT_PASS)
}
