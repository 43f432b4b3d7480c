//! Bus-level and DC-coherency stability conditions, evaluated on a
//! frequency grid with exact rational limits at the origin.

use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::buslib::{BusId, BusModel};
use crate::closedloop::h_inverse;
use crate::error::{Error, Result};
use crate::network::{build_laplacians, DcSubnetwork, LaplacianSet, NetworkCase};
use crate::ratfun::{HinfCertificate, Polynomial, RationalFunction, ZeroLimit, STABILITY_TOL};

/// A sample counts as strictly positive at or above this value.
pub const STRICT_TOL: f64 = 1e-9;

const REFINE_MINIMA: usize = 5;
const REFINE_REL_SPACING: f64 = 1e-4;
const S_DELTA_SAMPLES: usize = 41;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyGrid {
    pub omega_points: Vec<f64>,
    pub includes_zero_limit: bool,
    pub delta: f64,
}

impl FrequencyGrid {
    pub const DEFAULT_MIN: f64 = 1e-4;
    pub const DEFAULT_MAX: f64 = 1e4;
    pub const DEFAULT_POINTS: usize = 800;
    pub const DEFAULT_DELTA: f64 = 1e-3;

    pub fn log_spaced(omega_min: f64, omega_max: f64, points: usize, delta: f64) -> Result<Self> {
        if !(omega_min > 0.0 && omega_max > omega_min && omega_max.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "grid bounds must satisfy 0 < min < max (got {omega_min}, {omega_max})"
            )));
        }
        if points < 2 {
            return Err(Error::InvalidArgument("grid needs at least 2 points".into()));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidArgument(format!("delta must be positive (got {delta})")));
        }
        let (a, b) = (omega_min.log10(), omega_max.log10());
        let omega_points = (0..points)
            .map(|k| 10f64.powf(a + (b - a) * k as f64 / (points - 1) as f64))
            .collect();
        Ok(FrequencyGrid {
            omega_points,
            includes_zero_limit: true,
            delta,
        })
    }

    pub fn omega_min(&self) -> f64 {
        self.omega_points[0]
    }

    pub fn omega_max(&self) -> f64 {
        *self.omega_points.last().unwrap()
    }

    fn in_low_band(&self, w: f64) -> bool {
        w < self.delta
    }

    fn in_high_band(&self, w: f64) -> bool {
        w > self.omega_max() / 10.0
    }
}

impl Default for FrequencyGrid {
    fn default() -> Self {
        FrequencyGrid::log_spaced(
            Self::DEFAULT_MIN,
            Self::DEFAULT_MAX,
            Self::DEFAULT_POINTS,
            Self::DEFAULT_DELTA,
        )
        .unwrap()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Marginal,
    Fail,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Marginal => "MARGINAL",
            Verdict::Fail => "FAIL",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Culprit {
    Bus(BusId),
    Subnetwork { index: usize, buses: Vec<BusId> },
}

impl fmt::Display for Culprit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Culprit::Bus(id) => write!(f, "bus {id}"),
            Culprit::Subnetwork { index, buses } => write!(f, "dc subnetwork {index} {buses:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionResult {
    pub id: String,
    pub verdict: Verdict,
    /// Imaginary part of the worst sample (0 for the exact origin limit).
    pub worst_omega: Option<f64>,
    /// Real part of the worst sample when it lies off the imaginary axis.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst_sigma: Option<f64>,
    /// Smallest value of the tested quantity; positive means satisfied.
    pub margin: Option<f64>,
    pub culprit: Option<Culprit>,
    pub detail: String,
}

impl ConditionResult {
    fn new(id: &str, verdict: Verdict, detail: impl Into<String>) -> Self {
        ConditionResult {
            id: id.to_string(),
            verdict,
            worst_omega: None,
            worst_sigma: None,
            margin: None,
            culprit: None,
            detail: detail.into(),
        }
    }

    fn at(mut self, omega: f64, margin: f64) -> Self {
        self.worst_omega = Some(omega);
        self.margin = Some(margin);
        self
    }

    fn culprit(mut self, c: Culprit) -> Self {
        if self.verdict != Verdict::Pass || self.culprit.is_none() {
            self.culprit = Some(c);
        }
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// Worst result of a list: fail beats marginal beats pass, then smaller margin.
fn worst_of(id: &str, results: Vec<ConditionResult>, vacuous: &str) -> ConditionResult {
    results
        .into_iter()
        .reduce(|a, b| {
            let key = |r: &ConditionResult| (r.verdict, -r.margin.unwrap_or(f64::INFINITY));
            let (ka, kb) = (key(&a), key(&b));
            if kb.0 > ka.0 || (kb.0 == ka.0 && kb.1 > ka.1) {
                b
            } else {
                a
            }
        })
        .map(|mut r| {
            r.id = id.to_string();
            r
        })
        .unwrap_or_else(|| ConditionResult::new(id, Verdict::Pass, vacuous))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BusCondition1 {
    pub bus: BusId,
    pub hinf_k_inv: ConditionResult,
    pub bounded_g_inv: ConditionResult,
    pub positive_xi: ConditionResult,
    /// Bound on `|g⁻¹|` over S_δ.
    pub c: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Condition1 {
    pub per_bus: Vec<BusCondition1>,
    pub average_xi: ConditionResult,
}

impl Condition1 {
    pub fn summary(&self) -> [ConditionResult; 4] {
        let collect = |f: fn(&BusCondition1) -> &ConditionResult| self.per_bus.iter().map(f).cloned().collect();
        [
            worst_of("1.1", collect(|b| &b.hinf_k_inv), "no buses"),
            worst_of("1.2", collect(|b| &b.bounded_g_inv), "no buses"),
            worst_of("1.3", collect(|b| &b.positive_xi), "no buses"),
            self.average_xi.clone(),
        ]
    }

    pub fn c(&self) -> Option<f64> {
        self.per_bus.iter().filter_map(|b| b.c).reduce(f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Condition2 {
    pub results: [ConditionResult; 3],
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    /// Samples at which the displayed grouping of 2.3 and the Schur-complement
    /// grouping disagree in sign.
    pub grouping_disagreements: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Constants {
    pub c: Option<f64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
}

/// Grid minimum of `λ_min(Herm(H⁻¹(jω)))` and the resulting gain bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub herm_min: f64,
    pub omega: f64,
    pub kappa: Option<f64>,
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSummary {
    pub omega_min: f64,
    pub omega_max: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub case: String,
    pub verdict: Verdict,
    pub delta: f64,
    pub grid: GridSummary,
    pub conditions: Vec<ConditionResult>,
    pub constants: Constants,
    pub witness: Option<Witness>,
    pub notes: Vec<String>,
}

impl StabilityReport {
    pub fn condition(&self, id: &str) -> Option<&ConditionResult> {
        self.conditions.iter().find(|c| c.id == id)
    }
}

impl fmt::Display for StabilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "case: {}", self.case)?;
        writeln!(
            f,
            "grid: {} points, {:e}..{:e} rad/s, delta {:e}",
            self.grid.points, self.grid.omega_min, self.grid.omega_max, self.delta
        )?;
        for c in &self.conditions {
            write!(f, "  {:<4} {:<8}", c.id, c.verdict.to_string())?;
            if let Some(m) = c.margin {
                write!(f, " margin {m:.6e}")?;
            }
            if let Some(w) = c.worst_omega {
                write!(f, " at omega {w:.6e}")?;
            }
            if let Some(s) = c.worst_sigma {
                write!(f, " (sigma {s:.3e})")?;
            }
            if let Some(cu) = &c.culprit {
                write!(f, " [{cu}]")?;
            }
            if !c.detail.is_empty() {
                write!(f, " {}", c.detail)?;
            }
            writeln!(f)?;
        }
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.6e}"));
        writeln!(
            f,
            "constants: c {} c1 {} c2 {}",
            opt(self.constants.c),
            opt(self.constants.c1),
            opt(self.constants.c2)
        )?;
        if let Some(w) = &self.witness {
            writeln!(
                f,
                "witness: min herm(H^-1) {:.6e} at omega {:.6e}, kappa {}",
                w.herm_min,
                w.omega,
                opt(w.kappa)
            )?;
        }
        for n in &self.notes {
            writeln!(f, "note: {n}")?;
        }
        write!(f, "verdict: {}", self.verdict)
    }
}

// ---------------------------------------------------------------------------
// sampling

#[derive(Debug, Clone, Copy)]
struct Sample {
    sigma: f64,
    omega: f64,
    value: f64,
}

fn key(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// Evaluate `f` on the grid plus `extra` points, then refine around the
/// smallest local minima.
fn scan_axis<F>(f: &F, grid: &FrequencyGrid, extra: &[f64]) -> Vec<Sample>
where
    F: Fn(f64) -> f64 + Sync,
{
    let mut omegas: Vec<f64> = grid.omega_points.clone();
    omegas.extend(extra.iter().copied().filter(|w| *w > 0.0 && w.is_finite()));
    omegas.sort_by(f64::total_cmp);
    omegas.dedup();
    let values: Vec<f64> = omegas.par_iter().map(|&w| f(w)).collect();

    let n = omegas.len();
    let mut minima: Vec<usize> = (0..n)
        .filter(|&i| {
            let v = key(values[i]);
            (i == 0 || v <= key(values[i - 1])) && (i + 1 == n || v <= key(values[i + 1]))
        })
        .collect();
    minima.sort_by(|&a, &b| key(values[a]).total_cmp(&key(values[b])).then(a.cmp(&b)));
    minima.truncate(REFINE_MINIMA);

    let refined: Vec<Vec<(f64, f64)>> = minima
        .par_iter()
        .map(|&i| {
            let lo = omegas[i.saturating_sub(1)];
            let hi = omegas[(i + 1).min(n - 1)];
            refine(f, lo, hi, omegas[i], values[i])
        })
        .collect();

    let mut out: Vec<Sample> = omegas
        .into_iter()
        .zip(values)
        .map(|(omega, value)| Sample {
            sigma: 0.0,
            omega,
            value,
        })
        .collect();
    for r in refined {
        out.extend(r.into_iter().map(|(omega, value)| Sample {
            sigma: 0.0,
            omega,
            value,
        }));
    }
    out.sort_by(|a, b| a.omega.total_cmp(&b.omega));
    out
}

fn refine<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64, w0: f64, v0: f64) -> Vec<(f64, f64)> {
    const DIV: usize = 8;
    let mut out = Vec::new();
    let (mut best_w, mut best_v) = (w0, v0);
    for _ in 0..64 {
        if hi - lo <= REFINE_REL_SPACING * best_w.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        let step = (hi - lo) / DIV as f64;
        let pts: Vec<(f64, f64)> = (0..=DIV)
            .map(|k| {
                let w = lo + step * k as f64;
                (w, f(w))
            })
            .collect();
        let (bi, &(w, v)) = pts
            .iter()
            .enumerate()
            .min_by(|a, b| key(a.1 .1).total_cmp(&key(b.1 .1)).then(a.0.cmp(&b.0)))
            .unwrap();
        if key(v) < key(best_v) {
            best_w = w;
            best_v = v;
        }
        let new_lo = pts[bi.saturating_sub(1)].0;
        let new_hi = pts[(bi + 1).min(DIV)].0;
        out.extend(pts);
        lo = new_lo;
        hi = new_hi;
    }
    out
}

#[derive(Debug, Clone, Copy)]
struct Judgement {
    verdict: Verdict,
    sample: Sample,
}

/// Classify samples of a quantity that must be strictly positive.
/// Tiny positive values in the low (`|s| < δ`) or high (`|s| > ω_max/10`)
/// band pass when the asymptotic sign there is confirmed positive.
fn judge(samples: &[Sample], grid: &FrequencyGrid, low_ok: bool, high_ok: bool) -> Judgement {
    let status = |s: &Sample| {
        let v = s.value;
        let r = s.omega.hypot(s.sigma);
        if v.is_nan() || v <= 0.0 {
            Verdict::Fail
        } else if v >= STRICT_TOL
            || (grid.in_low_band(r) && low_ok)
            || (grid.in_high_band(r) && high_ok)
        {
            Verdict::Pass
        } else {
            Verdict::Marginal
        }
    };
    let verdict = samples.iter().map(status).max().unwrap_or(Verdict::Pass);
    let sample = samples
        .iter()
        .filter(|s| status(s) == verdict)
        .copied()
        .min_by(|a, b| key(a.value).total_cmp(&key(b.value)))
        .unwrap_or(Sample {
            sigma: 0.0,
            omega: 0.0,
            value: f64::INFINITY,
        });
    Judgement { verdict, sample }
}

fn judged(id: &str, j: Judgement, detail: impl Into<String>) -> ConditionResult {
    let mut r = ConditionResult::new(id, j.verdict, detail).at(j.sample.omega, j.sample.value);
    if j.sample.sigma != 0.0 {
        r.worst_sigma = Some(j.sample.sigma);
    }
    r
}

/// Positive real roots of an even polynomial in ω.
fn positive_real_roots(p: &Polynomial) -> Vec<f64> {
    if p.degree().unwrap_or(0) == 0 {
        return Vec::new();
    }
    p.roots()
        .into_iter()
        .filter(|r| r.re > 0.0 && r.im.abs() <= 1e-6 * (1.0 + r.norm()))
        .map(|r| r.re)
        .collect()
}

fn lowest_sign_positive(p: &Polynomial) -> bool {
    p.lowest_order().is_some_and(|k| p.coeff(k) > 0.0)
}

/// Scan of `Re f(jω)` with exact sign information from the axis polynomial.
fn real_part_scan(f: &RationalFunction, grid: &FrequencyGrid) -> Judgement {
    let (p, _) = f.axis_real_part();
    if p.is_zero() {
        return Judgement {
            verdict: Verdict::Fail,
            sample: Sample {
                sigma: 0.0,
                omega: grid.omega_min(),
                value: 0.0,
            },
        };
    }
    let extra = positive_real_roots(&p);
    let eval = |w: f64| f.eval_jw(w).map(|z| z.re).unwrap_or(f64::NAN);
    let samples = scan_axis(&eval, grid, &extra);
    judge(&samples, grid, lowest_sign_positive(&p), p.leading() > 0.0)
}

fn axis_poles(f: &RationalFunction) -> (Vec<Complex64>, Vec<Complex64>) {
    let rhp = f.poles().iter().copied().filter(|p| p.re >= STABILITY_TOL).collect();
    let axis = f
        .poles()
        .iter()
        .copied()
        .filter(|p| p.re.abs() < STABILITY_TOL)
        .collect();
    (rhp, axis)
}

fn s_delta_points(delta: f64) -> Vec<Complex64> {
    let mut pts = Vec::with_capacity(2 * S_DELTA_SAMPLES);
    for k in 0..S_DELTA_SAMPLES {
        let phi = -std::f64::consts::FRAC_PI_2 + std::f64::consts::PI * k as f64 / (S_DELTA_SAMPLES - 1) as f64;
        pts.push(Complex64::from_polar(delta, phi));
        let w = delta * 10f64.powf(-4.0 + 4.0 * k as f64 / (S_DELTA_SAMPLES - 1) as f64);
        pts.push(Complex64::new(0.0, w));
    }
    pts
}

// ---------------------------------------------------------------------------
// condition 1

fn check_hinf_k_inv(bus: &BusModel) -> ConditionResult {
    let id = "1.1";
    match bus.k_inv().hinf_certificate() {
        HinfCertificate::Stable { peak, peak_omega } => {
            let margin = bus
                .k_inv()
                .poles()
                .iter()
                .map(|p| -p.re)
                .reduce(f64::min)
                .unwrap_or(f64::INFINITY);
            let mut r = ConditionResult::new(id, Verdict::Pass, format!("peak |k^-1| {peak:.6e}"));
            r.margin = Some(margin);
            if peak_omega.is_finite() {
                r.worst_omega = Some(peak_omega);
            }
            r
        }
        HinfCertificate::Improper { excess } => {
            ConditionResult::new(id, Verdict::Fail, format!("k^-1 improper by {excess}"))
        }
        HinfCertificate::UnstablePole(p) => {
            let mut r = ConditionResult::new(id, Verdict::Fail, format!("k^-1 has right half-plane pole {p}"));
            r.margin = Some(-p.re);
            r.worst_omega = Some(p.im.abs());
            r
        }
        HinfCertificate::MarginalPole(p) => {
            let mut r = ConditionResult::new(id, Verdict::Fail, format!("k^-1 has imaginary-axis pole {p}"));
            r.margin = Some(-p.re);
            r.worst_omega = Some(p.im.abs());
            r
        }
    }
    .culprit(Culprit::Bus(bus.id()))
}

fn check_bounded_g_inv(bus: &BusModel, delta: f64) -> (ConditionResult, Option<f64>) {
    let id = "1.2";
    let g_inv = bus.g_inv();
    if let ZeroLimit::Unbounded = g_inv.limit_at_zero() {
        let r = ConditionResult::new(id, Verdict::Fail, "g^-1 has a pole at the origin (g has a zero at 0)")
            .at(0.0, f64::INFINITY)
            .culprit(Culprit::Bus(bus.id()));
        return (r, None);
    }
    if let Some(p) = g_inv
        .poles()
        .iter()
        .find(|p| p.re > -STABILITY_TOL && p.norm() <= delta)
    {
        let r = ConditionResult::new(id, Verdict::Fail, format!("g^-1 has pole {p} inside S_delta"))
            .at(p.im.abs(), f64::INFINITY)
            .culprit(Culprit::Bus(bus.id()));
        return (r, None);
    }
    let mut c = g_inv.limit_at_zero().finite().unwrap_or(0.0).abs();
    for s in s_delta_points(delta) {
        match g_inv.eval(s) {
            Ok(v) => c = c.max(v.norm()),
            Err(_) => c = f64::INFINITY,
        }
    }
    let verdict = if c.is_finite() { Verdict::Pass } else { Verdict::Fail };
    let mut r = ConditionResult::new(id, verdict, format!("|g^-1| <= {c:.6e} on S_delta"));
    r.margin = Some(c);
    (r.culprit(Culprit::Bus(bus.id())), c.is_finite().then_some(c))
}

fn check_positive_xi(bus: &BusModel, grid: &FrequencyGrid) -> ConditionResult {
    let id = "1.3";
    let f = bus.gk_inv();
    let cul = Culprit::Bus(bus.id());
    let (rhp, axis) = axis_poles(f);
    if let Some(p) = rhp.first() {
        return ConditionResult::new(id, Verdict::Fail, format!("RHP pole {p} of g^-1 k^-1"))
            .at(p.im.abs(), f64::NEG_INFINITY)
            .culprit(cul);
    }
    for p in &axis {
        if p.norm() > STABILITY_TOL {
            return ConditionResult::new(id, Verdict::Fail, format!("imaginary-axis pole {p} of g^-1 k^-1"))
                .at(p.im.abs(), f64::NEG_INFINITY)
                .culprit(cul);
        }
    }
    let m = f.relative_degree();
    if m.abs() >= 2 && m != i64::MAX {
        let j = real_part_scan(f, grid);
        let detail = format!("relative degree {m} of g^-1 k^-1 forces a negative real part");
        let r = if j.verdict == Verdict::Fail {
            judged(id, j, detail)
        } else {
            ConditionResult::new(id, Verdict::Fail, detail).at(f64::INFINITY, f64::NEG_INFINITY)
        };
        return r.culprit(cul);
    }
    if m.abs() == 1 && f.num().leading() / f.den().leading() <= 0.0 {
        return ConditionResult::new(id, Verdict::Fail, "negative high-frequency coefficient of g^-1 k^-1")
            .at(f64::INFINITY, f64::NEG_INFINITY)
            .culprit(cul);
    }
    let j = real_part_scan(f, grid);
    judged(id, j, "").culprit(cul)
}

fn average(fs: &[&RationalFunction]) -> RationalFunction {
    let n = fs.len().max(1) as f64;
    fs.iter()
        .fold(RationalFunction::constant(0.0), |acc, f| acc.add(f))
        .scale(1.0 / n)
}

fn check_average_xi(buses: &[&BusModel], grid: &FrequencyGrid) -> ConditionResult {
    let id = "1.4";
    let avg = average(&buses.iter().map(|b| b.gk_inv()).collect::<Vec<_>>());
    let limit = match avg.limit_at_zero() {
        ZeroLimit::Finite(v) => v,
        ZeroLimit::Unbounded => {
            return ConditionResult::new(id, Verdict::Fail, "average g^-1 k^-1 has a pole at the origin")
                .at(0.0, f64::NAN);
        }
    };
    let j = real_part_scan(&avg, grid);
    let zero_verdict = if limit >= STRICT_TOL {
        Verdict::Pass
    } else if limit > 0.0 {
        Verdict::Marginal
    } else {
        Verdict::Fail
    };
    let zero_first = zero_verdict > j.verdict || (zero_verdict == j.verdict && limit <= j.sample.value);
    let mut r = if zero_first {
        ConditionResult::new(id, zero_verdict, "limit s -> 0").at(0.0, limit)
    } else {
        judged(id, j, "")
    };
    if r.verdict != Verdict::Pass {
        // culprit: the bus contributing least at the worst point
        let s = Complex64::new(0.0, r.worst_omega.unwrap_or(0.0));
        let worst_bus = buses
            .iter()
            .map(|b| {
                let v = if s.im == 0.0 {
                    b.gk_inv().limit_at_zero().finite().unwrap_or(f64::NAN)
                } else {
                    b.xi(s).unwrap_or(f64::NAN)
                };
                (b.id(), key(v))
            })
            .min_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((id, _)) = worst_bus {
            r = r.culprit(Culprit::Bus(id));
        }
    }
    r
}

/// Evaluate Condition 1 for every bus.
pub fn check_condition1(buses: &[&BusModel], grid: &FrequencyGrid) -> Condition1 {
    let per_bus = buses
        .iter()
        .map(|b| {
            let (bounded, c) = check_bounded_g_inv(b, grid.delta);
            BusCondition1 {
                bus: b.id(),
                hinf_k_inv: check_hinf_k_inv(b),
                bounded_g_inv: bounded,
                positive_xi: check_positive_xi(b, grid),
                c,
            }
        })
        .collect();
    Condition1 {
        per_bus,
        average_xi: check_average_xi(buses, grid),
    }
}

// ---------------------------------------------------------------------------
// condition 2

#[derive(Debug, Clone, PartialEq)]
pub struct Coherency {
    /// `k̄_j⁻¹(s)` per subnetwork.
    pub k_bar_inv: Vec<Complex64>,
    /// Max deviation from the mean per subnetwork.
    pub delta_per_subnetwork: Vec<f64>,
    /// `Δ(s)`; zero without subnetworks.
    pub delta: f64,
    pub xi_min: f64,
}

/// Coherency quantities at `s`. `buses` are indexed like the case buses.
pub fn coherency_quantities(
    buses: &[&BusModel],
    subnetworks: &[DcSubnetwork],
    s: Complex64,
) -> Result<Coherency> {
    let mut k_bar_inv = Vec::with_capacity(subnetworks.len());
    let mut delta_per_subnetwork = Vec::with_capacity(subnetworks.len());
    for sub in subnetworks {
        let vals: Vec<Complex64> = sub
            .buses
            .iter()
            .map(|&i| buses[i].k_inv().eval(s))
            .collect::<Result<_>>()?;
        let mean = vals.iter().sum::<Complex64>() / vals.len() as f64;
        let dev = vals.iter().map(|v| (v - mean).norm()).fold(0.0, f64::max);
        k_bar_inv.push(mean);
        delta_per_subnetwork.push(dev);
    }
    let mut xi_min = f64::INFINITY;
    for b in buses {
        xi_min = xi_min.min(b.xi(s)?);
    }
    Ok(Coherency {
        delta: delta_per_subnetwork.iter().copied().fold(0.0, f64::max),
        k_bar_inv,
        delta_per_subnetwork,
        xi_min,
    })
}

fn sub_culprit(lap: &LaplacianSet, j: usize) -> Culprit {
    Culprit::Subnetwork {
        index: j,
        buses: lap.subnetworks[j].bus_ids.clone(),
    }
}

/// 2.3 margin in the Schur-complement grouping, and in the displayed grouping.
fn c23_margins(c: &Coherency, lap: &LaplacianSet) -> (f64, f64) {
    let lmax = lap.lambda_dc_max;
    let kmin = c
        .k_bar_inv
        .iter()
        .zip(&lap.subnetworks)
        .map(|(k, sub)| k.re * sub.lambda_min)
        .fold(f64::INFINITY, f64::min);
    let kmin_display = c
        .k_bar_inv
        .iter()
        .zip(&lap.subnetworks)
        .map(|(k, sub)| k.re * sub.lambda_min / lmax)
        .fold(f64::INFINITY, f64::min);
    let schur = 4.0 * c.xi_min * kmin - (lmax * c.delta).powi(2);
    let display = 4.0 * c.xi_min * kmin_display - lmax * c.delta * c.delta;
    (schur, display)
}

/// Margin of Condition 2.3 at `s` (Schur-complement grouping).
pub fn condition23_margin(buses: &[&BusModel], lap: &LaplacianSet, s: Complex64) -> Result<f64> {
    Ok(c23_margins(&coherency_quantities(buses, &lap.subnetworks, s)?, lap).0)
}

/// The 2×2 matrix whose definiteness the three scalar inequalities encode.
pub fn proof_matrix(c: &Coherency, lap: &LaplacianSet) -> DMatrix<f64> {
    let kmin = c
        .k_bar_inv
        .iter()
        .zip(&lap.subnetworks)
        .map(|(k, sub)| k.re * sub.lambda_min)
        .fold(f64::INFINITY, f64::min);
    let off = -0.5 * lap.lambda_dc_max * c.delta;
    DMatrix::from_row_slice(2, 2, &[c.xi_min, off, off, kmin])
}

fn check_k_bar_positive(buses: &[&BusModel], lap: &LaplacianSet, grid: &FrequencyGrid) -> (ConditionResult, Option<f64>) {
    let mut results = Vec::new();
    let mut c1 = f64::INFINITY;
    for (j, sub) in lap.subnetworks.iter().enumerate() {
        let cul = sub_culprit(lap, j);
        let k_bar = average(&sub.buses.iter().map(|&i| buses[i].k_inv()).collect::<Vec<_>>());
        let (rhp, axis) = axis_poles(&k_bar);
        if let Some(p) = rhp.first().or(axis.first()) {
            results.push(
                ConditionResult::new("2.1", Verdict::Fail, format!("mean k^-1 has pole {p} in the closed right half-plane"))
                    .at(p.im.abs(), f64::NEG_INFINITY)
                    .culprit(cul),
            );
            c1 = f64::NEG_INFINITY;
            continue;
        }
        let j_axis = real_part_scan(&k_bar, grid);
        let limit = k_bar.limit_at_zero().finite().unwrap_or(f64::NAN);
        let mut floor = limit;
        for s in s_delta_points(grid.delta) {
            floor = floor.min(k_bar.eval(s).map(|z| z.re).unwrap_or(f64::NAN));
        }
        c1 = c1.min(key(floor));
        let floor_verdict = if floor >= STRICT_TOL {
            Verdict::Pass
        } else if floor > 0.0 {
            Verdict::Marginal
        } else {
            Verdict::Fail
        };
        let r = if floor_verdict > j_axis.verdict {
            ConditionResult::new("2.1", floor_verdict, "floor on S_delta").at(0.0, floor)
        } else {
            judged("2.1", j_axis, "")
        };
        results.push(r.culprit(cul));
    }
    let c1 = (!lap.subnetworks.is_empty()).then_some(c1);
    (worst_of("2.1", results, "no dc subnetworks"), c1)
}

fn check_steady_state_coherence(buses: &[&BusModel], lap: &LaplacianSet, delta: f64) -> (ConditionResult, Option<f64>) {
    let mut results = Vec::new();
    let mut c2 = 0.0f64;
    for (j, sub) in lap.subnetworks.iter().enumerate() {
        let cul = sub_culprit(lap, j);
        let limits: Vec<Option<f64>> = sub.buses.iter().map(|&i| buses[i].k_inv().limit_at_zero().finite()).collect();
        if limits.iter().any(Option::is_none) {
            results.push(
                ConditionResult::new("2.2", Verdict::Fail, "k^-1 unbounded at the origin")
                    .at(0.0, f64::INFINITY)
                    .culprit(cul),
            );
            c2 = f64::INFINITY;
            continue;
        }
        let limits: Vec<f64> = limits.into_iter().flatten().collect();
        let mean = limits.iter().sum::<f64>() / limits.len() as f64;
        let spread = limits.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
        if spread > 1e-9 * (1.0 + mean.abs()) {
            results.push(
                ConditionResult::new("2.2", Verdict::Fail, "k^-1(0) differs between converters, Delta(0) > 0")
                    .at(0.0, spread)
                    .culprit(cul),
            );
            c2 = f64::INFINITY;
            continue;
        }
        let mut sup = 0.0f64;
        for s in s_delta_points(delta) {
            let vals: Result<Vec<Complex64>> = sub.buses.iter().map(|&i| buses[i].k_inv().eval(s)).collect();
            let ratio = match vals {
                Ok(v) => {
                    let m = v.iter().sum::<Complex64>() / v.len() as f64;
                    v.iter().map(|x| (x - m).norm()).fold(0.0, f64::max) / s.norm()
                }
                Err(_) => f64::INFINITY,
            };
            sup = sup.max(ratio);
        }
        let verdict = if sup.is_finite() { Verdict::Pass } else { Verdict::Fail };
        let mut r = ConditionResult::new("2.2", verdict, format!("Delta(s)/|s| <= {sup:.6e} on S_delta"));
        r.margin = Some(sup);
        results.push(r.culprit(cul));
        c2 = c2.max(sup);
    }
    // smallest margin is the wrong order here: report the largest c2
    let r = results
        .iter()
        .cloned()
        .max_by(|a, b| {
            a.verdict
                .cmp(&b.verdict)
                .then(a.margin.unwrap_or(0.0).total_cmp(&b.margin.unwrap_or(0.0)))
        })
        .map(|mut r| {
            r.id = "2.2".into();
            r
        })
        .unwrap_or_else(|| ConditionResult::new("2.2", Verdict::Pass, "no dc subnetworks"));
    (r, (!lap.subnetworks.is_empty()).then_some(c2))
}

fn check_coherency_bound(buses: &[&BusModel], lap: &LaplacianSet, grid: &FrequencyGrid) -> (ConditionResult, usize) {
    if lap.subnetworks.is_empty() {
        return (ConditionResult::new("2.3", Verdict::Pass, "no dc subnetworks"), 0);
    }
    let at = |s: Complex64| -> (f64, f64) {
        match coherency_quantities(buses, &lap.subnetworks, s) {
            Ok(c) => c23_margins(&c, lap),
            Err(_) => (f64::NAN, f64::NAN),
        }
    };
    let axis = |w: f64| at(Complex64::new(0.0, w)).0;
    let mut samples = scan_axis(&axis, grid, &[]);

    // off-axis rays through the right half-plane
    let radii: Vec<f64> = grid.omega_points.iter().step_by(4).copied().collect();
    for k in 0..3 {
        let theta = k as f64 * std::f64::consts::PI / 6.0;
        let ray: Vec<Sample> = radii
            .par_iter()
            .map(|&r| {
                let s = Complex64::from_polar(r, theta);
                Sample {
                    sigma: s.re,
                    omega: s.im,
                    value: at(s).0,
                }
            })
            .collect();
        samples.extend(ray);
    }

    let disagreements = samples
        .iter()
        .filter(|s| {
            let (a, b) = at(Complex64::new(s.sigma, s.omega));
            a.is_finite() && b.is_finite() && (a > 0.0) != (b > 0.0)
        })
        .count();

    let (lo, hi) = (grid.delta, grid.omega_max());
    let low_ok = [1e-2, 1e-3].iter().all(|f| axis(lo * f) > 0.0);
    let high_ok = [10.0, 100.0].iter().all(|f| axis(hi * f) > 0.0);
    let j = judge(&samples, grid, low_ok, high_ok);

    let s = Complex64::new(j.sample.sigma, j.sample.omega);
    let culprit = coherency_quantities(buses, &lap.subnetworks, s).ok().map(|c| {
        let worst = if c.delta > 0.0 {
            argmax(&c.delta_per_subnetwork)
        } else {
            let weighted: Vec<f64> = c
                .k_bar_inv
                .iter()
                .zip(&lap.subnetworks)
                .map(|(k, sub)| -(k.re * sub.lambda_min))
                .collect();
            argmax(&weighted)
        };
        sub_culprit(lap, worst)
    });
    let mut r = judged("2.3", j, "");
    if let Some(c) = culprit {
        r = r.culprit(c);
    }
    (r, disagreements)
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &x)| if key(x) > bv { (i, key(x)) } else { (bi, bv) })
        .0
}

/// Evaluate Condition 2 for every DC subnetwork.
pub fn check_condition2(buses: &[&BusModel], lap: &LaplacianSet, grid: &FrequencyGrid) -> Condition2 {
    let (r1, c1) = check_k_bar_positive(buses, lap, grid);
    let (r2, c2) = check_steady_state_coherence(buses, lap, grid.delta);
    let (r3, grouping_disagreements) = check_coherency_bound(buses, lap, grid);
    Condition2 {
        results: [r1, r2, r3],
        c1,
        c2,
        grouping_disagreements,
    }
}

// ---------------------------------------------------------------------------
// lemmas

/// Smallest eigenvalue of the Hermitian part `(M + M*)/2`.
pub fn hermitian_part_min(m: &DMatrix<Complex64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    let h = (m + m.adjoint()).scale(0.5);
    SymmetricEigen::new(h).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn sigma_max(m: &DMatrix<Complex64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.clone().singular_values().max()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lemma1Check {
    /// Whether `λ_min(Herm(H⁻¹)) ≥ 1/κ`.
    pub premise: bool,
    pub herm_min: f64,
    pub sigma_max_h: f64,
    /// Whether `σ_max(H) ≤ κ`, evaluated by SVD of the inverse.
    pub conclusion: bool,
}

/// Premise and conclusion of the Hermitian-part gain bound for `H = h_inv⁻¹`.
pub fn lemma1_bound(h_inv: &DMatrix<Complex64>, kappa: f64) -> Result<Lemma1Check> {
    if h_inv.nrows() != h_inv.ncols() {
        return Err(Error::InvalidArgument("matrix must be square".into()));
    }
    let sv = h_inv.clone().singular_values();
    let smin = sv.min();
    if !(smin > 1e-14 * sv.max()) {
        return Err(Error::SingularMatrix);
    }
    let herm_min = hermitian_part_min(h_inv);
    let h = h_inv.clone().try_inverse().ok_or(Error::SingularMatrix)?;
    let sigma_max_h = sigma_max(&h);
    Ok(Lemma1Check {
        premise: herm_min >= 1.0 / kappa,
        herm_min,
        sigma_max_h,
        conclusion: sigma_max_h <= kappa * (1.0 + 1e-10),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lemma2Check {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `Re(y* M D x) ≤ ‖x‖‖y‖ λ_max(M) max|d_i|` for symmetric PSD `M`.
pub fn lemma2_bound(
    m: &DMatrix<f64>,
    d: &[Complex64],
    x: &DVector<Complex64>,
    y: &DVector<Complex64>,
) -> Result<Lemma2Check> {
    let n = m.nrows();
    if m.ncols() != n || d.len() != n || x.len() != n || y.len() != n {
        return Err(Error::InvalidArgument("dimension mismatch".into()));
    }
    let scale = m.amax().max(1.0);
    if (m - m.transpose()).amax() > 1e-12 * scale {
        return Err(Error::InvalidArgument("matrix is not symmetric".into()));
    }
    let ev = SymmetricEigen::new(m.clone()).eigenvalues;
    let lmin = ev.min();
    if lmin < -1e-12 * scale {
        return Err(Error::NotPsd(lmin));
    }
    let lmax = ev.max().max(0.0);
    let mc = m.map(|v| Complex64::new(v, 0.0));
    let dx = DVector::from_iterator(n, d.iter().zip(x.iter()).map(|(a, b)| a * b));
    let lhs = y.dotc(&(mc * dx)).re;
    let dmax = d.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let rhs = x.norm() * y.norm() * lmax * dmax;
    Ok(Lemma2Check {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-12 * (1.0 + rhs.abs()),
    })
}

// ---------------------------------------------------------------------------
// certification

/// Grid minimum of the Hermitian part of `H⁻¹(jω)`.
pub fn hermitian_witness(case: &NetworkCase, lap: &LaplacianSet, grid: &FrequencyGrid) -> (f64, f64) {
    let vals: Vec<f64> = grid
        .omega_points
        .par_iter()
        .map(|&w| {
            h_inverse(case, lap, Complex64::new(0.0, w))
                .map(|m| hermitian_part_min(&m))
                .unwrap_or(f64::NAN)
        })
        .collect();
    grid.omega_points
        .iter()
        .zip(vals)
        .map(|(&w, v)| (key(v), w))
        .fold((f64::INFINITY, 0.0), |best, cur| if cur.0 < best.0 { cur } else { best })
}

/// Run both conditions with the default grid.
pub fn certify(case: &NetworkCase) -> Result<StabilityReport> {
    certify_with(case, &FrequencyGrid::default())
}

pub fn certify_with(case: &NetworkCase, grid: &FrequencyGrid) -> Result<StabilityReport> {
    let lap = build_laplacians(case)?;
    let buses = case.models();
    let c1 = check_condition1(&buses, grid);
    let c2 = check_condition2(&buses, &lap, grid);

    let mut conditions: Vec<ConditionResult> = c1.summary().into();
    conditions.extend(c2.results.iter().cloned());
    let verdict = conditions.iter().map(|c| c.verdict).max().unwrap_or(Verdict::Pass);

    let mut notes = Vec::new();
    if c2.grouping_disagreements > 0 {
        notes.push(format!(
            "condition 2.3: displayed and Schur groupings disagree in sign at {} samples",
            c2.grouping_disagreements
        ));
    }
    if lap.subnetworks.is_empty() {
        notes.push("no dc subnetworks: condition 2 holds vacuously".into());
    }

    let (herm_min, omega) = hermitian_witness(case, &lap, grid);
    let consistent = verdict != Verdict::Pass || herm_min > 0.0;
    if !consistent {
        notes.push(format!(
            "witness inconsistent with PASS: Hermitian part of H^-1 reaches {herm_min:.3e} at omega {omega:.3e}"
        ));
    }
    let witness = Witness {
        herm_min,
        omega,
        kappa: (herm_min > 0.0).then(|| 1.0 / herm_min),
        consistent,
    };

    Ok(StabilityReport {
        case: case.name.clone(),
        verdict,
        delta: grid.delta,
        grid: GridSummary {
            omega_min: grid.omega_min(),
            omega_max: grid.omega_max(),
            points: grid.omega_points.len(),
        },
        conditions,
        constants: Constants {
            c: c1.c(),
            c1: c2.c1,
            c2: c2.c2,
        },
        witness: Some(witness),
        notes,
    })
}
