//! Closed-loop interconnection of bus blocks through the AC and DC networks:
//! pointwise frequency response, a state-space realization for time-domain
//! load steps, and an eigenvalue audit of that realization.

use log::warn;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::buslib::BusId;
use crate::error::{Error, Result};
use crate::network::{LaplacianSet, NetworkCase};
use crate::ratfun::{eigenvalues, realize, StateSpace, ZeroLimit};
use crate::stability::{hermitian_part_min, sigma_max};

fn cplx(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

/// `H⁻¹(s) = G⁻¹K⁻¹ + L_dc K⁻¹ + (ρ/s) L_ac`, evaluated from the bus
/// transfer functions.
pub fn h_inverse(case: &NetworkCase, lap: &LaplacianSet, s: Complex64) -> Result<DMatrix<Complex64>> {
    let n = case.len();
    let mut gk = DVector::<Complex64>::zeros(n);
    let mut k_inv = DVector::<Complex64>::zeros(n);
    for (i, b) in case.buses.iter().enumerate() {
        gk[i] = b.model.gk_inv().eval(s)?;
        k_inv[i] = b.model.k_inv().eval(s)?;
    }
    let mut m = cplx(&lap.l_dc) * DMatrix::from_diagonal(&k_inv);
    m += cplx(&lap.l_ac) * (Complex64::new(case.angle_rate, 0.0) / s);
    for i in 0..n {
        m[(i, i)] += gk[i];
    }
    Ok(m)
}

/// `H(s)` by inverting the direct formula.
pub fn h_direct(case: &NetworkCase, lap: &LaplacianSet, s: Complex64) -> Result<DMatrix<Complex64>> {
    h_inverse(case, lap, s)?.try_inverse().ok_or(Error::SingularMatrix)
}

/// `H(s)` from the block diagram: `z = G(d - L_dc z - (ρ/s) L_ac ω)`,
/// `ω = K z`, solved for the map `d -> ω`.
pub fn h_block(case: &NetworkCase, lap: &LaplacianSet, s: Complex64) -> Result<DMatrix<Complex64>> {
    let n = case.len();
    let mut g = DVector::<Complex64>::zeros(n);
    let mut k = DVector::<Complex64>::zeros(n);
    for (i, b) in case.buses.iter().enumerate() {
        g[i] = b.model.g().eval(s)?;
        k[i] = b.model.k().eval(s)?;
    }
    let gm = DMatrix::from_diagonal(&g);
    let km = DMatrix::from_diagonal(&k);
    let rho = Complex64::new(case.angle_rate, 0.0) / s;
    let lhs = DMatrix::<Complex64>::identity(n, n) + &gm * cplx(&lap.l_dc) + &gm * cplx(&lap.l_ac) * &km * rho;
    let z = lhs.lu().solve(&gm).ok_or(Error::SingularMatrix)?;
    Ok(km * z)
}

/// `K⁻¹(s) H(s)`, the map from disturbances to `z`.
pub fn kinv_h(case: &NetworkCase, h: &DMatrix<Complex64>, s: Complex64) -> Result<DMatrix<Complex64>> {
    let mut out = h.clone();
    for (i, b) in case.buses.iter().enumerate() {
        let ki = b.model.k_inv().eval(s)?;
        for j in 0..out.ncols() {
            out[(i, j)] *= ki;
        }
    }
    Ok(out)
}

/// Exact limit `H(0⁺) = N (Nᵀ M₀ N)⁻¹ Nᵀ`, where `N` spans the null space
/// of `L_ac` and `M₀` is the `s -> 0` limit of the remaining terms.
pub fn h_zero_limit(case: &NetworkCase, lap: &LaplacianSet) -> Result<DMatrix<f64>> {
    let n = case.len();
    let limit = |z: ZeroLimit, bus: BusId, what: &str| {
        z.finite().ok_or_else(|| {
            Error::InvalidArgument(format!("bus {bus}: {what} is unbounded at s = 0, H(0+) does not exist"))
        })
    };
    let mut m0 = DMatrix::zeros(n, n);
    let mut k0 = DVector::zeros(n);
    for (i, b) in case.buses.iter().enumerate() {
        m0[(i, i)] = limit(b.model.gk_inv().limit_at_zero(), b.id(), "g^-1 k^-1")?;
        k0[i] = limit(b.model.k_inv().limit_at_zero(), b.id(), "k^-1")?;
    }
    m0 += &lap.l_dc * DMatrix::from_diagonal(&k0);
    let (null, _) = split_spectrum(&lap.l_ac);
    let reduced = null.transpose() * &m0 * &null;
    let inv = reduced.try_inverse().ok_or(Error::SingularMatrix)?;
    Ok(&null * inv * null.transpose())
}

/// Final value of `ω` (case frequency units) after the load steps `load`
/// (p.u., bus order): `H(0⁺)` applied to `P_dist(0)`.
pub fn steady_state(case: &NetworkCase, lap: &LaplacianSet, load: &[f64]) -> Result<Vec<f64>> {
    if load.len() != case.len() {
        return Err(Error::InvalidArgument("load vector length differs from the bus count".into()));
    }
    let h0 = h_zero_limit(case, lap)?;
    let mut d = DVector::zeros(case.len());
    for (i, b) in case.buses.iter().enumerate() {
        let w = if b.model.is_converter() {
            1.0
        } else {
            b.model.k_inv().limit_at_zero().finite().unwrap_or(1.0)
        };
        d[i] = -w * load[i];
    }
    Ok((h0 * d).iter().copied().collect())
}

/// Orthonormal bases of the null space and range of a Laplacian, with the
/// nonzero eigenvalues.
fn split_spectrum(l: &DMatrix<f64>) -> (DMatrix<f64>, (DMatrix<f64>, Vec<f64>)) {
    let n = l.nrows();
    let eig = SymmetricEigen::new(l.clone());
    let scale = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let tol = 1e-9 * scale;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let (null_idx, range_idx): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| eig.eigenvalues[i] <= tol);
    let cols = |ix: &[usize]| DMatrix::from_fn(n, ix.len(), |r, c| eig.eigenvectors[(r, ix[c])]);
    let lambdas = range_idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    (cols(&null_idx), (cols(&range_idx), lambdas))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyPoint {
    pub omega: f64,
    pub h: DMatrix<Complex64>,
    pub sigma_max_h: f64,
    pub sigma_max_kinv_h: f64,
    /// `λ_min` of the Hermitian part of `H⁻¹(jω)`.
    pub herm_min_hinv: f64,
}

/// Dense frequency response at each `ω` (rad/s, nonzero).
pub fn freq_response(case: &NetworkCase, lap: &LaplacianSet, omegas: &[f64]) -> Result<Vec<FrequencyPoint>> {
    if omegas.iter().any(|w| *w == 0.0 || !w.is_finite()) {
        return Err(Error::InvalidArgument("frequency response needs finite nonzero omega".into()));
    }
    omegas
        .par_iter()
        .map(|&omega| {
            let s = Complex64::new(0.0, omega);
            let h = h_block(case, lap, s)?;
            let kh = kinv_h(case, &h, s)?;
            let hinv = h_inverse(case, lap, s)?;
            let cond = {
                let sv = hinv.clone().singular_values();
                sv.max() / sv.min()
            };
            if !(cond < 1e12) {
                warn!("H^-1(j{omega:.4e}) is nearly singular (condition {cond:.3e})");
            }
            Ok(FrequencyPoint {
                omega,
                sigma_max_h: sigma_max(&h),
                sigma_max_kinv_h: sigma_max(&kh),
                herm_min_hinv: hermitian_part_min(&hinv),
                h,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// state space

/// Linear map of the state and input vectors onto a signal.
#[derive(Debug, Clone)]
struct Lin {
    x: DMatrix<f64>,
    p: DMatrix<f64>,
}

impl Lin {
    fn add(&self, o: &Lin) -> Lin {
        Lin {
            x: &self.x + &o.x,
            p: &self.p + &o.p,
        }
    }

    fn sub(&self, o: &Lin) -> Lin {
        Lin {
            x: &self.x - &o.x,
            p: &self.p - &o.p,
        }
    }

    fn left(&self, m: &DMatrix<f64>) -> Lin {
        Lin {
            x: m * &self.x,
            p: m * &self.p,
        }
    }
}

/// Block-diagonal stack of per-bus SISO realizations.
struct Stack {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    d: DVector<f64>,
    e: DVector<f64>,
}

fn stack(parts: &[StateSpace]) -> Stack {
    let n = parts.len();
    let total: usize = parts.iter().map(StateSpace::order).sum();
    let mut s = Stack {
        a: DMatrix::zeros(total, total),
        b: DMatrix::zeros(total, n),
        c: DMatrix::zeros(n, total),
        d: DVector::zeros(n),
        e: DVector::zeros(n),
    };
    let mut off = 0;
    for (i, p) in parts.iter().enumerate() {
        let k = p.order();
        s.a.view_mut((off, off), (k, k)).copy_from(&p.a);
        s.b.view_mut((off, i), (k, 1)).copy_from(&p.b);
        s.c.view_mut((i, off), (1, k)).copy_from(&p.c);
        s.d[i] = p.d[(0, 0)];
        s.e[i] = p.derivative_gain()[(0, 0)];
        off += k;
    }
    s
}

fn selector(offset: usize, len: usize, total: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(len, total);
    for i in 0..len {
        m[(i, offset + i)] = 1.0;
    }
    m
}

/// Realized interconnection driven by (Kron-mapped) load inputs `P`:
/// `ẋ = A x + B P`, `ω = C_ω x + D_ω P`, `z = C_z x + D_z P`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopModel {
    pub bus_ids: Vec<BusId>,
    pub converter: Vec<bool>,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c_omega: DMatrix<f64>,
    pub d_omega: DMatrix<f64>,
    pub c_z: DMatrix<f64>,
    pub d_z: DMatrix<f64>,
    /// Index of the reference-angle state (always the last one).
    pub theta_ref: usize,
    pub angle_rate: f64,
    pub hz_per_unit: f64,
}

impl ClosedLoopModel {
    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_buses(&self) -> usize {
        self.bus_ids.len()
    }

    /// Transfer matrix from load inputs to `ω` at `s`.
    pub fn load_to_omega(&self, s: Complex64) -> Result<DMatrix<Complex64>> {
        StateSpace {
            a: self.a.clone(),
            b: self.b.clone(),
            c: self.c_omega.clone(),
            d: self.d_omega.clone(),
            e: None,
        }
        .eval(s)
    }

    pub fn load_to_z(&self, s: Complex64) -> Result<DMatrix<Complex64>> {
        StateSpace {
            a: self.a.clone(),
            b: self.b.clone(),
            c: self.c_z.clone(),
            d: self.d_z.clone(),
            e: None,
        }
        .eval(s)
    }

    /// `H(s)` recovered from the realization by undoing the input map
    /// `P_dist = -k⁻¹ P` on machine buses and `-P` on converter buses.
    pub fn h(&self, case: &NetworkCase, s: Complex64) -> Result<DMatrix<Complex64>> {
        let mut t = self.load_to_omega(s)?;
        for (j, b) in case.buses.iter().enumerate() {
            let w = if b.model.is_converter() {
                Complex64::new(-1.0, 0.0)
            } else {
                -b.model.k().eval(s)?
            };
            for i in 0..t.nrows() {
                t[(i, j)] *= w;
            }
        }
        Ok(t)
    }
}

/// Realize the interconnection. Buses whose `g` is improper, or whose
/// derivative `k` follows a `g` with direct feedthrough, are rejected.
pub fn assemble(case: &NetworkCase, lap: &LaplacianSet) -> Result<ClosedLoopModel> {
    let n = case.len();
    let mut gs = Vec::with_capacity(n);
    let mut ks = Vec::with_capacity(n);
    let mut ps = Vec::with_capacity(n);
    for b in &case.buses {
        let m = &b.model;
        let improper = |what: &str, e: Error| match e {
            Error::ImproperRealization(k) => Error::ImproperBus {
                bus: m.id(),
                reason: format!("{what} is improper by {k}"),
            },
            other => other,
        };
        let g = realize(m.g()).map_err(|e| improper("g", e))?;
        let k = realize(m.k()).map_err(|e| improper("k", e))?;
        if k.e.is_some() && g.d[(0, 0)] != 0.0 {
            return Err(Error::ImproperBus {
                bus: m.id(),
                reason: "k has a derivative term but g is not strictly proper".into(),
            });
        }
        let p = if m.is_converter() {
            StateSpace {
                a: DMatrix::zeros(0, 0),
                b: DMatrix::zeros(0, 1),
                c: DMatrix::zeros(1, 0),
                d: DMatrix::from_element(1, 1, 1.0),
                e: None,
            }
        } else {
            realize(m.k_inv()).map_err(|e| improper("k^-1", e))?
        };
        gs.push(g);
        ks.push(k);
        ps.push(p);
    }
    let g = stack(&gs);
    let k = stack(&ks);
    let p = stack(&ps);

    let (_, (q, lambdas)) = split_spectrum(&lap.l_ac);
    let r = lambdas.len();
    let (ng, nk, np) = (g.a.nrows(), k.a.nrows(), p.a.nrows());
    let nx = ng + nk + np + r + 1;
    let (og, ok, op, oac, oref) = (0, ng, ng + nk, ng + nk + np, ng + nk + np + r);
    let sel_g = selector(og, ng, nx);
    let sel_k = selector(ok, nk, nx);
    let sel_p = selector(op, np, nx);
    let sel_ac = selector(oac, r, nx);
    let rho = case.angle_rate;

    let ident = DMatrix::<f64>::identity(n, n);
    // d = -(C_p x_p + D_p P)
    let d = Lin {
        x: -(&p.c * &sel_p),
        p: -DMatrix::from_diagonal(&p.d),
    };
    // x_ac holds range-space angles in rad (θ̇ = ρ ω), so L_ac θ = Q Λ x_ac
    let q_lambda = &q * DMatrix::from_diagonal(&DVector::from_vec(lambdas));
    let t = Lin {
        x: &q_lambda * &sel_ac,
        p: DMatrix::zeros(n, n),
    };
    let dg = DMatrix::from_diagonal(&g.d);
    let f = &ident + &dg * &lap.l_dc;
    let f_inv = invert_feedthrough(&f, case, &g.d)?;
    let z_rhs = Lin {
        x: &g.c * &sel_g,
        p: DMatrix::zeros(n, n),
    }
    .add(&d.sub(&t).left(&dg));
    let z = z_rhs.left(&f_inv);
    let u = d.sub(&z.left(&lap.l_dc)).sub(&t);
    let cgbg = &g.c * &g.b;
    let zdot = Lin {
        x: &g.c * &g.a * &sel_g,
        p: DMatrix::zeros(n, n),
    }
    .add(&u.left(&cgbg));
    let omega = Lin {
        x: &k.c * &sel_k,
        p: DMatrix::zeros(n, n),
    }
    .add(&z.left(&DMatrix::from_diagonal(&k.d)))
    .add(&zdot.left(&DMatrix::from_diagonal(&k.e)));

    let mut a = DMatrix::zeros(nx, nx);
    let mut b = DMatrix::zeros(nx, n);
    let mut put = |off: usize, lin: Lin| {
        let rows = lin.x.nrows();
        a.view_mut((off, 0), (rows, nx)).copy_from(&lin.x);
        b.view_mut((off, 0), (rows, n)).copy_from(&lin.p);
    };
    put(og, Lin { x: &g.a * &sel_g, p: DMatrix::zeros(ng, n) }.add(&u.left(&g.b)));
    put(ok, Lin { x: &k.a * &sel_k, p: DMatrix::zeros(nk, n) }.add(&z.left(&k.b)));
    put(op, Lin { x: &p.a * &sel_p, p: p.b.clone() });
    put(oac, omega.left(&(q.transpose() * rho)));
    put(oref, omega.left(&DMatrix::from_element(1, n, rho / n as f64)));

    Ok(ClosedLoopModel {
        bus_ids: case.bus_ids(),
        converter: case.buses.iter().map(|b| b.model.is_converter()).collect(),
        a,
        b,
        c_omega: omega.x,
        d_omega: omega.p,
        c_z: z.x,
        d_z: z.p,
        theta_ref: oref,
        angle_rate: rho,
        hz_per_unit: case.hz_per_unit,
    })
}

fn invert_feedthrough(f: &DMatrix<f64>, case: &NetworkCase, dg: &DVector<f64>) -> Result<DMatrix<f64>> {
    let loop_err = || Error::AlgebraicLoop {
        buses: case
            .buses
            .iter()
            .zip(dg.iter())
            .filter(|(_, d)| **d != 0.0)
            .map(|(b, _)| b.id())
            .collect(),
    };
    let sv = f.clone().singular_values();
    if !(sv.min() > 1e-12 * sv.max()) {
        return Err(loop_err());
    }
    f.clone().try_inverse().ok_or_else(loop_err)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenTag {
    Stable,
    /// The reference-angle mode.
    MarginalStructural,
    Marginal,
    Unstable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TaggedEigenvalue {
    pub re: f64,
    pub im: f64,
    pub tag: EigenTag,
}

/// Real part at or below which an eigenvalue counts as stable.
pub const EIGEN_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenAudit {
    pub eigenvalues: Vec<TaggedEigenvalue>,
}

impl EigenAudit {
    pub fn count(&self, tag: EigenTag) -> usize {
        self.eigenvalues.iter().filter(|e| e.tag == tag).count()
    }

    /// Largest real part, excluding the structural zero.
    pub fn max_real_part(&self) -> f64 {
        self.eigenvalues
            .iter()
            .filter(|e| e.tag != EigenTag::MarginalStructural)
            .map(|e| e.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_modulus(&self) -> f64 {
        self.eigenvalues.iter().map(|e| e.re.hypot(e.im)).fold(0.0, f64::max)
    }
}

/// Eigenvalues of the realization. The reference-angle state feeds nothing
/// back, so its zero is split off exactly and tagged as structural.
pub fn eigen_audit(model: &ClosedLoopModel) -> Result<EigenAudit> {
    let keep = model.theta_ref;
    let a = model.a.view((0, 0), (keep, keep)).into_owned();
    let mut eigenvalues: Vec<TaggedEigenvalue> = if keep == 0 {
        Vec::new()
    } else {
        eigenvalues(&a)
            .ok_or(Error::EigenNoConvergence)?
            .iter()
            .map(|z| {
                let tag = if z.re > EIGEN_TOL {
                    EigenTag::Unstable
                } else if z.re >= -EIGEN_TOL {
                    EigenTag::Marginal
                } else {
                    EigenTag::Stable
                };
                TaggedEigenvalue { re: z.re, im: z.im, tag }
            })
            .collect()
    };
    eigenvalues.sort_by(|x, y| y.re.total_cmp(&x.re).then(x.im.total_cmp(&y.im)));
    eigenvalues.insert(
        0,
        TaggedEigenvalue {
            re: 0.0,
            im: 0.0,
            tag: EigenTag::MarginalStructural,
        },
    );
    Ok(EigenAudit { eigenvalues })
}

// ---------------------------------------------------------------------------
// simulation

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationOptions {
    pub t_end: f64,
    pub dt: f64,
    /// Record every `record_every`-th step.
    pub record_every: usize,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        SimulationOptions {
            t_end: 20.0,
            dt: 1e-3,
            record_every: 1,
        }
    }
}

/// Traces abort the simulation beyond this magnitude.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub bus_ids: Vec<BusId>,
    pub converter: Vec<bool>,
    pub time: Vec<f64>,
    /// Rotor/converter frequency deviation per bus, Hz.
    pub freq: Vec<Vec<f64>>,
    /// `z` per bus: stator frequency deviation (p.u. or rad/s) on machine
    /// buses, DC voltage deviation on converter buses.
    pub z: Vec<Vec<f64>>,
    pub f_bar: Vec<f64>,
}

impl SimulationResult {
    /// `f_i - f̄` for bus index `i`.
    pub fn deviation(&self, i: usize) -> Vec<f64> {
        self.freq[i].iter().zip(&self.f_bar).map(|(f, m)| f - m).collect()
    }

    /// `max_i |f_i(t) - f̄(t)|` per sample.
    pub fn spread(&self) -> Vec<f64> {
        (0..self.time.len())
            .map(|k| {
                self.freq
                    .iter()
                    .map(|f| (f[k] - self.f_bar[k]).abs())
                    .fold(0.0, f64::max)
            })
            .collect()
    }

    pub fn sample_at(&self, t: f64) -> usize {
        match self.time.binary_search_by(|v| v.total_cmp(&t)) {
            Ok(i) => i,
            Err(i) if i == 0 => 0,
            Err(i) if i >= self.time.len() => self.time.len() - 1,
            Err(i) => {
                if (self.time[i] - t).abs() < (t - self.time[i - 1]).abs() {
                    i
                } else {
                    i - 1
                }
            }
        }
    }
}

/// Fixed-step trapezoidal integration from rest under the case's load steps.
pub fn simulate(model: &ClosedLoopModel, case: &NetworkCase, opts: &SimulationOptions) -> Result<SimulationResult> {
    if !(opts.dt > 0.0 && opts.t_end > 0.0 && opts.dt.is_finite() && opts.t_end.is_finite()) {
        return Err(Error::InvalidArgument("dt and t_end must be positive".into()));
    }
    let every = opts.record_every.max(1);
    let nx = model.order();
    let n = model.n_buses();
    let dt = opts.dt;
    let lam = eigen_audit(model)?.max_modulus();
    if lam > 0.0 && dt > 0.1 / lam {
        warn!(
            "dt = {dt:e} s does not resolve the fastest mode (|lambda| = {lam:.3e}); recommended dt <= {:.3e}",
            0.1 / lam
        );
    }
    let ident = DMatrix::<f64>::identity(nx, nx);
    let lhs = (&ident - &model.a * (dt / 2.0)).lu();
    let rhs_a = &ident + &model.a * (dt / 2.0);
    let bh = &model.b * (dt / 2.0);

    let steps = (opts.t_end / dt).round() as usize;
    let cap = steps / every + 1;
    let mut res = SimulationResult {
        bus_ids: model.bus_ids.clone(),
        converter: model.converter.clone(),
        time: Vec::with_capacity(cap),
        freq: vec![Vec::with_capacity(cap); n],
        z: vec![Vec::with_capacity(cap); n],
        f_bar: Vec::with_capacity(cap),
    };
    let mut x = DVector::<f64>::zeros(nx);
    let mut p = DVector::from_vec(case.disturbance_at(0.0));
    for step in 0..=steps {
        let t = step as f64 * dt;
        if step > 0 {
            let p_next = DVector::from_vec(case.disturbance_at(t));
            let rhs = &rhs_a * &x + &bh * (&p + &p_next);
            x = lhs.solve(&rhs).ok_or(Error::SingularMatrix)?;
            p = p_next;
        }
        let omega = &model.c_omega * &x + &model.d_omega * &p;
        if let Some((i, v)) = omega
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || v.abs() > DIVERGENCE_LIMIT)
        {
            return Err(Error::SimulationDiverged {
                t,
                bus: model.bus_ids[i],
                value: v.abs(),
            });
        }
        if x.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_LIMIT) {
            let i = omega.iamax();
            return Err(Error::SimulationDiverged {
                t,
                bus: model.bus_ids[i],
                value: x.amax(),
            });
        }
        if step % every == 0 {
            let z = &model.c_z * &x + &model.d_z * &p;
            res.time.push(t);
            let mut mean = 0.0;
            for i in 0..n {
                let f = omega[i] * model.hz_per_unit;
                mean += f;
                res.freq[i].push(f);
                res.z[i].push(z[i]);
            }
            res.f_bar.push(mean / n as f64);
        }
    }
    Ok(res)
}
