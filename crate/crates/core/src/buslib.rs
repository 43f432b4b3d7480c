//! Catalog of bus technologies. Each bus reduces to a pair of scalar
//! transfer functions: `g(s)` from net power deficit to the bus state `z`
//! (DC voltage for converters, damper-free rotor speed for machines) and
//! `k(s)` from `z` to the AC frequency.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ratfun::{Polynomial, RationalFunction};

pub type BusId = u32;

/// Keyed parameter record, as written in case files.
pub type BusParams = BTreeMap<String, f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BusKind {
    /// Synchronous generator with turbine-governor and damper windings.
    SgGovernor,
    /// Synchronous condenser (no prime mover) with damper windings.
    SyncCondenser,
    /// PV with dual-port grid-forming control, tracking the maximum power point.
    PvMpp,
    /// PV with dual-port grid-forming control, operating above the MPP voltage.
    PvOffMpp,
    /// VSC-HVDC terminal with dual-port grid-forming control.
    Hvdc,
    /// Battery with virtual-synchronous-machine control.
    BatteryVsm,
    /// Battery with droop control (VSM with zero virtual inertia).
    BatteryDroop,
    /// Grid-following converter with PLL and frequency droop.
    GflDroop,
    /// Wind turbine generator with pitch control.
    WindSg,
}

impl BusKind {
    pub const ALL: [BusKind; 9] = [
        BusKind::SgGovernor,
        BusKind::SyncCondenser,
        BusKind::PvMpp,
        BusKind::PvOffMpp,
        BusKind::Hvdc,
        BusKind::BatteryVsm,
        BusKind::BatteryDroop,
        BusKind::GflDroop,
        BusKind::WindSg,
    ];

    /// Converter buses may carry DC lines; their load enters unfiltered.
    pub fn is_converter(self) -> bool {
        !self.is_machine()
    }

    pub fn is_machine(self) -> bool {
        matches!(
            self,
            BusKind::SgGovernor | BusKind::SyncCondenser | BusKind::WindSg
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            BusKind::SgGovernor => "sg_governor",
            BusKind::SyncCondenser => "sync_condenser",
            BusKind::PvMpp => "pv_mpp",
            BusKind::PvOffMpp => "pv_off_mpp",
            BusKind::Hvdc => "hvdc",
            BusKind::BatteryVsm => "battery_vsm",
            BusKind::BatteryDroop => "battery_droop",
            BusKind::GflDroop => "gfl_droop",
            BusKind::WindSg => "wind_sg",
        }
    }

    /// Parameters the kind requires, with their sign constraint.
    fn required(self) -> &'static [(&'static str, Sign)] {
        use Sign::*;
        match self {
            BusKind::SgGovernor => &[("j_omega0", Positive), ("tau", NonNegative), ("k_g", NonNegative)],
            BusKind::SyncCondenser => &[("j_omega0", Positive)],
            BusKind::WindSg => &[
                ("j_omega0", Positive),
                ("k_omega_wind", NonNegative),
                ("k_beta", NonNegative),
                ("k_p_pitch", NonNegative),
                ("tau_beta", NonNegative),
            ],
            BusKind::PvMpp | BusKind::Hvdc => {
                &[("c_dc", Positive), ("k_omega", Positive), ("k_p", NonNegative)]
            }
            BusKind::PvOffMpp => &[
                ("c_dc", Positive),
                ("k_pv", Positive),
                ("k_omega", Positive),
                ("k_p", NonNegative),
            ],
            BusKind::BatteryVsm => &[
                ("c_dc", Positive),
                ("k_batt", NonNegative),
                ("m_p", Positive),
                ("t_vsm", NonNegative),
            ],
            BusKind::BatteryDroop => &[("c_dc", Positive), ("k_batt", NonNegative), ("m_p", Positive)],
            BusKind::GflDroop => &[
                ("pll_kp", Positive),
                ("pll_ki", Positive),
                ("d_droop", Positive),
                ("tau_d", Positive),
            ],
        }
    }
}

impl fmt::Display for BusKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy)]
enum Sign {
    Positive,
    NonNegative,
}

const DAMPER_KEYS: [&str; 8] = [
    "x_leak", "xd_p", "xd_pp", "td_pp", "xq_p", "xq_pp", "tq_pp", "b_stator",
];

/// Machine data for the damper-winding coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DamperParams {
    /// Armature leakage reactance.
    pub x_leak: f64,
    pub xd_p: f64,
    pub xd_pp: f64,
    /// d-axis subtransient short-circuit time constant.
    pub td_pp: f64,
    pub xq_p: f64,
    pub xq_pp: f64,
    pub tq_pp: f64,
    /// Stator susceptance between the rotor and stator buses.
    pub b_stator: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampingCoefficients {
    pub d_d: f64,
    pub d_q: f64,
    pub d: f64,
    pub gamma: f64,
}

/// Axis damping coefficients, their average, and the derivative gain
/// `γ = D / b` that multiplies the rate of change of the machine's network
/// power.
pub fn damping_coefficient(p: &DamperParams) -> Result<DampingCoefficients> {
    let fields = [
        ("x_leak", p.x_leak),
        ("xd_p", p.xd_p),
        ("xd_pp", p.xd_pp),
        ("td_pp", p.td_pp),
        ("xq_p", p.xq_p),
        ("xq_pp", p.xq_pp),
        ("tq_pp", p.tq_pp),
        ("b_stator", p.b_stator),
    ];
    for (name, v) in fields {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidDamper(format!("{name} = {v} must be positive")));
        }
    }
    if p.xd_pp > p.xd_p || p.xq_pp > p.xq_p {
        return Err(Error::InvalidDamper(
            "subtransient reactance exceeds transient reactance".into(),
        ));
    }
    let axis = |xt: f64, xst: f64, t: f64| (xt - xst) / (p.x_leak + xt).powi(2) * (xt / xst) * t;
    let d_d = axis(p.xd_p, p.xd_pp, p.td_pp);
    let d_q = axis(p.xq_p, p.xq_pp, p.tq_pp);
    let d = 0.5 * (d_d + d_q);
    Ok(DampingCoefficients {
        d_d,
        d_q,
        d,
        gamma: d / p.b_stator,
    })
}

/// A bus's technology, parameters, and derived transfer functions.
#[derive(Debug, Clone, PartialEq)]
pub struct BusModel {
    id: BusId,
    kind: BusKind,
    params: BusParams,
    g: RationalFunction,
    k: RationalFunction,
    g_inv: RationalFunction,
    k_inv: RationalFunction,
    gk_inv: RationalFunction,
    gamma: Option<f64>,
}

impl BusModel {
    pub fn id(&self) -> BusId {
        self.id
    }

    pub fn kind(&self) -> BusKind {
        self.kind
    }

    pub fn params(&self) -> &BusParams {
        &self.params
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.get(name).copied()
    }

    pub fn g(&self) -> &RationalFunction {
        &self.g
    }

    pub fn k(&self) -> &RationalFunction {
        &self.k
    }

    pub fn g_inv(&self) -> &RationalFunction {
        &self.g_inv
    }

    pub fn k_inv(&self) -> &RationalFunction {
        &self.k_inv
    }

    /// `g⁻¹(s) k⁻¹(s)`, whose real part is the bus damping margin.
    pub fn gk_inv(&self) -> &RationalFunction {
        &self.gk_inv
    }

    /// Damper derivative gain for machine buses.
    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }

    pub fn is_converter(&self) -> bool {
        self.kind.is_converter()
    }

    /// `ξ(s) = Re(g⁻¹(s) k⁻¹(s))`.
    pub fn xi(&self, s: Complex64) -> Result<f64> {
        Ok(self.gk_inv.eval(s)?.re)
    }

    /// Same bus with a different id.
    pub fn with_id(mut self, id: BusId) -> Self {
        self.id = id;
        self
    }
}

/// Free-function form of [`BusModel::xi`].
pub fn bus_xi(bus: &BusModel, s: Complex64) -> Result<f64> {
    bus.xi(s)
}

fn rf(num: &[f64], den: &[f64]) -> Result<RationalFunction> {
    RationalFunction::from_coeffs(num, den)
}

/// Build a bus from its kind and parameter record.
pub fn make_bus(id: BusId, kind: BusKind, params: &BusParams) -> Result<BusModel> {
    let machine_extra: &[&str] = if kind.is_machine() { &DAMPER_KEYS } else { &[] };
    for name in params.keys() {
        let known = kind.required().iter().any(|(n, _)| n == name)
            || (kind.is_machine() && (name == "gamma" || machine_extra.contains(&name.as_str())));
        if !known {
            return Err(Error::UnknownParam {
                bus: id,
                name: name.clone(),
                kind: kind.to_string(),
            });
        }
    }
    let mut vals = BTreeMap::new();
    for &(name, sign) in kind.required() {
        let v = *params.get(name).ok_or_else(|| Error::MissingParam {
            bus: id,
            name: name.to_string(),
        })?;
        check_sign(id, name, v, sign)?;
        vals.insert(name, v);
    }
    let p = |name: &str| vals[name];

    let gamma = if kind.is_machine() {
        Some(resolve_gamma(id, params)?)
    } else {
        None
    };
    let damper_k = |gamma: f64| rf(&[1.0, gamma], &[1.0]);
    let dc_link = |c_dc: f64| rf(&[1.0], &[0.0, c_dc]);

    let (g, k) = match kind {
        BusKind::SgGovernor => {
            let g_sm = rf(&[1.0], &[0.0, p("j_omega0")])?;
            let g_gen = rf(&[-p("k_g")], &[1.0, p("tau")])?;
            (RationalFunction::feedback(&g_sm, &g_gen)?, damper_k(gamma.unwrap())?)
        }
        BusKind::SyncCondenser => (rf(&[1.0], &[0.0, p("j_omega0")])?, damper_k(gamma.unwrap())?),
        BusKind::WindSg => {
            let g_sm = rf(&[1.0], &[0.0, p("j_omega0")])?;
            let pitch = rf(&[-p("k_beta") * p("k_p_pitch")], &[1.0, p("tau_beta")])?;
            let g_gen = RationalFunction::constant(-p("k_omega_wind")).add(&pitch);
            (RationalFunction::feedback(&g_sm, &g_gen)?, damper_k(gamma.unwrap())?)
        }
        BusKind::PvMpp | BusKind::Hvdc => (
            RationalFunction::feedback(&dc_link(p("c_dc"))?, &RationalFunction::constant(0.0))?,
            rf(&[p("k_omega"), p("k_p")], &[1.0])?,
        ),
        BusKind::PvOffMpp => (
            RationalFunction::feedback(&dc_link(p("c_dc"))?, &RationalFunction::constant(-p("k_pv")))?,
            rf(&[p("k_omega"), p("k_p")], &[1.0])?,
        ),
        BusKind::BatteryVsm | BusKind::BatteryDroop => {
            let t = if kind == BusKind::BatteryVsm { p("t_vsm") } else { 0.0 };
            let (c, kb, mp) = (p("c_dc"), p("k_batt"), p("m_p"));
            (
                RationalFunction::feedback(&dc_link(c)?, &RationalFunction::constant(-kb))?,
                rf(&[mp * kb, mp * c], &[1.0, t])?,
            )
        }
        BusKind::GflDroop => {
            let (kp, ki, d, tau_d) = (p("pll_kp"), p("pll_ki"), p("d_droop"), p("tau_d"));
            let pll = Polynomial::new(vec![ki, kp, 1.0]);
            let num = pll.mul(&Polynomial::linear(1.0, tau_d));
            let den = Polynomial::linear(ki * d, kp * d);
            (RationalFunction::new(num, den)?, RationalFunction::constant(1.0))
        }
    };
    let g_inv = g.inv()?;
    let k_inv = k.inv()?;
    let gk_inv = g_inv.mul(&k_inv);
    Ok(BusModel {
        id,
        kind,
        params: params.clone(),
        g,
        k,
        g_inv,
        k_inv,
        gk_inv,
        gamma,
    })
}

fn check_sign(bus: BusId, name: &str, v: f64, sign: Sign) -> Result<()> {
    let (ok, reason) = match sign {
        Sign::Positive => (v > 0.0, "must be positive"),
        Sign::NonNegative => (v >= 0.0, "must be nonnegative"),
    };
    if ok && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParam {
            bus,
            name: name.to_string(),
            value: v,
            reason,
        })
    }
}

fn resolve_gamma(bus: BusId, params: &BusParams) -> Result<f64> {
    if let Some(&g) = params.get("gamma") {
        check_sign(bus, "gamma", g, Sign::NonNegative)?;
        return Ok(g);
    }
    let present = DAMPER_KEYS.iter().filter(|k| params.contains_key(**k)).count();
    if present == 0 {
        return Err(Error::MissingParam {
            bus,
            name: "gamma".into(),
        });
    }
    let get = |name: &str| {
        params.get(name).copied().ok_or_else(|| Error::MissingParam {
            bus,
            name: name.to_string(),
        })
    };
    let damper = DamperParams {
        x_leak: get("x_leak")?,
        xd_p: get("xd_p")?,
        xd_pp: get("xd_pp")?,
        td_pp: get("td_pp")?,
        xq_p: get("xq_p")?,
        xq_pp: get("xq_pp")?,
        tq_pp: get("tq_pp")?,
        b_stator: get("b_stator")?,
    };
    Ok(damping_coefficient(&damper)?.gamma)
}

/// Build a parameter record from name/value pairs.
pub fn params(pairs: &[(&str, f64)]) -> BusParams {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratfun::HinfCertificate;

    fn jw(w: f64) -> Complex64 {
        Complex64::new(0.0, w)
    }

    fn table1_damper() -> DamperParams {
        DamperParams {
            x_leak: 0.114,
            xd_p: 0.104,
            xd_pp: 3.43e-4,
            td_pp: 9.36e-5,
            xq_p: 0.360,
            xq_pp: 7.24e-4,
            tq_pp: 1.17e-4,
            b_stator: 1.0 / 0.114,
        }
    }

    #[test]
    fn table1_d_axis_coefficient() {
        let p = table1_damper();
        // direct evaluation of the d-axis expression, written out term by term
        let gap = 0.104 - 3.43e-4;
        let oracle = gap / (0.114f64 + 0.104).powi(2) * (0.104 / 3.43e-4) * 9.36e-5;
        let d = damping_coefficient(&p).unwrap();
        assert!((d.d_d - oracle).abs() < 1e-15);
        assert!((d.d_d - 6.19e-2).abs() < 5e-5);
        assert!((d.d - 0.5 * (d.d_d + d.d_q)).abs() < 1e-15);
        assert!((d.gamma - d.d * 0.114).abs() < 1e-15);
    }

    #[test]
    fn zero_subtransient_gap_has_no_damping() {
        let mut p = table1_damper();
        p.xd_pp = p.xd_p;
        assert_eq!(damping_coefficient(&p).unwrap().d_d, 0.0);
    }

    #[test]
    fn damping_is_linear_in_time_constant() {
        let p = table1_damper();
        let mut p2 = p;
        p2.td_pp *= 2.0;
        let (a, b) = (damping_coefficient(&p).unwrap(), damping_coefficient(&p2).unwrap());
        assert!((b.d_d - 2.0 * a.d_d).abs() < 1e-15);
    }

    #[test]
    fn damping_monotonicity_finite_differences() {
        let base = table1_damper();
        let h = 1e-6;
        let d0 = damping_coefficient(&base).unwrap().d;
        let mut up = base;
        up.td_pp *= 1.0 + h;
        assert!(damping_coefficient(&up).unwrap().d > d0);
        let mut up = base;
        up.tq_pp *= 1.0 + h;
        assert!(damping_coefficient(&up).unwrap().d > d0);
        let mut up = base;
        up.x_leak *= 1.0 + h;
        assert!(damping_coefficient(&up).unwrap().d < d0);
    }

    #[test]
    fn nonpositive_damper_data_is_rejected() {
        let mut p = table1_damper();
        p.td_pp = 0.0;
        assert!(matches!(damping_coefficient(&p), Err(Error::InvalidDamper(_))));
    }

    #[test]
    fn sg_governor_matches_closed_form() {
        let (jw0, tau, kg, gamma) = (7.4, 3.0, 20.0, 0.05);
        let bus = make_bus(
            1,
            BusKind::SgGovernor,
            &params(&[("j_omega0", jw0), ("tau", tau), ("k_g", kg), ("gamma", gamma)]),
        )
        .unwrap();
        let expect = RationalFunction::from_coeffs(&[1.0, tau], &[kg, jw0, jw0 * tau]).unwrap();
        for w in [0.01, 0.3, 2.0, 40.0] {
            let d = bus.g().eval(jw(w)).unwrap() - expect.eval(jw(w)).unwrap();
            assert!(d.norm() < 1e-12);
        }
        assert!((bus.xi(Complex64::new(0.0, 0.0)).unwrap() - kg).abs() < 1e-12);
        assert_eq!(bus.k(), &RationalFunction::from_coeffs(&[1.0, gamma], &[1.0]).unwrap());
    }

    #[test]
    fn condenser_margin_matches_hand_computation() {
        let bus = make_bus(
            2,
            BusKind::SyncCondenser,
            &params(&[("j_omega0", 1.0), ("gamma", 0.05)]),
        )
        .unwrap();
        for w in [1e-3, 0.5, 3.0, 100.0] {
            let expect = 0.05 * w * w / (1.0 + 0.0025 * w * w);
            assert!((bus.xi(jw(w)).unwrap() - expect).abs() < 1e-12 * (1.0 + expect));
        }
        assert_eq!(bus.gk_inv().limit_at_zero().finite(), Some(0.0));
    }

    #[test]
    fn battery_vsm_product() {
        let (mp, t) = (0.05, 0.2);
        let bus = make_bus(
            3,
            BusKind::BatteryVsm,
            &params(&[("c_dc", 0.8), ("k_batt", 2.0), ("m_p", mp), ("t_vsm", t)]),
        )
        .unwrap();
        let gk = bus.g().mul(bus.k());
        let expect = RationalFunction::from_coeffs(&[mp], &[1.0, t]).unwrap();
        for w in [0.0, 0.3, 2.0, 40.0] {
            let s = jw(w);
            assert!((gk.eval(s).unwrap() - expect.eval(s).unwrap()).norm() < 1e-14);
        }
        assert_eq!(gk.den().degree(), Some(1));
    }

    #[test]
    fn battery_vsm_without_storage_response_loses_bounded_inverse() {
        let bus = make_bus(
            3,
            BusKind::BatteryVsm,
            &params(&[("c_dc", 0.8), ("k_batt", 0.0), ("m_p", 0.05), ("t_vsm", 0.2)]),
        )
        .unwrap();
        assert!(matches!(
            bus.k_inv().hinf_certificate(),
            HinfCertificate::MarginalPole(_)
        ));
    }

    #[test]
    fn wind_at_mpp_is_plain_swing() {
        let bus = make_bus(
            4,
            BusKind::WindSg,
            &params(&[
                ("j_omega0", 5.0),
                ("k_omega_wind", 0.0),
                ("k_beta", 0.0),
                ("k_p_pitch", 3.0),
                ("tau_beta", 0.5),
                ("gamma", 0.01),
            ]),
        )
        .unwrap();
        assert_eq!(bus.g(), &RationalFunction::from_coeffs(&[1.0], &[0.0, 5.0]).unwrap());
    }

    #[test]
    fn dual_port_kinds_have_affine_k() {
        for kind in [BusKind::PvMpp, BusKind::Hvdc] {
            let bus = make_bus(
                5,
                kind,
                &params(&[("c_dc", 1.0), ("k_omega", 2.0), ("k_p", 0.3)]),
            )
            .unwrap();
            assert_eq!(bus.k().num().coeffs(), &[2.0, 0.3]);
            assert_eq!(bus.k().den().coeffs(), &[1.0]);
        }
    }

    #[test]
    fn gfl_has_negative_margin_somewhere() {
        let bus = make_bus(
            6,
            BusKind::GflDroop,
            &params(&[("pll_kp", 10.0), ("pll_ki", 50.0), ("d_droop", 20.0), ("tau_d", 0.05)]),
        )
        .unwrap();
        let worst = (0..400)
            .map(|i| 10f64.powf(-2.0 + 5.0 * i as f64 / 400.0))
            .map(|w| bus.xi(jw(w)).unwrap())
            .fold(f64::INFINITY, f64::min);
        assert!(worst < 0.0);
    }

    #[test]
    fn parameter_errors_name_the_field() {
        let err = make_bus(7, BusKind::SgGovernor, &params(&[("j_omega0", 1.0), ("tau", 1.0)])).unwrap_err();
        assert!(matches!(err, Error::MissingParam { bus: 7, ref name } if name == "k_g"));
        let err = make_bus(
            7,
            BusKind::SyncCondenser,
            &params(&[("j_omega0", -1.0), ("gamma", 0.1)]),
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidParam { ref name, .. } if name == "j_omega0"));
        let err = make_bus(
            7,
            BusKind::Hvdc,
            &params(&[("c_dc", 1.0), ("k_omega", 1.0), ("k_p", 1.0), ("gamma", 0.1)]),
        )
        .unwrap_err();
        assert!(matches!(err, Error::UnknownParam { ref name, .. } if name == "gamma"));
        let err = make_bus(7, BusKind::SyncCondenser, &params(&[("j_omega0", 1.0)])).unwrap_err();
        assert!(matches!(err, Error::MissingParam { ref name, .. } if name == "gamma"));
    }

    #[test]
    fn gamma_from_damper_data() {
        let d = table1_damper();
        let mut p = params(&[("j_omega0", 7.4)]);
        for (k, v) in [
            ("x_leak", d.x_leak),
            ("xd_p", d.xd_p),
            ("xd_pp", d.xd_pp),
            ("td_pp", d.td_pp),
            ("xq_p", d.xq_p),
            ("xq_pp", d.xq_pp),
            ("tq_pp", d.tq_pp),
            ("b_stator", d.b_stator),
        ] {
            p.insert(k.into(), v);
        }
        let bus = make_bus(1, BusKind::SyncCondenser, &p).unwrap();
        assert_eq!(bus.gamma(), Some(damping_coefficient(&d).unwrap().gamma));
        p.remove("tq_pp");
        assert!(matches!(
            make_bus(1, BusKind::SyncCondenser, &p),
            Err(Error::MissingParam { ref name, .. }) if name == "tq_pp"
        ));
    }
}
