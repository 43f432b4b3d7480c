#![allow(dead_code)]

use hybridstab::buslib::{make_bus, params, BusId, BusKind, BusParams};
use hybridstab::network::{AcLine, Bus, DcLine, Disturbance, NetworkCase};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn manifest_path(rel: &str) -> String {
    format!("{}/{rel}", env!("CARGO_MANIFEST_DIR"))
}

pub const BUNDLED: [&str; 6] = [
    "ieee9",
    "ieee9_nodamper",
    "hvdc_p2p",
    "dcgrid_coherent",
    "dcgrid_incoherent",
    "gfl_single",
];

pub fn bundled(name: &str) -> String {
    manifest_path(&format!("cases/{name}.case"))
}

fn u(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

/// Realizable catalog kinds with parameters drawn from plausible ranges.
pub fn random_bus(rng: &mut impl Rng, id: BusId, kind: BusKind) -> Bus {
    let p: BusParams = match kind {
        BusKind::SgGovernor => params(&[
            ("j_omega0", u(rng, 2.0, 12.0)),
            ("tau", u(rng, 0.2, 5.0)),
            ("k_g", u(rng, 2.0, 30.0)),
            ("gamma", u(rng, 0.0, 0.08)),
        ]),
        BusKind::SyncCondenser => params(&[("j_omega0", u(rng, 1.0, 8.0)), ("gamma", u(rng, 0.005, 0.08))]),
        BusKind::WindSg => params(&[
            ("j_omega0", u(rng, 2.0, 10.0)),
            ("k_omega_wind", u(rng, 0.0, 2.0)),
            ("k_beta", u(rng, 0.0, 2.0)),
            ("k_p_pitch", u(rng, 0.0, 3.0)),
            ("tau_beta", u(rng, 0.1, 2.0)),
            ("gamma", u(rng, 0.0, 0.08)),
        ]),
        BusKind::PvMpp | BusKind::Hvdc => params(&[
            ("c_dc", u(rng, 0.1, 2.0)),
            ("k_omega", u(rng, 0.5, 5.0)),
            ("k_p", u(rng, 0.0, 1.0)),
        ]),
        BusKind::PvOffMpp => params(&[
            ("c_dc", u(rng, 0.1, 2.0)),
            ("k_pv", u(rng, 0.1, 3.0)),
            ("k_omega", u(rng, 0.5, 5.0)),
            ("k_p", u(rng, 0.0, 1.0)),
        ]),
        BusKind::BatteryVsm => params(&[
            ("c_dc", u(rng, 0.1, 2.0)),
            ("k_batt", u(rng, 0.1, 5.0)),
            ("m_p", u(rng, 0.02, 0.5)),
            ("t_vsm", u(rng, 0.05, 1.0)),
        ]),
        BusKind::BatteryDroop => params(&[
            ("c_dc", u(rng, 0.1, 2.0)),
            ("k_batt", u(rng, 0.1, 5.0)),
            ("m_p", u(rng, 0.02, 0.5)),
        ]),
        BusKind::GflDroop => params(&[
            ("pll_kp", u(rng, 10.0, 80.0)),
            ("pll_ki", u(rng, 100.0, 2000.0)),
            ("d_droop", u(rng, 0.02, 0.1)),
            ("tau_d", u(rng, 0.005, 0.05)),
        ]),
    };
    Bus::new(make_bus(id, kind, &p).unwrap())
}

pub const REALIZABLE: [BusKind; 8] = [
    BusKind::SgGovernor,
    BusKind::SyncCondenser,
    BusKind::WindSg,
    BusKind::PvMpp,
    BusKind::PvOffMpp,
    BusKind::Hvdc,
    BusKind::BatteryVsm,
    BusKind::BatteryDroop,
];

/// Random connected case with `n` buses of mixed realizable kinds. Bus 1
/// is always a governed machine. AC lines form a random spanning tree plus
/// extra chords; converters may additionally be joined by DC lines, in
/// which case some AC tree edges are dropped as long as the union stays
/// connected.
pub fn random_case(rng: &mut impl Rng, n: usize) -> NetworkCase {
    let mut buses = vec![random_bus(rng, 1, BusKind::SgGovernor)];
    for id in 2..=n as BusId {
        let kind = *REALIZABLE.choose(rng).unwrap();
        buses.push(random_bus(rng, id, kind));
    }
    let conv: Vec<BusId> = buses.iter().filter(|b| b.model.is_converter()).map(|b| b.id()).collect();

    let mut dc_lines = Vec::new();
    if conv.len() >= 2 && rng.random_bool(0.7) {
        let mut order = conv.clone();
        order.shuffle(rng);
        let m = rng.random_range(2..=order.len());
        for w in order[..m].windows(2) {
            dc_lines.push(DcLine { from: w[0], to: w[1], g: u(rng, 0.5, 20.0) });
        }
    }

    let mut order: Vec<BusId> = (1..=n as BusId).collect();
    order.shuffle(rng);
    let mut ac_lines = Vec::new();
    for i in 1..n {
        let j = rng.random_range(0..i);
        ac_lines.push(AcLine { from: order[j], to: order[i], b: u(rng, 0.5, 15.0) });
    }
    for _ in 0..rng.random_range(0..=n / 2) {
        let a = rng.random_range(1..=n as BusId);
        let b = rng.random_range(1..=n as BusId);
        if a != b {
            ac_lines.push(AcLine { from: a, to: b, b: u(rng, 0.5, 15.0) });
        }
    }
    // drop some AC edges between DC-connected converters to create
    // AC areas joined only through DC
    if !dc_lines.is_empty() {
        ac_lines.retain(|l| {
            let both_dc = dc_lines.iter().any(|d| d.from == l.from || d.to == l.from)
                && dc_lines.iter().any(|d| d.from == l.to || d.to == l.to);
            !(both_dc && rng.random_bool(0.5))
        });
    }

    let dist_bus = rng.random_range(1..=n as BusId);
    let disturbances = vec![Disturbance { bus: dist_bus, magnitude: u(rng, -0.5, 0.5), time: 0.5 }];

    // retry the AC set if the union graph ended up disconnected
    match NetworkCase::new("random", buses.clone(), ac_lines.clone(), dc_lines.clone(), disturbances.clone()) {
        Ok(c) => c,
        Err(_) => {
            let mut lines = ac_lines;
            for w in order.windows(2) {
                lines.push(AcLine { from: w[0], to: w[1], b: u(rng, 0.5, 15.0) });
            }
            NetworkCase::new("random", buses, lines, dc_lines, disturbances).unwrap()
        }
    }
}

pub fn laplacian(n: usize, edges: &[(usize, usize, f64)]) -> nalgebra::DMatrix<f64> {
    let mut l = nalgebra::DMatrix::zeros(n, n);
    for &(i, j, w) in edges {
        l[(i, i)] += w;
        l[(j, j)] += w;
        l[(i, j)] -= w;
        l[(j, i)] -= w;
    }
    l
}

/// Random connected weighted graph on `n` nodes.
pub fn random_graph(rng: &mut impl Rng, n: usize) -> nalgebra::DMatrix<f64> {
    let mut edges = Vec::new();
    for i in 1..n {
        edges.push((rng.random_range(0..i), i, u(rng, 0.1, 10.0)));
    }
    for _ in 0..rng.random_range(0..=n) {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b {
            edges.push((a, b, u(rng, 0.1, 10.0)));
        }
    }
    laplacian(n, &edges)
}
