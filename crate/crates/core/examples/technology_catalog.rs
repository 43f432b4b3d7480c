//! Every bus technology in the catalog with its bus-level verdicts.

use hybridstab::buslib::{make_bus, params, BusKind, BusParams};
use hybridstab::stability::{check_condition1, FrequencyGrid};

fn catalog() -> Vec<(BusKind, BusParams)> {
    vec![
        (BusKind::SgGovernor, params(&[("j_omega0", 7.4), ("tau", 3.0), ("k_g", 20.0), ("gamma", 0.015)])),
        (BusKind::SyncCondenser, params(&[("j_omega0", 4.0), ("gamma", 0.015)])),
        (BusKind::PvMpp, params(&[("c_dc", 0.5), ("k_omega", 2.0), ("k_p", 0.2)])),
        (BusKind::PvOffMpp, params(&[("c_dc", 0.5), ("k_pv", 1.0), ("k_omega", 2.0), ("k_p", 0.2)])),
        (BusKind::Hvdc, params(&[("c_dc", 0.5), ("k_omega", 2.0), ("k_p", 0.2)])),
        (BusKind::BatteryVsm, params(&[("c_dc", 0.5), ("k_batt", 0.0), ("m_p", 0.05), ("t_vsm", 0.5)])),
        (BusKind::BatteryDroop, params(&[("c_dc", 0.5), ("k_batt", 2.0), ("m_p", 0.05)])),
        (BusKind::GflDroop, params(&[("pll_kp", 50.0), ("pll_ki", 900.0), ("d_droop", 0.05), ("tau_d", 0.02)])),
        (
            BusKind::WindSg,
            params(&[
                ("j_omega0", 6.0),
                ("k_omega_wind", 0.5),
                ("k_beta", 1.0),
                ("k_p_pitch", 2.0),
                ("tau_beta", 0.5),
                ("gamma", 0.01),
            ]),
        ),
    ]
}

fn main() -> hybridstab::Result<()> {
    let grid = FrequencyGrid::default();
    println!("{:<16} {:>6} {:>6} {:>6} {:>12}", "kind", "1.1", "1.2", "1.3", "xi(0)");
    for (i, (kind, p)) in catalog().into_iter().enumerate() {
        let bus = make_bus(i as u32 + 1, kind, &p)?;
        let c1 = check_condition1(&[&bus], &grid);
        let b = &c1.per_bus[0];
        let xi0 = bus.gk_inv().limit_at_zero();
        println!(
            "{:<16} {:>6} {:>6} {:>6} {:>12}",
            kind.name(),
            b.hinf_k_inv.verdict.to_string(),
            b.bounded_g_inv.verdict.to_string(),
            b.positive_xi.verdict.to_string(),
            match xi0.finite() {
                Some(v) => format!("{v:.4}"),
                None => "unbounded".into(),
            }
        );
    }
    Ok(())
}
