//! Coherency of converters on one DC subnetwork: widen the spread of the
//! converters' derivative gains until the coherency condition breaks.

use hybridstab::buslib::{make_bus, params, BusKind};
use hybridstab::network::{build_laplacians, AcLine, Bus, DcLine, NetworkCase};
use hybridstab::stability::{check_condition2, FrequencyGrid};

fn case(k_p: [f64; 2]) -> hybridstab::Result<NetworkCase> {
    let sg = |id| {
        make_bus(id, BusKind::SgGovernor, &params(&[("j_omega0", 10.0), ("tau", 1.0), ("k_g", 10.0), ("gamma", 0.05)]))
    };
    let conv = |id, kp| make_bus(id, BusKind::Hvdc, &params(&[("c_dc", 1.0), ("k_omega", 1.0), ("k_p", kp)]));
    NetworkCase::new(
        "pair",
        vec![Bus::new(sg(1)?), Bus::new(sg(2)?), Bus::new(conv(3, k_p[0])?), Bus::new(conv(4, k_p[1])?)],
        vec![AcLine { from: 1, to: 3, b: 5.0 }, AcLine { from: 2, to: 4, b: 5.0 }],
        vec![DcLine { from: 3, to: 4, g: 20.0 }],
        vec![],
    )
}

fn main() -> hybridstab::Result<()> {
    let grid = FrequencyGrid::default();
    for spread in [0.0, 0.05, 0.1, 0.2, 0.4, 0.8] {
        let net = case([0.5 - spread / 2.0, 0.5 + spread / 2.0])?;
        let lap = build_laplacians(&net)?;
        let c2 = check_condition2(&net.models(), &lap, &grid);
        let r = &c2.results[2];
        println!(
            "k_p spread {spread:>4}: 2.3 {:<8} margin {:>12.4e} at omega {:.4e}",
            r.verdict.to_string(),
            r.margin.unwrap_or(f64::NAN),
            r.worst_omega.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
