//! Reduce the 9-bus network to its three rotor buses, as used by the
//! bundled `ieee9.case`: eliminate the load buses 5, 7 and 9, then the
//! stator buses 4, 8 and 6 behind each machine's stator susceptance.
//!
//! Run: cargo run --example ieee9_reduction

use hybridstab::buslib::{damping_coefficient, DamperParams};
use hybridstab::network::reduce_to_rotors;
use nalgebra::DMatrix;

/// 230 kV lines of the MATPOWER `case9` data (series reactance, p.u. on 100 MVA).
const LINES: [(usize, usize, f64); 6] = [
    (4, 5, 0.092),
    (5, 6, 0.17),
    (6, 7, 0.1008),
    (7, 8, 0.072),
    (8, 9, 0.161),
    (9, 4, 0.085),
];

fn main() -> hybridstab::Result<()> {
    // network buses 4..=9 mapped to indices 0..=5
    let mut l = DMatrix::<f64>::zeros(6, 6);
    for (i, j, x) in LINES {
        let (a, b, y) = (i - 4, j - 4, 1.0 / x);
        l[(a, a)] += y;
        l[(b, b)] += y;
        l[(a, b)] -= y;
        l[(b, a)] -= y;
    }
    // machine stator reactance: leakage plus the step-up transformer
    // (0.08 + 0.08 p.u. on 210 MVA) moved to the 100 MVA base
    let x_stator = 0.114 + 0.16 * 100.0 / 210.0;
    let b_stator = 1.0 / x_stator;
    let stator = [4 - 4, 8 - 4, 6 - 4];
    let red = reduce_to_rotors(&l, &stator, &[b_stator; 3])?;

    let damper = damping_coefficient(&DamperParams {
        x_leak: 0.114,
        xd_p: 0.104,
        xd_pp: 3.43e-4,
        td_pp: 9.36e-5,
        xq_p: 0.360,
        xq_pp: 7.24e-4,
        tq_pp: 1.17e-4,
        b_stator,
    })?;
    println!("stator susceptance b = {b_stator}");
    println!(
        "damping D_d = {:.4e}, D_q = {:.4e}, D = {:.4e}, gamma = {:.4e} s",
        damper.d_d, damper.d_q, damper.d, damper.gamma
    );

    println!("\nrotor-bus lines (machine buses 1, 2, 3):");
    for a in 0..3 {
        for b in a + 1..3 {
            println!("  {} - {}: b = {}", a + 1, b + 1, -red.rotor_laplacian[(a, b)]);
        }
    }
    let bus7 = 7 - 4;
    println!("\n0.75 p.u. load step at bus 7 mapped to the rotor buses:");
    for k in 0..3 {
        println!("  bus {}: {}", k + 1, 0.75 * red.load_map[(k, bus7)]);
    }
    let loads = [(5, 0.9), (7, 1.0), (9, 1.25)];
    println!("\nnominal loads mapped to the rotor buses:");
    for k in 0..3 {
        let p: f64 = loads.iter().map(|&(bus, p)| p * red.load_map[(k, bus - 4)]).sum();
        println!("  bus {}: {p}", k + 1);
    }
    Ok(())
}
