//! Damper-winding coefficients from subtransient machine data, and the
//! derivative gain γ = D / b they imply.

use hybridstab::buslib::{damping_coefficient, DamperParams};

fn main() -> hybridstab::Result<()> {
    let base = DamperParams {
        x_leak: 0.114,
        xd_p: 0.104,
        xd_pp: 3.43e-4,
        td_pp: 9.36e-5,
        xq_p: 0.360,
        xq_pp: 7.24e-4,
        tq_pp: 1.17e-4,
        b_stator: 1.0 / (0.114 + 0.16 * 100.0 / 210.0),
    };
    let d = damping_coefficient(&base)?;
    println!("D_d = {:.5e}  D_q = {:.5e}  D = {:.5e}  gamma = {:.5e} s", d.d_d, d.d_q, d.d, d.gamma);

    for scale in [0.5, 1.0, 2.0] {
        let p = DamperParams {
            td_pp: base.td_pp * scale,
            tq_pp: base.tq_pp * scale,
            ..base
        };
        println!("time constants x{scale}: D = {:.5e}", damping_coefficient(&p)?.d);
    }
    Ok(())
}
