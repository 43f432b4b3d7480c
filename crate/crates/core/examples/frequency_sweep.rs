//! Frequency sweep of the closed loop: peak gain and the Hermitian-part
//! bound it is certified by.

use hybridstab::case::Case;
use hybridstab::cli::sweep;
use hybridstab::network::build_laplacians;
use hybridstab::stability::FrequencyGrid;

fn main() -> hybridstab::Result<()> {
    let case = Case::load(concat!(env!("CARGO_MANIFEST_DIR"), "/cases/ieee9.case"))?;
    let lap = build_laplacians(&case.network)?;
    let grid = FrequencyGrid::log_spaced(1e-2, 1e3, 200, 1e-3)?;
    let rows = sweep(&case.network, &lap, &grid)?;
    let peak = rows.iter().max_by(|a, b| a.sigma_max_h.total_cmp(&b.sigma_max_h)).unwrap();
    let floor = rows.iter().min_by(|a, b| a.herm_min_hinv.total_cmp(&b.herm_min_hinv)).unwrap();
    println!("peak sigma_max(H) = {:.6} at omega {:.4} rad/s", peak.sigma_max_h, peak.omega);
    println!(
        "min Hermitian part of H^-1 = {:.6} at omega {:.4} rad/s, bound 1/m = {:.6}",
        floor.herm_min_hinv,
        floor.omega,
        1.0 / floor.herm_min_hinv
    );
    for r in rows.iter().step_by(25) {
        println!("{:>12.4e} {:>12.6} {:>12.6}", r.omega, r.sigma_max_h, r.herm_min_hinv);
    }
    Ok(())
}
