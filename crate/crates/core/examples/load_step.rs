//! Load step on the 9-bus system with and without damper windings: the
//! largest deviation of a machine from the average frequency.

use hybridstab::case::Case;
use hybridstab::cli::{simulate_case, Overrides};

fn main() -> hybridstab::Result<()> {
    for name in ["ieee9", "ieee9_nodamper"] {
        let case = Case::load(format!("{}/cases/{name}.case", env!("CARGO_MANIFEST_DIR")))?;
        let res = simulate_case(&case, &Overrides::default())?;
        let spread = res.spread();
        println!("{name}:");
        for t in [1.5, 2.0, 3.0, 4.0, 6.0, 10.0, 20.0] {
            let k = res.sample_at(t);
            println!(
                "  t = {t:>4} s  f_bar = {:>10.6} Hz  max |f_i - f_bar| = {:.3e} Hz",
                res.f_bar[k], spread[k]
            );
        }
    }
    Ok(())
}
