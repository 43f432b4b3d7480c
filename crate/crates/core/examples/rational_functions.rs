//! Rational-function algebra: composition by feedback, evaluation on the
//! imaginary axis, the bounded-analytic test and a state-space realization.

use hybridstab::ratfun::{realize, RationalFunction};
use num_complex::Complex64;

fn show(name: &str, f: &RationalFunction) {
    println!("{name}: num {:?} / den {:?}", f.num().coeffs(), f.den().coeffs());
}

fn main() -> hybridstab::Result<()> {
    // PV above its MPP voltage: 1/(C s) in feedback with -k_pv
    let dc_link = RationalFunction::from_coeffs(&[1.0], &[0.0, 1.0])?;
    let pv = RationalFunction::feedback(&dc_link, &RationalFunction::constant(-2.0))?;
    show("1/(s) fed back through -2", &pv);

    // governed machine: (1 + τs) / (Jω₀τ s² + Jω₀ s + k_g)
    let g = RationalFunction::from_coeffs(&[1.0, 3.0], &[20.0, 7.4, 7.4 * 3.0])?;
    show("machine g", &g);
    println!("  g(0) = {:?}", g.limit_at_zero());
    for w in [0.1, 1.0, 10.0] {
        println!("  g(j{w}) = {:.6}", g.eval_jw(w)?);
    }

    let damper = RationalFunction::from_coeffs(&[1.0, 0.05], &[1.0])?;
    let k_inv = damper.inv()?;
    println!("1/(1 + 0.05 s) bounded analytic: {:?}", k_inv.hinf_certificate());
    let unstable = RationalFunction::from_coeffs(&[1.0], &[-1.0, 1.0])?;
    println!("1/(s - 1) bounded analytic: {:?}", unstable.hinf_certificate());

    let ss = realize(&g)?;
    println!("realization of g: {} states", ss.order());
    let s = Complex64::new(0.3, 2.0);
    println!("  g(s) = {:.12}, realization = {:.12}", g.eval(s)?, ss.eval(s)?[(0, 0)]);
    Ok(())
}
