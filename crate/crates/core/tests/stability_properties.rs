mod common;

use hybridstab::buslib::BusKind;
use hybridstab::case::{Case, CaseFile};
use hybridstab::closedloop::{assemble, eigen_audit, freq_response, h_inverse, EigenTag};
use hybridstab::network::build_laplacians;
use hybridstab::stability::{
    certify, certify_with, coherency_quantities, hermitian_part_min, lemma2_bound, proof_matrix, FrequencyGrid,
    Verdict,
};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;

fn cplx(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

fn unit_vector(rng: &mut impl Rng, n: usize) -> DVector<Complex64> {
    let v = DVector::from_fn(n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let norm = v.norm();
    v / Complex64::new(norm, 0.0)
}

/// Orthogonal projector onto the range of a symmetric PSD matrix.
fn range_projector(l: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(l.clone());
    let scale = eig.eigenvalues.amax().max(1.0);
    let n = l.nrows();
    let mut p = DMatrix::zeros(n, n);
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam > 1e-9 * scale {
            let v = eig.eigenvectors.column(k);
            p += &v * v.transpose();
        }
    }
    p
}

fn coarse_grid() -> FrequencyGrid {
    FrequencyGrid::log_spaced(1e-4, 1e4, 600, 1e-3).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn hermitian_witness_bounds_the_gain(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let n = rng.random_range(2..=8usize);
        let case = common::random_case(&mut rng, n);
        let grid = coarse_grid();
        let report = certify_with(&case, &grid).unwrap();
        let Some(witness) = report.witness else { return Ok(()) };
        if witness.herm_min <= 0.0 {
            return Ok(());
        }
        let lap = build_laplacians(&case).unwrap();
        for pt in freq_response(&case, &lap, &grid.omega_points).unwrap() {
            // dense SVD of H against the Hermitian-part bound
            prop_assert!(pt.herm_min_hinv >= witness.herm_min * (1.0 - 1e-12));
            let svd_max = pt.h.clone().singular_values().max();
            prop_assert!(svd_max <= (1.0 / witness.herm_min) * (1.0 + 1e-8), "omega {}", pt.omega);
        }
    }

    #[test]
    fn proof_matrix_definiteness_matches_scalar_tests(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let n = rng.random_range(3..=12usize);
        let case = common::random_case(&mut rng, n);
        let lap = build_laplacians(&case).unwrap();
        if lap.subnetworks.is_empty() {
            return Ok(());
        }
        let buses = case.models();
        for _ in 0..20 {
            let s = Complex64::new(0.0, 10f64.powf(rng.random_range(-3.0..3.0)));
            let c = coherency_quantities(&buses, &lap.subnetworks, s).unwrap();
            let m = proof_matrix(&c, &lap);
            let eig = SymmetricEigen::new(m.clone()).eigenvalues;
            let scale = m.amax().max(1e-300);
            // skip points on the boundary where rounding decides
            if eig.min().abs() <= 1e-9 * scale {
                continue;
            }
            let pd = eig.min() > 0.0;
            let scalar = m[(0, 0)] > 0.0 && m[(1, 1)] > 0.0 && 4.0 * m[(0, 0)] * m[(1, 1)] > (2.0 * m[(0, 1)]).powi(2);
            prop_assert_eq!(pd, scalar);
        }
    }

    #[test]
    fn term_wise_lower_bounds(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let n = rng.random_range(2..=12usize);
        let case = common::random_case(&mut rng, n);
        let lap = build_laplacians(&case).unwrap();
        let buses = case.models();
        let projectors: Vec<DMatrix<f64>> = lap.subnetworks.iter().map(|sub| range_projector(&sub.laplacian)).collect();
        for _ in 0..10 {
            let s = Complex64::new(rng.random_range(0.0..2.0), 10f64.powf(rng.random_range(-2.0..2.0)));
            let x = unit_vector(&mut rng, n);
            let Ok(c) = coherency_quantities(&buses, &lap.subnetworks, s) else { continue };

            // bus term
            let gk: Vec<Complex64> = buses.iter().map(|b| b.gk_inv().eval(s).unwrap()).collect();
            let bus_term: f64 = x.iter().zip(&gk).map(|(xi, g)| (xi.conj() * g * xi).re).sum();
            prop_assert!(bus_term >= c.xi_min - 1e-12 * (1.0 + c.xi_min.abs()));

            // AC term is nonnegative on the closed right half-plane
            let ac = x.dotc(&(cplx(&lap.l_ac) * &x)) * (Complex64::new(case.angle_rate, 0.0) / s);
            prop_assert!(ac.re >= -1e-12 * lap.lambda_ac_max);

            // coherent DC term, when every subnetwork mean has positive real part
            if c.k_bar_inv.iter().all(|k| k.re > 0.0) && !lap.subnetworks.is_empty() {
                let mut dc = 0.0;
                let mut bound = f64::INFINITY;
                let mut proj = DMatrix::<f64>::zeros(n, n);
                for ((sub, kbar), p) in lap.subnetworks.iter().zip(&c.k_bar_inv).zip(&projectors) {
                    dc += kbar.re * x.dotc(&(cplx(&sub.laplacian) * &x)).re;
                    bound = bound.min(kbar.re * sub.lambda_min);
                    proj += p;
                }
                let px = cplx(&proj) * &x;
                prop_assert!(dc >= bound * px.norm_squared() * (1.0 - 1e-9) - 1e-12);
            }

            // deviation cross term through the PSD/diagonal product bound
            for (j, (sub, p)) in lap.subnetworks.iter().zip(&projectors).enumerate() {
                let mut d = vec![Complex64::new(0.0, 0.0); n];
                for &i in &sub.buses {
                    d[i] = buses[i].k_inv().eval(s).unwrap() - c.k_bar_inv[j];
                }
                let px = cplx(p) * &x;
                let check = lemma2_bound(&sub.laplacian, &d, &x, &px).unwrap();
                let direct = {
                    let dx = DVector::from_iterator(n, d.iter().zip(x.iter()).map(|(a, b)| a * b));
                    x.dotc(&(cplx(&sub.laplacian) * dx)).re
                };
                prop_assert!((check.lhs - direct).abs() <= 1e-10 * (1.0 + direct.abs()));
                prop_assert!(check.holds);
                prop_assert!(check.rhs <= px.norm() * lap.lambda_dc_max * c.delta_per_subnetwork[j] * (1.0 + 1e-12) + 1e-15);
            }
        }
    }
}

fn audit_passes(name: &str) {
    let case = Case::load(common::bundled(name)).unwrap();
    let report = certify(&case.network).unwrap();
    assert_eq!(report.verdict, Verdict::Pass, "{name}: {report}");
    let lap = build_laplacians(&case.network).unwrap();
    let audit = eigen_audit(&assemble(&case.network, &lap).unwrap()).unwrap();
    assert_eq!(audit.count(EigenTag::MarginalStructural), 1);
    assert_eq!(audit.count(EigenTag::Unstable), 0);
    assert_eq!(audit.count(EigenTag::Marginal), 0);
    assert!(audit.max_real_part() < -1e-6, "{name}: {}", audit.max_real_part());
}

#[test]
fn bundled_machine_case_passes_with_stable_realization() {
    audit_passes("ieee9");
    audit_passes("ieee9_nodamper");
}

#[test]
fn point_to_point_hvdc_passes_with_stable_realization() {
    audit_passes("hvdc_p2p");
}

#[test]
fn nine_bus_with_condensers_only_fails_average_damping() {
    let case = Case::load(common::bundled("ieee9")).unwrap();
    let mut file: CaseFile = case.file.clone();
    for bus in &mut file.buses {
        bus.kind = BusKind::SyncCondenser;
        bus.params.remove("tau");
        bus.params.remove("k_g");
    }
    let network = file.build().unwrap();
    let report = certify(&network).unwrap();
    assert_eq!(report.verdict, Verdict::Fail);
    assert_eq!(report.condition("1.4").unwrap().verdict, Verdict::Fail);
    for id in ["1.1", "1.2", "1.3"] {
        assert_ne!(report.condition(id).unwrap().verdict, Verdict::Fail, "{id}");
    }
}

#[test]
fn hermitian_part_of_inverse_matches_definition() {
    let case = Case::load(common::bundled("hvdc_p2p")).unwrap();
    let lap = build_laplacians(&case.network).unwrap();
    let mut rng = common::rng(11);
    for _ in 0..20 {
        let s = Complex64::new(0.0, 10f64.powf(rng.random_range(-3.0..3.0)));
        let m = h_inverse(&case.network, &lap, s).unwrap();
        let herm = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
        // smallest Rayleigh quotient over random directions never undercuts it
        let min = hermitian_part_min(&m);
        for _ in 0..20 {
            let x = unit_vector(&mut rng, m.nrows());
            assert!(x.dotc(&(&herm * &x)).re >= min - 1e-12 * (1.0 + min.abs()));
        }
    }
}
