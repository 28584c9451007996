//! Pinned counts and densities for the s = 17 reference system.

use std::path::PathBuf;

use num_bigint::BigUint;

use cubquad::counting::{count_n, CountOptions, Method, MixedSystem};
use cubquad::density::{
    chi_p, count_congruence, normalized_count, series_term, singular_series, CongruenceMethod,
    DensityParams,
};
use cubquad::pipeline::generate_system;

// N(P) for P = 1..4; P = 1 and 2 confirmed by plain enumeration, the rest
// by the meet-in-the-middle engine
const PINNED_COUNTS: [u64; 4] = [525, 35_471, 676_369, 6_276_725];

fn fixture() -> MixedSystem {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/reference_system.txt");
    MixedSystem::parse(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn fixture_matches_generator() {
    let sys = fixture();
    assert_eq!(sys, generate_system(1, 2, 17, 7, false).unwrap());
    assert_eq!((sys.r2(), sys.r3(), sys.s()), (1, 2, 17));
    assert_eq!(sys.main_term_exponent(), 9);
    assert!(sys.regime().holds());
}

#[test]
fn unit_box_by_enumeration() {
    let sys = fixture();
    for method in [Method::Naive, Method::Mitm] {
        let rec = count_n(&sys, 1, &CountOptions::with_method(method)).unwrap();
        assert_eq!(rec.count, BigUint::from(PINNED_COUNTS[0]), "{method}");
    }
}

#[test]
fn pinned_counts_small_boxes() {
    let sys = fixture();
    for p in 2..=3u64 {
        let rec = count_n(&sys, p, &CountOptions::default()).unwrap();
        assert_eq!(rec.count, BigUint::from(PINNED_COUNTS[p as usize - 1]), "P={p}");
    }
}

#[test]
fn local_factors_at_small_primes() {
    let sys = fixture();
    let params = DensityParams::default();
    // values from the default truncation, cross-checked below against
    // congruence counts mod p^2
    let want = [(2u64, 1.001_466_8), (3, 0.994_452_7), (5, 1.000_051_4), (7, 1.000_044_5)];
    for (p, value) in want {
        let chi = chi_p(&sys, p, params.i_max, params.work_budget).unwrap();
        assert!((chi.value - value).abs() < 1e-7, "p={p}: {}", chi.value);
        for i in 1..=2u32 {
            let m = count_congruence(&sys, p, i, CongruenceMethod::Convolution, 1e9).unwrap();
            let partial = chi.partials[i as usize - 1];
            assert!((normalized_count(&sys, &m) - partial).abs() < 1e-12, "p={p} i={i}");
        }
    }
    assert_eq!(series_term(&sys, 1).unwrap().value, 1.0);
    let s = singular_series(&sys, 12).unwrap();
    assert!((s.value - 0.996).abs() < 1e-3, "{}", s.value);
}
