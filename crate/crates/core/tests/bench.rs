use std::f64::consts::PI;

use hbplate::bench::{point_load_closed_form, point_load_series, BenchmarkId, BenchmarkSpec, POINT_LOAD_REFERENCE};

// limit of the double series, evaluated to 30 digits with an independent
// arbitrary-precision summation
const LIMIT: f64 = -0.011_600_839_772_211_63;

#[test]
fn closed_form_reaches_series_limit() {
    let u = point_load_closed_form(-1.0, 1_000_001);
    assert!((u - LIMIT).abs() < 1e-16, "{u:.17e}");
    // the published value is a truncated sum
    assert!(((POINT_LOAD_REFERENCE - LIMIT) / LIMIT).abs() < 5e-9);
    assert_eq!(point_load_closed_form(2.0, 1_000_001), -2.0 * u);
}

#[test]
fn double_series_converges_to_closed_form() {
    let mut last = f64::INFINITY;
    for n in [101, 401, 1601] {
        let err = (point_load_series(-1.0, n) - LIMIT).abs();
        assert!(err < last);
        last = err;
    }
    assert!(last / LIMIT.abs() < 1e-5, "{last:e}");
    // one term
    let one = point_load_series(-1.0, 1);
    assert!((one + 1.0 / PI.powi(4)).abs() < 1e-17);
}

#[test]
fn manufactured_loads_match_their_solutions() {
    for id in [BenchmarkId::Smooth, BenchmarkId::Singular, BenchmarkId::Quartic] {
        let rel = BenchmarkSpec::get(id).check_load_consistency(25, 11, 1e-4).unwrap();
        assert!(rel <= 1e-4, "{id}: {rel:e}");
    }
}
