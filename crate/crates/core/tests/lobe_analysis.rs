use opa_steer::sweep::Scenario;
use opa_steer::*;

fn xy(theta: f64) -> SteeringSpec64 {
    SteeringSpec::in_xy(theta).unwrap()
}

fn at_m(m: f64) -> Scenario<f64> {
    Scenario::standard(201, 0.5, xy(steering_from_m(m, 0.5).unwrap())).unwrap()
}

fn limited(mut s: Scenario<f64>, psi_max: f64, strategy: CompensationStrategy) -> Scenario<f64> {
    s.phase_limit = PhaseLimitSpec::new(psi_max, strategy).unwrap();
    s
}

#[test]
fn integer_m_is_the_worst_case() {
    let spr = |m| limited(at_m(m), 270.0, CompensationStrategy::HalfHalf).evaluate().unwrap().spr;
    let integer = spr(7.0);
    for m in [7.5, 7.25, 7.05] {
        assert!(integer > spr(m), "M={m}");
    }
}

#[test]
fn m14_half_half_lpgl_orders() {
    let r = limited(at_m(14.0), 270.0, CompensationStrategy::HalfHalf).evaluate().unwrap();
    let mut orders: Vec<i64> = r
        .secondary()
        .filter_map(|l| match l.kind {
            LobeKind::Lpgl(o) => Some(o),
            _ => None,
        })
        .collect();
    orders.sort();
    let expect: Vec<i64> = (-7..=7).filter(|&l| l != 1).collect();
    assert_eq!(orders, expect);
}

#[test]
fn compensated_lobes_are_lpgls_above_the_window_floor() {
    let base = at_m(14.0);
    let ideal = base.evaluate().unwrap();
    let floor = ideal.spr * ideal.main().intensity;
    for psi_max in [240.0, 270.0, 300.0, 330.0] {
        for strategy in [
            CompensationStrategy::ReplaceByPsiMax,
            CompensationStrategy::ReplaceBy2Pi,
            CompensationStrategy::HalfHalf,
        ] {
            let r = limited(base.clone(), psi_max, strategy).evaluate().unwrap();
            let threshold = 1e-6 * r.main().intensity;
            for l in r.secondary().filter(|l| l.intensity >= threshold) {
                assert!(
                    matches!(l.kind, LobeKind::Lpgl(_)) || l.intensity <= floor * 1.05,
                    "{psi_max} {strategy:?}: {l:?}"
                );
            }
        }
    }
}

#[test]
fn skip_shifts_the_beam() {
    let s = limited(at_m(14.0), 240.0, CompensationStrategy::Skip);
    match s.evaluate() {
        Ok(r) => assert!(r.main_lobe_angle_error.abs() > 0.1),
        Err(e) => assert!(e.to_string().contains("missteer") || e.to_string().contains("main")),
    }
}

#[test]
fn ideal_double_window_is_below_the_floor() {
    let r = Scenario::standard(201, 0.5, xy(10.0)).unwrap().evaluate().unwrap();
    assert!(r.spr < 1e-3);
    assert!((r.main().angle - 10.0).abs() <= 0.01);
    assert!(r.secondary().all(|l| l.kind == LobeKind::Side));
    let fwhm = r.main_lobe_fwhm.unwrap();
    assert!(fwhm > 0.3 && fwhm < 2.0, "{fwhm}");
}

#[test]
fn exclusion_scales_with_aperture() {
    let w = |n| Scenario::standard(n, 0.5, xy(10.0)).unwrap().exclusion_halfwidth().unwrap();
    let (small, large) = (w(51), w(201));
    assert!(small > 3.0 * large && small < 5.0 * large, "{small} {large}");
}
