use concave_dl::ConcavePenalty;
use proptest::prelude::*;

fn penalties() -> Vec<ConcavePenalty> {
    vec![
        ConcavePenalty::Identity,
        ConcavePenalty::lq(0.5).unwrap(),
        ConcavePenalty::lq(1.0).unwrap(),
        ConcavePenalty::log(1.0).unwrap(),
        ConcavePenalty::log(0.1).unwrap(),
        ConcavePenalty::capped_l1(1.0).unwrap(),
        ConcavePenalty::scad(1.0, 3.7).unwrap(),
        ConcavePenalty::mcp(1.0, 2.0).unwrap(),
    ]
}

fn any_penalty() -> impl Strategy<Value = ConcavePenalty> {
    prop::sample::select(penalties())
}

/// Points where `g` is not differentiable.
fn kinks(p: &ConcavePenalty) -> Vec<f64> {
    match *p {
        ConcavePenalty::CappedL1 { eps } => vec![eps],
        ConcavePenalty::Scad { lambda, a } => vec![lambda, a * lambda],
        ConcavePenalty::Mcp { lambda, gamma } => vec![gamma * lambda],
        _ => vec![],
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn tangent_line_bounds_g(p in any_penalty(), u in 1e-6f64..50.0, u0 in 1e-6f64..50.0) {
        let bound = p.value(u0).unwrap() + p.supergradient(u0).unwrap() * (u - u0);
        prop_assert!(p.value(u).unwrap() <= bound + 1e-12);
    }

    #[test]
    fn composed_loss_is_majorized(p in any_penalty(), v in 0.0f64..400.0, v0 in 1e-6f64..400.0) {
        let slope = p.loss_supergradient(v0).unwrap();
        let bound = p.loss(v0).unwrap() + slope * (v - v0);
        prop_assert!(p.loss(v).unwrap() <= bound + 1e-10);
    }

    #[test]
    fn supergradient_is_nonnegative(p in any_penalty(), u in 1e-9f64..1e3) {
        prop_assert!(p.supergradient(u).unwrap() >= 0.0);
    }

    #[test]
    fn g_is_non_decreasing_and_concave(p in any_penalty(), u in 1e-6f64..50.0, v in 1e-6f64..50.0, t in 0.0f64..1.0) {
        let (lo, hi) = if u <= v { (u, v) } else { (v, u) };
        prop_assert!(p.value(lo).unwrap() <= p.value(hi).unwrap() + 1e-14);
        let mid = p.value(t * u + (1.0 - t) * v).unwrap();
        let chord = t * p.value(u).unwrap() + (1.0 - t) * p.value(v).unwrap();
        prop_assert!(mid >= chord - 1e-12);
    }

    #[test]
    fn smooth_points_match_central_differences(p in any_penalty(), u in 0.05f64..20.0) {
        let h = 1e-5 * u.max(1.0);
        prop_assume!(kinks(&p).iter().all(|k| (u - k).abs() > 10.0 * h));
        let fd = (p.value(u + h).unwrap() - p.value(u - h).unwrap()) / (2.0 * h);
        let g1 = p.supergradient(u).unwrap();
        prop_assert!((fd - g1).abs() <= 1e-6 * g1.abs().max(1.0), "fd {} vs {}", fd, g1);
    }

    #[test]
    fn weights_decrease_with_residual(r in 1e-8f64..30.0, dr in 0.0f64..30.0) {
        for p in penalties().into_iter().filter(|p| !matches!(p, ConcavePenalty::Identity)) {
            let a = p.weight(r, 1e-8, 1e8).unwrap();
            let b = p.weight(r + dr, 1e-8, 1e8).unwrap();
            prop_assert!(b <= a, "{p}: s({r}) = {a} < s({}) = {b}", r + dr);
        }
    }

    #[test]
    fn descriptor_round_trip(p in any_penalty()) {
        let back: ConcavePenalty = p.to_string().parse().unwrap();
        prop_assert_eq!(back, p);
    }
}

#[test]
fn weight_examples() {
    assert_eq!(ConcavePenalty::Identity.weight(2.0, 1e-8, 1e8).unwrap(), 0.25);
    let log = ConcavePenalty::log(1.0).unwrap();
    assert!((log.weight(1.0, 1e-8, 1e8).unwrap() - 0.25).abs() < 1e-15);
    // cross-check against a finite difference of F at v = 1
    let h = 1e-6;
    let fd = (log.loss(1.0 + h).unwrap() - log.loss(1.0 - h).unwrap()) / (2.0 * h);
    assert!((fd - 0.25).abs() < 1e-8);
    assert_eq!(
        ConcavePenalty::capped_l1(1.0).unwrap().weight(5.0, 1e-8, 1e8).unwrap(),
        0.0
    );
}
