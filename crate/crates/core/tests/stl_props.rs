mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use stlwalk::stl::{
    parse, robustness, robustness_signal, satisfies, smooth_robustness, Formula, Trace,
};

fn pair(seed: u64) -> (Formula, Trace) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = common::random_formula(&mut rng, 4);
    let t = common::random_trace(&mut rng, &f);
    (f, t)
}

/// Central differences of the smooth robustness with respect to one sample.
fn fd_partial(f: &Formula, trace: &Trace, beta: f64, c: usize, k: usize) -> f64 {
    let h = 1e-6;
    let name = trace.channels()[c].name.clone();
    let eval = |delta: f64| {
        let mut t = trace.clone();
        t.channel_mut(&name).unwrap()[k] += delta;
        smooth_robustness(f, &t, 0, beta).unwrap().value
    };
    (eval(h) - eval(-h)) / (2.0 * h)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn robustness_sign_matches_boolean(seed in any::<u64>()) {
        let (f, t) = pair(seed);
        let rho = robustness(&f, &t, 0).unwrap().value;
        let sat = satisfies(&f, &t, 0).unwrap();
        if rho.abs() > 1e-9 {
            prop_assert_eq!(rho > 0.0, sat, "rho {} for {}", rho, f);
        }
    }

    #[test]
    fn negation_flips_robustness(seed in any::<u64>()) {
        let (f, t) = pair(seed);
        let rho = robustness(&f, &t, 0).unwrap().value;
        let neg = robustness(&Formula::not(f), &t, 0).unwrap().value;
        prop_assert_eq!(neg, -rho);
    }

    #[test]
    fn smooth_robustness_within_bound(seed in any::<u64>(), beta in prop::sample::select(vec![10.0, 30.0, 100.0])) {
        let (f, t) = pair(seed);
        let rho = robustness(&f, &t, 0).unwrap().value;
        let smooth = smooth_robustness(&f, &t, 0, beta).unwrap().value;
        let bound = f.smooth_depth(common::DT) as f64 * (f.max_arity(common::DT) as f64).ln() / beta;
        prop_assert!((smooth - rho).abs() <= bound + 1e-9, "|{} - {}| > {}", smooth, rho, bound);
    }

    #[test]
    fn signal_agrees_with_pointwise(seed in any::<u64>()) {
        let (f, t) = pair(seed);
        let sig = robustness_signal(&f, &t).unwrap();
        let valid = t.len() - f.horizon_steps(common::DT);
        prop_assert!(sig.len() >= valid.min(1));
        for (k, v) in sig.iter().enumerate().take(valid) {
            prop_assert_eq!(*v, robustness(&f, &t, k).unwrap().value);
        }
    }

    #[test]
    fn display_parse_round_trip(seed in any::<u64>()) {
        let (f, t) = pair(seed);
        let text = f.to_string();
        let g = parse(&text).unwrap();
        prop_assert_eq!(&g, &f);
        prop_assert_eq!(robustness(&g, &t, 0).unwrap().value, robustness(&f, &t, 0).unwrap().value);
        prop_assert_eq!(g.to_string(), text);
    }

    #[test]
    fn scaling_trace_and_offsets_keeps_sign(seed in any::<u64>(), s in 0.1f64..10.0) {
        // scaling every channel and every offset by s > 0 scales every atom
        let (f, t) = pair(seed);
        let mut g = f.clone();
        scale_offsets(&mut g, s);
        let mut ts = t.clone();
        for name in common::CHANNELS {
            ts.channel_mut(name).unwrap().iter_mut().for_each(|v| *v *= s);
        }
        let rho = robustness(&f, &t, 0).unwrap().value;
        let rho_s = robustness(&g, &ts, 0).unwrap().value;
        prop_assert!((rho_s - s * rho).abs() <= 1e-9 * (1.0 + rho.abs()) * s.max(1.0));
    }
}

fn scale_offsets(f: &mut Formula, s: f64) {
    match f {
        Formula::Predicate(p) => p.offset *= s,
        Formula::Not(g) | Formula::Always(_, g) | Formula::Eventually(_, g) => scale_offsets(g, s),
        Formula::And(gs) | Formula::Or(gs) => gs.iter_mut().for_each(|g| scale_offsets(g, s)),
        Formula::Until(_, l, r) => {
            scale_offsets(l, s);
            scale_offsets(r, s);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn smooth_gradient_matches_finite_differences(seed in any::<u64>()) {
        let (f, t) = pair(seed);
        let beta = 30.0;
        let sr = smooth_robustness(&f, &t, 0, beta).unwrap();
        for c in 0..t.channels().len() {
            for k in (0..t.len()).step_by(3) {
                let fd = fd_partial(&f, &t, beta, c, k);
                let g = sr.gradient[c][k];
                prop_assert!((g - fd).abs() <= 1e-5 * (1.0 + fd.abs()), "d/d{}[{}]: {} vs {}", c, k, g, fd);
            }
        }
    }
}
