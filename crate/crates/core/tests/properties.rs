use std::f64::consts::PI;

use choreo::choreography::{enumerate_resonances, gcd, modular_inverse, rotate, Resonance};
use choreo::error::Error;
use choreo::io::fmt_f64;
use choreo::nbody::{polygon_equilibrium, s_coefficient, vector_field, PhasePoint, SystemConfig, UnfoldingParams};
use proptest::prelude::*;

fn close3(a: [f64; 3], b: [f64; 3], tol: f64) -> bool {
    a.iter().zip(&b).all(|(x, y)| (x - y).abs() <= tol)
}

proptest! {
    #[test]
    fn s_coefficients_are_symmetric_and_periodic(n in 3usize..40, k in 0i64..40) {
        let s = s_coefficient(n, k).unwrap();
        let mirror = s_coefficient(n, n as i64 - k).unwrap();
        let shifted = s_coefficient(n, k + n as i64).unwrap();
        prop_assert!((s - mirror).abs() <= 1e-14 * s.abs().max(1.0));
        prop_assert!((s - shifted).abs() <= 1e-12 * s.abs().max(1.0));
        prop_assert!(s >= 0.0);
    }

    #[test]
    fn gcd_divides_both_arguments(a in -1000i64..1000, b in -1000i64..1000) {
        let g = gcd(a, b);
        prop_assert_eq!(g, gcd(b, a));
        if a == 0 && b == 0 {
            prop_assert_eq!(g, 0);
        } else {
            prop_assert!(g > 0 && a % g == 0 && b % g == 0);
            prop_assert_eq!(gcd(a / g, b / g), 1);
        }
    }

    #[test]
    fn modular_inverse_inverts_units(a in -500i64..500, m in 1i64..200) {
        match modular_inverse(a, m) {
            Ok(inv) => {
                prop_assert_eq!(gcd(a, m), 1);
                prop_assert!((0..m).contains(&inv));
                prop_assert_eq!((a * inv).rem_euclid(m), 1 % m);
            }
            Err(Error::NotCoprime { .. }) => prop_assert!(gcd(a, m) != 1),
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn resonance_fields_are_consistent(n in 3usize..13, k in 1i64..13, ell in 1i64..17, m in 1i64..17) {
        prop_assume!(gcd(ell, m) == 1);
        let config = SystemConfig::polygon(n).unwrap();
        let n = n as i64;
        match Resonance::new(&config, k, ell, m) {
            Ok(res) => {
                prop_assert_eq!((k * ell - m).rem_euclid(n), 0);
                prop_assert_eq!(res.r * n, k * ell - m);
                prop_assert!((0..n * m).contains(&res.k_tilde));
                // k̃ ≡ k (mod n) and k̃ ≡ 0 (mod m)
                prop_assert_eq!((res.k_tilde - k).rem_euclid(n), 0);
                prop_assert_eq!(res.k_tilde.rem_euclid(m), 0);
                let expected = 2.0 * PI / config.frame_freq() * ell as f64 / m as f64;
                prop_assert!((res.period - expected).abs() <= 1e-14 * expected);
                prop_assert_eq!(res.d, gcd(k, n));
            }
            Err(Error::NotChoreography { .. }) => prop_assert!((k * ell - m).rem_euclid(n) != 0),
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn enumerated_resonances_are_sorted_complete_and_inside(
        n in 3usize..13,
        k in 1i64..13,
        lo in 1.0f64..10.0,
        width in 0.0f64..10.0,
        l_max in 1i64..17,
    ) {
        let config = SystemConfig::polygon(n).unwrap();
        let found = enumerate_resonances(&config, k, (lo, lo + width), l_max);
        for w in found.windows(2) {
            prop_assert!(w[0].period <= w[1].period);
        }
        for r in &found {
            prop_assert!(r.period >= lo && r.period <= lo + width);
            prop_assert!(r.ell <= l_max && r.m <= l_max);
        }
        // brute force count over the same box
        let base = 2.0 * PI / config.frame_freq();
        let mut count = 0;
        for ell in 1..=l_max {
            for m in 1..=l_max {
                let t = base * ell as f64 / m as f64;
                if gcd(ell, m) == 1 && (k * ell - m).rem_euclid(n as i64) == 0 && t >= lo && t <= lo + width {
                    count += 1;
                }
            }
        }
        prop_assert_eq!(found.len(), count);
    }

    #[test]
    fn float_text_round_trips_bit_exactly(bits in any::<u64>()) {
        let x = f64::from_bits(bits);
        prop_assume!(x.is_finite());
        let back: f64 = fmt_f64(x).parse().unwrap();
        prop_assert_eq!(back.to_bits(), x.to_bits());
    }

    #[test]
    fn rotations_compose_and_preserve_length(
        a in -10.0f64..10.0,
        b in -10.0f64..10.0,
        p in prop::array::uniform3(-5.0f64..5.0),
    ) {
        let twice = rotate(a, rotate(b, p));
        prop_assert!(close3(twice, rotate(a + b, p), 1e-12));
        let r = rotate(a, p);
        prop_assert!((r[0].hypot(r[1]) - p[0].hypot(p[1])).abs() < 1e-12);
        prop_assert_eq!(r[2], p[2]);
        prop_assert!(close3(rotate(-a, r), p, 1e-12));
    }

    #[test]
    fn polygon_is_an_equilibrium(n in 3usize..25, mu in prop_oneof![Just(0.0), 0.0f64..500.0]) {
        let config = SystemConfig::new(n, mu).unwrap();
        let eq = polygon_equilibrium(&config);
        let f = vector_field(&eq, &config, &UnfoldingParams::default()).unwrap();
        let scale = config.frame_freq().powi(2);
        prop_assert!(f.max_abs() <= 1e-12 * scale, "{}", f.max_abs());
    }

    #[test]
    fn field_commutes_with_rotation_about_the_axis(
        n in 3usize..9,
        angle in -PI..PI,
        seed in prop::collection::vec(-0.1f64..0.1, 6 * 9),
        l in prop::array::uniform3(-0.5f64..0.5),
    ) {
        let config = SystemConfig::new(n, if n % 2 == 0 { 0.0 } else { 3.0 }).unwrap();
        let dim = config.dim();
        let mut data = polygon_equilibrium(&config).into_vec();
        for (x, s) in data.iter_mut().zip(&seed) {
            *x += s;
        }
        let state = PhasePoint::from_vec(&config, data).unwrap();
        let lambdas = UnfoldingParams::new(l[0], l[1], l[2]);
        let rotated = |p: &PhasePoint| {
            let mut out = vec![0.0; dim];
            for s in 0..config.bodies() {
                let q = rotate(angle, p.position(s));
                let v = rotate(angle, p.velocity(s));
                for c in 0..3 {
                    out[config.pos_index(s, c)] = q[c];
                    out[config.vel_index(s, c)] = v[c];
                }
            }
            PhasePoint::from_vec(&config, out).unwrap()
        };
        let lhs = vector_field(&rotated(&state), &config, &lambdas).unwrap();
        let rhs = rotated(&vector_field(&state, &config, &lambdas).unwrap());
        for (a, b) in lhs.as_slice().iter().zip(rhs.as_slice()) {
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()));
        }
    }
}
