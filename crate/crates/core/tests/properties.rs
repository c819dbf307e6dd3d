use proptest::prelude::*;
use qosgame::pcg::{
    finite_k_mf_powers, mf_load, multiclass_utilities, utility_loss_point, ClassSpec,
};
use qosgame::prcg::{network_capacity, phi_star, SystemParams};
use qosgame::{AverageDelaySpec, EfficiencyModel, OutageDelaySpec, RadioEnv, Receiver};

fn m100() -> EfficiencyModel {
    EfficiencyModel::exponential(100).unwrap()
}

proptest! {
    #[test]
    fn psr_inverse_round_trip(g in 0.1f64..20.0) {
        let m = m100();
        let back = m.psr_inverse(m.psr(g).unwrap()).unwrap();
        prop_assert!((back - g).abs() <= 1e-8 * g);
    }

    #[test]
    fn psr_and_inverse_increasing(a in 0.0f64..30.0, d in 1e-3f64..5.0) {
        let m = m100();
        prop_assert!(m.psr(a + d).unwrap() > m.psr(a).unwrap() || m.psr(a).unwrap() == 1.0);
        let (e1, e2) = (m.psr(a + 0.5).unwrap(), m.psr(a + 0.5 + d).unwrap());
        if e1 > 0.0 && e2 < 1.0 && e1 < e2 {
            prop_assert!(m.psr_inverse(e1).unwrap() < m.psr_inverse(e2).unwrap());
        }
    }

    #[test]
    fn rate_constraint_iff_eta_hat_below_one(
        lambda in 0.0f64..500.0,
        d in 1e-3f64..0.5,
        rate in 1e3f64..1e6,
    ) {
        let q = AverageDelaySpec::new(lambda, d).unwrap();
        if let Ok(ok) = q.rate_constraint_ok(rate, 100) {
            prop_assert_eq!(ok, q.eta_hat(rate, 100).is_ok());
        }
    }

    #[test]
    fn receiver_ordering(
        loads in prop::collection::vec(0.005f64..0.1, 1..4),
        betas in prop::collection::vec(0.05f64..0.999, 4),
        ls in prop::collection::vec(1u32..5, 4),
    ) {
        let m = m100();
        let classes: Vec<ClassSpec> = loads
            .iter()
            .enumerate()
            .map(|(i, &a)| {
                let req = OutageDelaySpec::new(ls[i], betas[i]).unwrap();
                ClassSpec::new(a, Some(req), 1e5).unwrap()
            })
            .collect();
        let mf = multiclass_utilities(Receiver::MatchedFilter, &classes, 1.0, 1.0, &m);
        let de = multiclass_utilities(Receiver::Decorrelator, &classes, 1.0, 1.0, &m).unwrap();
        let mmse = multiclass_utilities(Receiver::Mmse, &classes, 1.0, 1.0, &m).unwrap();
        for c in 0..classes.len() {
            prop_assert!(mmse[c] > de[c]);
            if let Ok(mf) = &mf {
                prop_assert!(de[c] > mf[c]);
            }
        }
    }

    #[test]
    fn class_b_ratio_nonincreasing_in_split(s1 in 0.0f64..1.0, s2 in 0.0f64..1.0, alpha in 0.01f64..0.12) {
        let m = m100();
        let a = OutageDelaySpec::new(1, 0.99).unwrap();
        let b = OutageDelaySpec::new(3, 0.9).unwrap();
        let (lo, hi) = if s1 < s2 { (s1, s2) } else { (s2, s1) };
        for rx in [Receiver::MatchedFilter, Receiver::Mmse] {
            let r_lo = utility_loss_point(rx, alpha, lo, Some(&a), Some(&b), &m);
            let r_hi = utility_loss_point(rx, alpha, hi, Some(&a), Some(&b), &m);
            if r_lo.feasible && r_hi.feasible {
                prop_assert!(r_hi.ratio_b.unwrap() <= r_lo.ratio_b.unwrap());
                prop_assert!(r_hi.ratio_a.unwrap() < 1.0);
            }
        }
        let de = utility_loss_point(Receiver::Decorrelator, alpha, hi, Some(&a), Some(&b), &m);
        prop_assert_eq!(de.ratio_b, Some(1.0));
        prop_assert!(de.ratio_a.unwrap() < 1.0);
    }

    #[test]
    fn mf_powers_hit_targets(
        targets in prop::collection::vec(1.0f64..15.0, 1..40),
        gain_seed in 0.1f64..3.0,
        noise in 1e-4f64..10.0,
    ) {
        let n = 512.0;
        prop_assume!(mf_load(&targets, n) < 0.98);
        let gains: Vec<f64> = (0..targets.len()).map(|i| gain_seed * (1.0 + 0.1 * i as f64)).collect();
        let env = RadioEnv::new(noise, gains, n, 1e300).unwrap();
        let p = finite_k_mf_powers(&env, &targets).unwrap();
        for (s, t) in env.sirs(&p).iter().zip(&targets) {
            prop_assert!((s - t).abs() <= 1e-10 * t);
        }
    }

    #[test]
    fn size_monotone(lambda in 1.0f64..1000.0, dl in 0.1f64..50.0, d in 2e-3f64..0.5, dd in 1e-3f64..0.5) {
        let p = SystemParams::new(5e6, 1.0, m100()).unwrap();
        let base = p.user_size(&AverageDelaySpec::new(lambda, d).unwrap());
        let more = p.user_size(&AverageDelaySpec::new(lambda + dl, d).unwrap());
        let looser = p.user_size(&AverageDelaySpec::new(lambda, d + dd).unwrap());
        prop_assert!(more > base);
        prop_assert!(looser < base);
    }

    #[test]
    fn phi_monotone_in_omega_and_bandwidth(w in 1.0f64..1e7, b in 1e3f64..1e8, k in 1.01f64..10.0) {
        let gs = 6.4746;
        prop_assert!(phi_star(w * k, b, gs) > phi_star(w, b, gs));
        prop_assert!(phi_star(w, b * k, gs) < phi_star(w, b, gs));
        let s = phi_star(w, b, gs);
        prop_assert!(s > 0.0 && s < 1.0);
    }

    #[test]
    fn capacity_times_size_below_one(lambda in 0.0f64..5000.0, d in 1e-3f64..1.0) {
        let p = SystemParams::new(5e6, 1.0, m100()).unwrap();
        let q = AverageDelaySpec::new(lambda, d).unwrap();
        let s = p.user_size(&q);
        let k = network_capacity(&q, &p);
        prop_assert!(k >= 1);
        prop_assert!((k as f64) * s < 1.0);
        prop_assert!(((k + 1) as f64) * s >= 1.0);
    }
}
