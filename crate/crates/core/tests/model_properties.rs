use proptest::prelude::*;
use wsee::model::{ChannelCoeffs, GeneralPowerUser, NetworkInstance, UserLink};

fn network() -> impl Strategy<Value = (NetworkInstance, Vec<f64>)> {
    (1usize..=4).prop_flat_map(|n| {
        (
            prop::collection::vec(1e-3f64..10.0, n * n),
            prop::collection::vec(0.0f64..0.5, n),
            prop::collection::vec(1e-3f64..1.0, n),
            prop::collection::vec(0.0f64..1.0, n),
        )
            .prop_map(move |(omega, phi, noise, p)| {
                let users = vec![UserLink { weight: 1.0 / n as f64, p_max: 1.0, r_min: 0.0, mu: 5.0, p_st: 0.375 }; n];
                let ch = ChannelCoeffs::new(omega, phi, noise).unwrap();
                (NetworkInstance::new(2e6, ch, users).unwrap(), p)
            })
    })
}

proptest! {
    #[test]
    fn sinr_monotone_in_powers((inst, p) in network(), j in 0usize..4, bump in 1e-3f64..0.5) {
        let n = inst.n_users();
        let j = j % n;
        let mut q = p.clone();
        q[j] += bump;
        let before = inst.channel().sinrs(&p);
        let after = inst.channel().sinrs(&q);
        for i in 0..n {
            if i == j {
                prop_assert!(after[i] >= before[i]);
            } else {
                prop_assert!(after[i] <= before[i]);
            }
        }
    }

    #[test]
    fn noiseless_sinr_is_scale_free((inst, p) in network(), c in 1e-3f64..1e3) {
        prop_assume!(p.iter().all(|x| *x > 1e-6));
        let nl = inst.noiseless();
        let scaled: Vec<f64> = p.iter().map(|x| c * x).collect();
        let a = nl.channel().sinrs(&p);
        let b = nl.channel().sinrs(&scaled);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1e-300));
        }
    }

    #[test]
    fn objectives_are_continuous((inst, p) in network(), k in 0usize..4) {
        let k = k % inst.n_users();
        let mut q = p.clone();
        q[k] += 1e-10;
        let (e0, e1) = (inst.wsee(&p).unwrap(), inst.wsee(&q).unwrap());
        let (r0, r1) = (inst.wsr(&p).unwrap(), inst.wsr(&q).unwrap());
        // Lipschitz-type bound: dR/dp <= B / (ln 2 * N_min) per unit power
        let lip = 2e6 / std::f64::consts::LN_2 / 1e-3 * inst.n_users() as f64;
        prop_assert!((r1 - r0).abs() <= lip * 1e-10 + 1e-9 * r0);
        prop_assert!((e1 - e0).abs() <= lip * 1e-10 + 1e-9 * e0.max(1.0));
    }

    #[test]
    fn efficiency_below_static_bound((inst, p) in network()) {
        let rates = inst.rates(&p);
        for (i, ee) in inst.ees(&p).iter().enumerate() {
            prop_assert!(*ee <= rates[i] / inst.users()[i].p_st);
        }
    }

    #[test]
    fn general_consumption_increases_with_rate(p in 0.0f64..1.0, rho in 0.0f64..1e7, d in 1.0f64..1e6,
                                               xi in 1e-9f64..1e-5, delta in 0.05f64..=1.0) {
        let u = GeneralPowerUser { mu: vec![5.0, 0.5], xi, delta, p_st: 0.375 };
        prop_assert!(u.consumed(p, rho + d).unwrap() > u.consumed(p, rho).unwrap());
        prop_assert!(u.efficiency(p, rho + d).unwrap() > u.efficiency(p, rho).unwrap());
    }
}
