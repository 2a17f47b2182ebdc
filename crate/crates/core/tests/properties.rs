use lsn_core::characteristics::{CharacteristicSolution, MonomerPath};
use lsn_core::initial::InitialDensity;
use lsn_core::kinetics::{make_power_law, Nucleation};
use lsn_core::linear_transport::{Bump, TestFunction};
use lsn_core::reference_oracle::{upwind_solve, GridConfig};
use proptest::prelude::*;

fn flow(alpha: f64, b0: f64, u0: f64) -> CharacteristicSolution {
    let m = make_power_law(1.0, alpha, b0, alpha, Nucleation::constant(0.0)).unwrap();
    let path = MonomerPath::from_fn(|t| b0 + u0 * (1.0 + 0.3 * (2.0 * t).sin()), 0.0, 3.0, 0.05).unwrap();
    CharacteristicSolution::new(m, path).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn forward_backward_round_trip(alpha in 0.0..0.8f64, b0 in 0.0..0.5f64, u0 in 0.5..2.0f64,
                                   s in 0.0..1.5f64, dt in 0.05..1.5f64, lx in -2.0..1.0f64) {
        let cs = flow(alpha, b0, u0);
        let x = 10f64.powf(lx);
        let x1 = cs.x_at(s + dt, s, x).unwrap();
        prop_assert!(x1 > x * 0.999_999, "growth field moved {x} back to {x1}");
        let back = cs.x_at(s, s + dt, x1).unwrap();
        prop_assert!((back - x).abs() <= 1e-7 * (1.0 + x));
    }

    #[test]
    fn sigma_is_nonincreasing(alpha in 0.0..0.8f64, u0 in 0.5..2.0f64, t in 0.5..3.0f64) {
        let cs = flow(alpha, 0.0, u0);
        let xc = cs.x_c(t).unwrap();
        let mut prev = t;
        for k in 1..=8 {
            let x = xc * k as f64 / 8.5;
            let sg = cs.sigma(t, x).unwrap();
            prop_assert!(sg <= prev + 1e-9);
            prop_assert!(sg > 0.0 && sg < t);
            prev = sg;
        }
        prop_assert_eq!(cs.sigma(t, 1.01 * xc + 1e-9).unwrap(), 0.0);
    }

    #[test]
    fn tail_and_moments_agree(c in 0.1..3.0f64, x1 in 0.0..2.0f64, w in 0.1..3.0f64, p in 0.0..2.0f64) {
        let f = InitialDensity::sum(vec![
            InitialDensity::indicator(c, x1, x1 + w).unwrap(),
            InitialDensity::gamma(1.0, p, 1.0, 6.0).unwrap(),
        ]).unwrap();
        prop_assert!((f.tail(0.0) - f.m0()).abs() <= 1e-9 * f.m0());
        let m1 = f.integrate(|x| x);
        prop_assert!((m1 - f.m1()).abs() <= 1e-9 * f.m1());
        prop_assert!(f.tail(x1 + 0.5 * w) >= f.tail(x1 + w));
    }

    #[test]
    fn bump_gradient_bounded_by_c1_norm(tc in -1.0..1.0f64, tr in 0.1..1.0f64, xc in -1.0..3.0f64,
                                        xr in 0.1..2.0f64, amp in -2.0..2.0f64, zt in -1.0..1.0f64, zx in -1.0..1.0f64) {
        let b = Bump { t_center: tc, t_radius: tr, x_center: xc, x_radius: xr, amplitude: amp };
        let (t, x) = (tc + zt * tr, xc + zx * xr);
        let (gt, gx) = b.gradient(t, x);
        prop_assert!(b.value(t, x).abs() + gt.abs() + gx.abs() <= b.c1_norm() * (1.0 + 1e-12));
    }

    #[test]
    fn oracle_conserves_mass(cells in 50usize..400, c in 0.1..1.0f64, n0 in 0.0..0.5f64) {
        let m = make_power_law(1.0, 0.0, 0.0, 0.0, Nucleation::constant(n0)).unwrap();
        let f_in = InitialDensity::indicator(c, 0.5, 1.0).unwrap();
        let grid = GridConfig { x_max: Some(10.0), cells, dt: None, cfl_safety: 0.8 };
        let r = upwind_solve(&m, 2.0, &f_in, &grid, 1.0, &[]).unwrap();
        for i in 0..r.times.len() {
            prop_assert!((r.u[i] + r.m1[i] - 2.0).abs() < 1e-12);
        }
        let last = r.times.len() - 1;
        prop_assert!((r.m0[last] - r.m0[0] - r.inflow + r.outflow_number).abs() < 1e-12);
    }
}
