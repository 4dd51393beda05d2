use proptest::prelude::*;

use qgfbsde_core::drivers::{truncate_slope, value_bound};
use qgfbsde_core::{
    build_grid, cole_hopf_forward, cole_hopf_inverse, transformed_driver, truncate_scalar, utility_driver,
    GeometricParams, MarketModel, TruncationLevel,
};

fn model(rho: f64, eta: f64) -> MarketModel {
    MarketModel::geometric(&GeometricParams { rho, eta, ..GeometricParams::default() })
}

proptest! {
    #[test]
    fn transformed_driver_has_no_quadratic_term(rho in -0.95f64..0.95, eta in 0.05f64..2.0, t in 0.0f64..1.0,
                                                frac in 0.0f64..1.0, q in -5.0f64..5.0) {
        let m = model(rho, eta);
        let spec = utility_driver(&m).unwrap();
        let lattice = m.default_lattice().unwrap();
        let drv = transformed_driver(&spec, value_bound(&spec, 30.0, 1.0, &lattice), &lattice).unwrap();
        let set = drv.compact();
        let p = set.lower + frac * (set.upper - set.lower);
        let h = 1e-2;
        let f = |q: f64| drv.eval(t, 170.0, p, q).unwrap();
        let (a, b, c) = (f(q + h), f(q), f(q - h));
        let d2 = (a - 2.0 * b + c) / (h * h);
        // only rounding noise of the three evaluations may remain
        let noise = 16.0 * f64::EPSILON * (a.abs() + 2.0 * b.abs() + c.abs()) / (h * h);
        prop_assert!(d2.abs() <= noise + 1e-10, "{} vs {}", d2, noise);
    }

    #[test]
    fn cole_hopf_roundtrip(gamma in prop_oneof![-2.0f64..-0.01, 0.01f64..2.0], y in -3.0f64..3.0, z in -10.0f64..10.0) {
        let (p, q) = cole_hopf_forward(gamma, y, z).unwrap();
        let (y2, z2) = cole_hopf_inverse(gamma, p, q).unwrap();
        prop_assert!((y - y2).abs() <= 1e-12 * (1.0 + y.abs()));
        prop_assert!((z - z2).abs() <= 1e-12 * (1.0 + z.abs()));
    }

    #[test]
    fn truncation_is_bounded_contraction(n in 1u32..16, x in -100.0f64..100.0, y in -100.0f64..100.0) {
        let l = TruncationLevel::new(n).unwrap();
        let (hx, hy) = (truncate_scalar(l, x), truncate_scalar(l, y));
        prop_assert!(hx.abs() <= x.abs().min(n as f64 + 1.0));
        prop_assert!((hx - hy).abs() <= (x - y).abs() + 1e-12);
        prop_assert!((0.0..=1.0).contains(&truncate_slope(l, x)));
        prop_assert_eq!(truncate_scalar(l, -x), -hx);
    }

    #[test]
    fn grid_nodes_are_equidistant(horizon in 0.01f64..10.0, steps in 1usize..500) {
        let g = build_grid(horizon, steps).unwrap();
        let nodes = g.nodes();
        prop_assert_eq!(nodes.len(), steps + 1);
        prop_assert_eq!(nodes[0], 0.0);
        prop_assert_eq!(nodes[steps], horizon);
        for w in nodes.windows(2) {
            prop_assert!((w[1] - w[0] - g.mesh()).abs() <= 1e-12 * horizon);
        }
    }
}

#[test]
fn utility_driver_quadratic_coefficient() {
    for (rho, eta) in [(0.0, 0.3), (0.5, 0.3), (0.9, 1.0)] {
        let spec = utility_driver(&model(rho, eta)).unwrap();
        assert!((spec.gamma() + eta * (1.0 - rho * rho)).abs() < 1e-15);
    }
}
