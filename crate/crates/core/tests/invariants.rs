//! Sample-wise invariants of the estimators on random polynomials.

use proptest::prelude::*;

use isogeom::estimators::{count_zeros_circle, excursion_volume, lp_norm, sup_norm, Workspace};
use isogeom::manifold::{make_circle_space, make_sphere_space, make_torus_space, EigenspaceSpec};
use isogeom::sampling::{sample_uniform_sphere, SeedPolicy};

fn circle() -> EigenspaceSpec {
    make_circle_space(&[1, 2, 3, 4]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn zero_count_is_scale_invariant(seed in any::<u64>(), t in -0.9f64..0.9, r in prop::sample::select(vec![0.5, 2.0, 10.0])) {
        let spec = circle();
        let ws = Workspace::new(&spec, 256).unwrap();
        let u = sample_uniform_sphere(&spec, SeedPolicy::new(seed, 0));
        let level = t * spec.c();
        let a = count_zeros_circle(&ws, &u, level).unwrap();
        let b = count_zeros_circle(&ws, &u.scaled(r), r * level).unwrap();
        prop_assert_eq!(a, b);
        prop_assert_eq!(a % 2, 0);
    }

    #[test]
    fn excursion_complements_on_the_circle(seed in any::<u64>(), t in -0.9f64..0.9) {
        let spec = circle();
        let ws = Workspace::new(&spec, 256).unwrap();
        let u = sample_uniform_sphere(&spec, SeedPolicy::new(seed, 1));
        let level = t * spec.c();
        let up = excursion_volume(&ws, &u, level).value;
        let down = excursion_volume(&ws, &u.scaled(-1.0), -level).value;
        prop_assert!((up + down - 2.0 * std::f64::consts::PI).abs() < 1e-9);
    }

    #[test]
    fn lp_norms_are_ordered(seed in any::<u64>()) {
        // on a probability measure ‖u‖_a is nondecreasing in a
        let spec = make_torus_space(&[[1, 0], [1, 1]]).unwrap();
        let ws = Workspace::new(&spec, 64).unwrap();
        let u = sample_uniform_sphere(&spec, SeedPolicy::new(seed, 2));
        let norms: Vec<f64> = [1.0, 2.0, 4.0, 8.0].iter().map(|a| lp_norm(&ws, &u, *a).unwrap()).collect();
        for w in norms.windows(2) {
            prop_assert!(w[0] <= w[1] * (1.0 + 1e-9));
        }
        let s = sup_norm(&ws, &u);
        prop_assert!(norms[3] <= s.refined_max * (1.0 + 1e-9));
        prop_assert!(s.grid_max <= s.refined_max && s.refined_max <= s.certified_upper);
        prop_assert!(s.refined_max <= spec.c() * (1.0 + 1e-12));
    }
}

#[test]
fn sphere_excursion_is_monotone_in_the_level() {
    let spec = make_sphere_space(&[2, 3]).unwrap();
    let ws = Workspace::new(&spec, 96).unwrap();
    for seed in 0..4 {
        let u = sample_uniform_sphere(&spec, SeedPolicy::new(21, seed));
        let vals: Vec<f64> = (-8..=8).map(|k| excursion_volume(&ws, &u, 0.25 * f64::from(k)).value).collect();
        for w in vals.windows(2) {
            assert!(w[0] >= w[1] - 1e-12, "{vals:?}");
        }
        assert!(vals[0] <= 4.0 * std::f64::consts::PI + 1e-12);
    }
}
