mod common;

use common::*;
use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use reach_codesign::lti::{propagate_pwc, TimeGrid};
use reach_codesign::reach::{
    contains, sample_reach_set, InputBox, ReachKernel,
};

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 24,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn asymmetric_box_is_shifted_symmetric_box(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sys = random_stable_system(&mut rng);
        let bx = random_asymmetric_box(&mut rng);
        let grid = TimeGrid::horizon(2.0, 200).unwrap();
        let kernel = ReachKernel::new(&sys, &grid).unwrap();
        let center = bx.center();
        let sym = InputBox::symmetric(&bx.half_range()).unwrap();
        let particular = propagate_pwc(&sys, &DVector::zeros(4), &vec![center; grid.n_steps], &grid)
            .unwrap()
            .final_state()
            .clone();
        for _ in 0..8 {
            let c = unit_vector(&mut rng, 4);
            let p = kernel.extreme_point(&bx, &c).unwrap();
            let q = kernel.extreme_point(&sym, &c).unwrap() + &particular;
            prop_assert!((&p - &q).amax() < 1e-9, "{p} vs {q}");
        }
    }

    #[test]
    fn symmetric_box_gives_centrally_symmetric_extremes(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sys = random_stable_system(&mut rng);
        let r = DVector::from_fn(2, |_, _| rng.random_range(0.1..2.0));
        let bx = InputBox::symmetric(&r).unwrap();
        let grid = TimeGrid::horizon(1.5, 150).unwrap();
        let kernel = ReachKernel::new(&sys, &grid).unwrap();
        for _ in 0..8 {
            let c = unit_vector(&mut rng, 4);
            let p = kernel.extreme_point(&bx, &c).unwrap();
            let m = kernel.extreme_point(&bx, &-&c).unwrap();
            prop_assert!((&p + &m).amax() < 1e-9);
        }
    }

    #[test]
    fn vertex_midpoints_stay_in_hull(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sys = random_stable_system(&mut rng);
        let bx = random_asymmetric_box(&mut rng);
        let grid = TimeGrid::horizon(1.0, 100).unwrap();
        let set = sample_reach_set(&sys, &bx, 24, &grid, seed).unwrap();
        for _ in 0..20 {
            let i = rng.random_range(0..set.vertices.len());
            let j = rng.random_range(0..set.vertices.len());
            let mid = (&set.vertices[i] + &set.vertices[j]) * 0.5;
            prop_assert!(contains(&set, &mid, 1e-6));
        }
    }

    #[test]
    fn longer_horizon_never_shrinks_volume(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sys = random_stable_system(&mut rng);
        let bx = random_asymmetric_box(&mut rng);
        let short = TimeGrid::horizon(1.0, 100).unwrap();
        let long = TimeGrid::horizon(1.5, 150).unwrap();
        let a = sample_reach_set(&sys, &bx, 64, &short, 3).unwrap();
        let b = sample_reach_set(&sys, &bx, 64, &long, 3).unwrap();
        prop_assert_eq!(&a.directions, &b.directions);
        prop_assert!(b.volume().volume >= a.volume().volume - 1e-9);
    }

    #[test]
    fn directions_are_unit_and_vertices_self_consistent(seed in any::<u64>(), k in 5usize..80) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sys = random_stable_system(&mut rng);
        let bx = random_asymmetric_box(&mut rng);
        let set = sample_reach_set(&sys, &bx, k, &TimeGrid::horizon(1.0, 50).unwrap(), seed).unwrap();
        prop_assert_eq!(set.vertices.len(), k);
        for d in &set.directions {
            prop_assert!((d.norm() - 1.0).abs() < 1e-12);
        }
        // midpoint switching is exact only to discretization order
        let scale = set.directions.iter().map(|d| set.vertex_interval_length(d)).fold(0.0, f64::max);
        prop_assert!(set.support_consistency_gap() <= 1e-6 * scale.max(1.0));
    }
}

#[test]
fn random_convex_combinations_are_members() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let sys = random_stable_system(&mut rng);
    let bx = random_asymmetric_box(&mut rng);
    let set = sample_reach_set(&sys, &bx, 40, &TimeGrid::horizon(1.0, 100).unwrap(), 5).unwrap();
    for _ in 0..1000 {
        let w: Vec<f64> = (0..set.vertices.len()).map(|_| rng.random::<f64>().powi(4)).collect();
        let total: f64 = w.iter().sum();
        let x = set
            .vertices
            .iter()
            .zip(&w)
            .fold(DVector::zeros(4), |acc, (v, wi)| acc + v * (wi / total));
        assert!(contains(&set, &x, 1e-6));
    }
}

#[test]
fn surrogate_reach_set_is_full_dimensional() {
    let (sys, bx) = default_model();
    assert!(bx.contains_origin_strictly());
    let set = sample_reach_set(&sys, &bx, 256, &TimeGrid::horizon(2.0, 200).unwrap(), 0).unwrap();
    let hv = set.volume();
    assert!(hv.volume > 0.0 && hv.warning.is_none());
    let centroid = set.vertices.iter().fold(DVector::zeros(4), |a, v| a + v) / 256.0;
    assert!(contains(&set, &centroid, 1e-9));
}

