#![allow(dead_code)]

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use reach_codesign::aero::{generate_table, AeroAxes, AeroTable, AircraftParams, SurrogateConfig};
use reach_codesign::flight::{linearize, trim, Design, TrimPoint};
use reach_codesign::lti::LtiSystem;
use reach_codesign::reach::InputBox;

pub fn shipped_table() -> &'static AeroTable {
    static TABLE: OnceLock<AeroTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        generate_table(
            &AeroAxes::uniform(6).unwrap(),
            &AircraftParams::default(),
            &SurrogateConfig::default(),
        )
        .unwrap()
    })
}

pub fn default_design() -> Design {
    Design::new(5.0, 12.0).unwrap()
}

pub fn default_trim() -> TrimPoint {
    let t = shipped_table();
    trim(&default_design(), t, &t.params, 200.0, 0.0).unwrap()
}

pub fn default_model() -> (LtiSystem, InputBox) {
    let t = shipped_table();
    linearize(&default_design(), t, &t.params, &default_trim()).unwrap()
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn unit_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    let v = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    v.normalize()
}

/// Random 4-state, 2-input system with eigenvalues shifted into the open
/// left half-plane.
pub fn random_stable_system(rng: &mut ChaCha8Rng) -> LtiSystem {
    let mut a = gaussian_matrix(rng, 4, 4) * 0.8;
    let shift = a
        .clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let margin = rng.random_range(0.05..0.5);
    if shift > -margin {
        a -= DMatrix::identity(4, 4) * (shift + margin);
    }
    LtiSystem::new(a, gaussian_matrix(rng, 4, 2)).unwrap()
}

/// Random box with the origin strictly inside and unequal half-widths on
/// each side.
pub fn random_asymmetric_box(rng: &mut ChaCha8Rng) -> InputBox {
    let lo: Vec<f64> = (0..2).map(|_| -rng.random_range(0.1..1.5)).collect();
    let hi: Vec<f64> = (0..2).map(|_| rng.random_range(0.1..1.5)).collect();
    InputBox::from_slices(&lo, &hi).unwrap()
}
