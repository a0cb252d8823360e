mod common;

use common::*;
use nalgebra::DVector;
use reach_codesign::flight::{
    check_trim_regularity, linearize, nonlinear_rhs, physical_input_box, trim, trim_jacobian,
    Design, ELEVATOR_LIMIT,
};
use reach_codesign::Error;

fn design_grid() -> Vec<Design> {
    let mut out = Vec::new();
    for i in 0..5 {
        for j in 0..5 {
            out.push(Design::new(3.0 + i as f64, 10.0 + 2.5 * j as f64).unwrap());
        }
    }
    out
}

#[test]
fn level_trims_are_interior_across_design_box() {
    let table = shipped_table();
    let p = &table.params;
    let phys = physical_input_box();
    for d in design_grid() {
        let t = trim(&d, table, p, 200.0, 0.0).unwrap_or_else(|e| panic!("{d:?}: {e}"));
        assert!(t.residual_norm < 1e-8);
        assert_eq!(t.theta0 - t.alpha0, 0.0);
        assert_eq!(t.q0, 0.0);
        let u = t.inputs();
        assert!(phys.contains(&u) && !phys.on_boundary(&u), "{d:?}");
        let f = nonlinear_rhs(&t.state(), &u, &d, table, p).unwrap();
        assert!(f.rows(0, 3).amax() < 1e-8 && f[3] == 0.0);
        let reg = check_trim_regularity(&trim_jacobian(&d, table, p, &t).unwrap());
        assert!(reg.invertible && reg.condition_number.is_finite(), "{d:?}");
        let (_, bx) = linearize(&d, table, p, &t).unwrap();
        assert!(bx.contains_origin_strictly());
        assert!((bx.upper()[1] - bx.lower()[1] - 2.0 * ELEVATOR_LIMIT).abs() < 1e-12);
    }
}

#[test]
fn linearization_is_second_order_across_design_box() {
    let table = shipped_table();
    let p = &table.params;
    let dx = DVector::from_row_slice(&[2.0, 0.01, 0.01, 0.01]);
    let du = DVector::from_row_slice(&[0.05, 0.01]);
    for d in [Design::new(3.0, 10.0).unwrap(), default_design(), Design::new(7.0, 20.0).unwrap()] {
        let t = trim(&d, table, p, 200.0, 0.0).unwrap();
        let (sys, _) = linearize(&d, table, p, &t).unwrap();
        let f0 = nonlinear_rhs(&t.state(), &t.inputs(), &d, table, p).unwrap();
        let err = |h: f64| {
            let f = nonlinear_rhs(&(t.state() + &dx * h), &(t.inputs() + &du * h), &d, table, p).unwrap();
            (f - &f0 - sys.derivative(&(&dx * h), &(&du * h))).norm()
        };
        for h in [0.4, 0.2] {
            let ratio = err(h) / err(h / 2.0);
            assert!((3.0..=5.0).contains(&ratio), "{d:?} h={h}: {ratio}");
        }
    }
}

#[test]
fn climb_trims_for_the_maneuver() {
    let table = shipped_table();
    let p = &table.params;
    let gamma = 10f64.to_radians();
    for d in [default_design(), Design::new(7.0, 20.0).unwrap(), Design::new(7.0, 10.0).unwrap()] {
        let t = trim(&d, table, p, 190.0, gamma).unwrap();
        assert_eq!(t.theta0 - t.alpha0, gamma);
        assert!(t.dth0 > 0.0 && t.dth0 < 1.0);
        let t2 = trim(&d, table, p, 210.0, 0.0).unwrap();
        assert!(t2.dth0 < t.dth0, "level flight needs less throttle than a climb");
    }
}

#[test]
fn small_planform_cannot_hold_a_steep_climb() {
    let table = shipped_table();
    let err = trim(&Design::new(3.0, 10.0).unwrap(), table, &table.params, 190.0, 10f64.to_radians())
        .unwrap_err();
    assert!(matches!(err, Error::SaturatedTrim { variable: "delta_th", .. }), "{err}");
}

#[test]
fn trim_outside_speed_axis_is_out_of_domain() {
    let table = shipped_table();
    let err = trim(&default_design(), table, &table.params, 320.0, 0.0).unwrap_err();
    assert!(matches!(err, Error::OutOfDomain { axis: "V", .. }));
}

#[test]
fn jacobian_structure_at_default_trim() {
    let table = shipped_table();
    let t = default_trim();
    let j = trim_jacobian(&default_design(), table, &table.params, &t).unwrap();
    assert_eq!(j.row(3).iter().copied().collect::<Vec<_>>(), vec![-1.0, 0.0, 0.0, 1.0]);
    assert!(j[(2, 2)].abs() < 1e-10);
    assert!(j.determinant().abs() > 1e-12);
}

#[test]
fn trim_json_is_flat() {
    let t = default_trim();
    let v: serde_json::Value = serde_json::to_value(t).unwrap();
    for key in ["v0", "alpha0", "q0", "theta0", "dth0", "de0", "gamma0", "residual_norm"] {
        assert!(v[key].is_f64(), "{key}");
    }
}
