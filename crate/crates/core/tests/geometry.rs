#[macro_use]
mod common;

use pama_core::geometry::*;
use pama_core::{AntennaPose, Error, MediumParams, SphericalAngles, UnitVec3, Vec3};
use std::f64::consts::{FRAC_PI_2, PI, TAU};
use proptest::prelude::*;

fn vec_close(a: Vec3, b: Vec3, tol: f64) {
    assert!((a - b).norm() <= tol, "{:?} vs {:?}", a, b);
}

fn pose(p: [f64; 3], n: [f64; 3]) -> AntennaPose {
    AntennaPose::new(p.into(), UnitVec3::new(n[0], n[1], n[2]).unwrap())
}

const FIG_RX: [f64; 3] = [75.0, -40.0, 50.0];

#[test]
fn spherical_to_cartesian_axes() {
    let pole = spherical_to_cartesian(SphericalAngles { polar: 0.0, azimuthal: 1.234 });
    vec_close(pole.as_vec(), Vec3::new(0.0, 0.0, 1.0), 1e-15);
    let x = spherical_to_cartesian(SphericalAngles { polar: FRAC_PI_2, azimuthal: 0.0 });
    vec_close(x.as_vec(), Vec3::new(1.0, 0.0, 0.0), 1e-15);
    let y = spherical_to_cartesian(SphericalAngles { polar: FRAC_PI_2, azimuthal: FRAC_PI_2 });
    vec_close(y.as_vec(), Vec3::new(0.0, 1.0, 0.0), 1e-15);
}

#[test]
fn cartesian_to_spherical_examples() {
    let a = cartesian_to_spherical(UnitVec3::Z);
    assert_eq!((a.polar, a.azimuthal), (0.0, 0.0));
    let a = cartesian_to_spherical(UnitVec3::X);
    assert_close!(a.polar, FRAC_PI_2, 1e-15);
    assert_close!(a.azimuthal, 0.0, 1e-15);
    let a = cartesian_to_spherical(UnitVec3::new(0.0, -1.0, 0.0).unwrap());
    assert_close!(a.polar, FRAC_PI_2, 1e-15);
    assert_close!(a.azimuthal, 1.5 * PI, 1e-15);
    // south pole keeps the zero-azimuth convention
    let a = cartesian_to_spherical(-UnitVec3::Z);
    assert_eq!((a.polar, a.azimuthal), (PI, 0.0));
}

#[test]
fn emission_angle_examples() {
    let tx = pose([0.0; 3], [0.0, 0.0, 1.0]);
    assert_close!(emission_angle(Vec3::new(0.0, 0.0, 10.0), &tx, false).unwrap(), 0.0, 1e-15);
    assert_close!(emission_angle(Vec3::new(10.0, 0.0, 0.0), &tx, false).unwrap(), FRAC_PI_2, 1e-15);
    let want = (50.0 / 9725f64.sqrt()).acos();
    assert_close!(emission_angle(FIG_RX.into(), &tx, true).unwrap(), want, 1e-14);
    assert_close!(want, 1.039_072_259_536_091, 1e-14);
}

#[test]
fn emission_angle_coincident_points() {
    let tx = pose([1.0, 2.0, 3.0], [0.0, 0.0, 1.0]);
    assert!(matches!(
        emission_angle(Vec3::new(1.0, 2.0, 3.0), &tx, false),
        Err(Error::Domain(_))
    ));
    assert!(emission_angle(Vec3::ZERO, &tx, true).is_err());
}

#[test]
fn receiver_normal_examples() {
    let n = receiver_normal(&pose([0.0, 0.0, 10.0], [1.0, 0.0, 0.0])).unwrap();
    vec_close(n.as_vec(), Vec3::new(0.0, 0.0, 1.0), 1e-15);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let n = receiver_normal(&pose([s, 0.0, s], [0.0, 0.0, 1.0])).unwrap();
    vec_close(n.as_vec(), Vec3::new(1.0, 0.0, 0.0), 1e-15);
    let n = receiver_normal(&pose(FIG_RX, [0.0, 0.0, 1.0])).unwrap();
    vec_close(n.as_vec(), Vec3::new(75.0, -40.0, 0.0) * (1.0 / 85.0), 1e-15);
    assert_close!(n.as_vec().x, 0.8824, 1e-4);
    assert!(matches!(
        receiver_normal(&pose([0.0, 0.0, 5.0], [0.0, 0.0, -1.0])),
        Err(Error::DegenerateGeometry(_))
    ));
}

#[test]
fn incident_angle_examples() {
    assert_close!(incident_angle(&pose([0.0, 0.0, 10.0], [1.0, 0.0, 0.0])).unwrap(), 0.0, 1e-15);
    assert_close!(incident_angle(&pose([0.0, 0.0, 10.0], [0.0, 0.0, 1.0])).unwrap(), FRAC_PI_2, 1e-15);
    let want = (50.0 / 9725f64.sqrt()).asin();
    assert_close!(incident_angle(&pose(FIG_RX, [0.0, 0.0, 1.0])).unwrap(), want, 1e-15);
    assert_close!(want, 0.531_724_067_258_806, 1e-14);
    // downward orientation folds onto the same angle
    assert_close!(incident_angle(&pose(FIG_RX, [0.0, 0.0, -1.0])).unwrap(), want, 1e-15);
    assert!(incident_angle(&pose([0.0; 3], [0.0, 0.0, 1.0])).is_err());
}

#[test]
fn transmitted_angle_examples() {
    let m = MediumParams::default();
    assert_eq!(transmitted_angle(0.0, &m).unwrap(), 0.0);
    assert_close!(transmitted_angle(FRAC_PI_2, &m).unwrap(), PI / 4.0, 1e-15);
    assert_close!(transmitted_angle(PI / 4.0, &m).unwrap(), PI / 6.0, 1e-15);
    let bad = MediumParams { relative_permittivity: 1.0, ..m };
    assert!(matches!(transmitted_angle(0.3, &bad), Err(Error::Config(_))));
}

#[test]
fn polarization_direction_examples() {
    let tx = pose([0.0; 3], [0.0, 0.0, 1.0]);
    let n = polarization_direction(&tx, Vec3::new(7.0, 0.0, 0.0)).unwrap();
    vec_close(n.as_vec(), Vec3::new(0.0, 0.0, 1.0), 1e-15);
    assert_eq!(
        polarization_direction(&tx, Vec3::new(0.0, 0.0, 5.0)),
        Err(Error::DegeneratePolarization)
    );
    let n = polarization_direction(&tx, Vec3::new(1.0, 0.0, 1.0)).unwrap();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    vec_close(n.as_vec(), Vec3::new(-s, 0.0, s), 1e-15);
}

#[test]
fn polarization_matching_angle_examples() {
    let tx = pose([0.0; 3], [0.0, 0.0, 1.0]);
    // observation on x axis: field along z
    assert_close!(polarization_matching_angle(&tx, &pose([9.0, 0.0, 0.0], [0.0, 0.0, 1.0])).unwrap(), 0.0, 1e-15);
    assert_close!(
        polarization_matching_angle(&tx, &pose([9.0, 0.0, 0.0], [0.0, 1.0, 0.0])).unwrap(),
        FRAC_PI_2,
        1e-15
    );
    let rx = pose(FIG_RX, [0.0, 0.0, 1.0]);
    let alpha = polarization_matching_angle(&tx, &rx).unwrap();
    let theta_i = incident_angle(&rx).unwrap();
    assert_close!(alpha, theta_i, 1e-12);
    assert_close!(alpha, 0.531_724_067_258_806, 1e-12);
    let tx_axis = pose([0.0; 3], [75.0, -40.0, 50.0]);
    assert_eq!(
        polarization_matching_angle(&tx_axis, &rx),
        Err(Error::DegeneratePolarization)
    );
}

#[test]
fn wrapped_angles_preserve_direction() {
    for &(t, p) in &[(-0.3, 0.2), (3.5, 1.0), (7.0, -2.0), (PI, 0.0), (-PI, 4.0 * PI)] {
        let raw = spherical_to_cartesian(SphericalAngles { polar: t, azimuthal: p });
        let w = SphericalAngles::wrapped(t, p);
        assert!((0.0..=PI).contains(&w.polar));
        assert!((0.0..TAU).contains(&w.azimuthal));
        vec_close(w.to_unit().as_vec(), raw.as_vec(), 1e-14);
    }
}

fn unit_strategy() -> impl Strategy<Value = UnitVec3> {
    (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
        .prop_filter("nonzero", |(x, y, z)| x * x + y * y + z * z > 1e-4)
        .prop_map(|(x, y, z)| UnitVec3::new(x, y, z).unwrap())
}

fn point_strategy(r: f64) -> impl Strategy<Value = Vec3> {
    (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

proptest! {
    #[test]
    fn round_trip_away_from_poles(polar in 1e-3f64..(PI - 1e-3), az in 0.0f64..TAU) {
        let v = spherical_to_cartesian(SphericalAngles { polar, azimuthal: az });
        let back = cartesian_to_spherical(v);
        prop_assert!((back.to_unit().as_vec() - v.as_vec()).norm() < 1e-10);
        prop_assert!((back.polar - polar).abs() < 1e-10);
        prop_assert!((v.as_vec().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn polarization_direction_is_transverse_unit(n in unit_strategy(), p in point_strategy(200.0)) {
        let tx = AntennaPose::new(Vec3::ZERO, n);
        if let Ok(ne) = polarization_direction(&tx, p) {
            let u = UnitVec3::normalize(p).unwrap().as_vec();
            prop_assert!(ne.as_vec().dot(u).abs() < 1e-12);
            prop_assert!((ne.as_vec().norm() - 1.0).abs() < 1e-12);
            // in the plane of n and p
            prop_assert!(ne.as_vec().dot(n.as_vec().cross(u)).abs() < 1e-12);
        }
    }

    #[test]
    fn receiver_normal_is_orthogonal(n in unit_strategy(), p in point_strategy(200.0)) {
        let rx = AntennaPose::new(p, n);
        if let Ok(nn) = receiver_normal(&rx) {
            prop_assert!(nn.as_vec().dot(n.as_vec()).abs() < 1e-12);
            prop_assert!((nn.as_vec().norm() - 1.0).abs() < 1e-12);
        }
    }

    // Any tx/rx axes lying in one plane with the propagation path give alpha == theta_i.
    #[test]
    fn coplanar_alpha_equals_incident(
        dir in unit_strategy(),
        dist in 10.0f64..150.0,
        a in 0.05f64..(PI - 0.05),
        b in 0.0f64..PI,
        seed_axis in unit_strategy(),
    ) {
        let u = dir.as_vec();
        let perp = u.cross(seed_axis.as_vec());
        prop_assume!(perp.norm() > 1e-2);
        let w = UnitVec3::normalize(perp.cross(u)).unwrap().as_vec();
        let nt = UnitVec3::normalize(u * a.cos() + w * a.sin()).unwrap();
        let nr = UnitVec3::normalize(u * b.cos() + w * b.sin()).unwrap();
        let tx = AntennaPose::new(Vec3::ZERO, nt);
        let rx = AntennaPose::new(u * dist, nr);
        let alpha = polarization_matching_angle(&tx, &rx).unwrap();
        let theta_i = incident_angle(&rx).unwrap();
        // the polarization may point either way along the same line
        let folded = alpha.min(PI - alpha);
        prop_assert!((folded - theta_i).abs() < 1e-9, "alpha {} theta_i {}", alpha, theta_i);
    }

    // Exact and far-field emission angles differ by at most the angle the
    // transmit offset subtends at the observer.
    #[test]
    fn far_field_emission_angle_consistency(
        n in unit_strategy(),
        pt in point_strategy(1.0),
        dir in unit_strategy(),
        dist in 50.0f64..200.0,
    ) {
        let tx = AntennaPose::new(pt, n);
        let p = dir.as_vec() * dist;
        let exact = emission_angle(p, &tx, false).unwrap();
        let far = emission_angle(p, &tx, true).unwrap();
        let bound = (pt.norm() / dist).asin();
        prop_assert!((exact - far).abs() <= bound + 1e-12);
        if pt.norm() <= 0.05 {
            prop_assert!((exact - far).abs() < 1e-3);
        }
    }
}
