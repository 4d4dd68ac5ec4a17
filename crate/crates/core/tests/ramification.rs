mod common;

use common::*;
use thetadiv::curve::build_curve;
use thetadiv::ramification::ramification_census;

#[test]
fn zeros_of_eta_are_the_weierstrass_images() {
    let m = build_curve(&x5_minus_x()).unwrap();
    let census = ramification_census(&m, 45, 1e-4).unwrap();
    assert!(census.cells >= 2000);
    assert_eq!(census.distinct(), 6);
    for z in &census.zeros {
        assert!(z.order >= 1);
        assert!(z.bracket_radius <= 1e-4 && z.weierstrass_distance <= 1e-4, "{z:?}");
    }
    assert!(census.matches_weierstrass(1e-4));
}

#[test]
fn census_on_a_random_curve() {
    let mut rng = rng(21);
    let roots = random_roots(&mut rng, 0.3);
    let m = build_curve(&poly_from_roots(&roots)).unwrap();
    let census = ramification_census(&m, 12, 1e-4).unwrap();
    assert!(census.matches_weierstrass(1e-4), "{census:?}");
}
