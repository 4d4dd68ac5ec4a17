mod common;

use std::sync::Arc;

use common::*;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use thetadiv::siegel::*;

fn random_gamma12(rng: &mut rand_chacha::ChaCha8Rng, g: usize) -> SymplecticMatrix {
    match rng.gen_range(0..3) {
        0 => SymplecticMatrix::inversion(g),
        1 => {
            let mut b = DMatrix::<i64>::zeros(g, g);
            for i in 0..g {
                b[(i, i)] = 2 * rng.gen_range(-1..=1);
                for j in i + 1..g {
                    let v = rng.gen_range(-2..=2);
                    b[(i, j)] = v;
                    b[(j, i)] = v;
                }
            }
            SymplecticMatrix::translation(&b).unwrap()
        }
        _ => {
            let mut u = DMatrix::<i64>::identity(g, g);
            if g > 1 {
                u[(0, 1)] = rng.gen_range(-2..=2);
            }
            if rng.gen_bool(0.5) {
                u[(0, 0)] = -1;
            }
            SymplecticMatrix::basis_change(&u).unwrap()
        }
    }
}

#[test]
fn action_composes() {
    let mut r = rng(11);
    for case in 0..50 {
        let g = 1 + case % 2;
        let tau = random_tau(&mut r, g);
        let p = random_point(&mut r, &tau);
        let m1 = random_gamma12(&mut r, g);
        let m2 = random_gamma12(&mut r, g);
        let prod = m1.mul(&m2).unwrap();
        let direct = act(&prod, &p).unwrap();
        let nested = act(&m1, &act(&m2, &p).unwrap()).unwrap();
        let scale = 1.0 + cmax(direct.tau.tau());
        assert!(cmax(&(direct.tau.tau() - nested.tau.tau())) <= 1e-10 * scale);
        assert!(cmax(&(&direct.z - &nested.z)) <= 1e-10 * (1.0 + cmax(&direct.z)));
    }
}

#[test]
fn gamma12_is_closed_under_products() {
    let mut r = rng(12);
    for case in 0..100 {
        let g = 1 + case % 2;
        let mut m = random_gamma12(&mut r, g);
        for _ in 0..3 {
            m = m.mul(&random_gamma12(&mut r, g)).unwrap();
        }
        assert!(is_in_gamma12(&m).unwrap());
    }
}

#[test]
fn identity_action_is_trivial() {
    let mut r = rng(13);
    let tau = random_tau(&mut r, 2);
    let p = random_point(&mut r, &tau);
    let q = act(&SymplecticMatrix::identity(2), &p).unwrap();
    assert!(cmax(&(q.tau.tau() - p.tau.tau())) < 1e-15);
    assert!(cmax(&(&q.z - &p.z)) < 1e-15);
}

#[test]
fn near_singular_denominator_is_rejected() {
    // c tau + d = diag(1e-13 i, 1)
    let tau = Arc::new(PeriodMatrix::diagonal(&[c(3.0, 1e-13), c(0.0, 1.0)]).unwrap());
    let blk = |v0: i64, v1: i64| DMatrix::from_row_slice(2, 2, &[v0, 0, 0, v1]);
    let g = SymplecticMatrix::from_blocks(&blk(0, 1), &blk(-1, 0), &blk(1, 0), &blk(-3, 1)).unwrap();
    let p = AbelianPoint::new(DVector::from_element(2, c(0.1, 0.0)), tau).unwrap();
    assert!(matches!(act(&g, &p), Err(thetadiv::Error::IllConditioned(_))));
}

#[test]
fn reduction_output_is_reduced() {
    let mut r = rng(14);
    for case in 0..40 {
        let g = 1 + case % 3;
        let tau = random_tau(&mut r, g);
        // push it far from reduced with a random element
        let mut big = DMatrix::<i64>::identity(g, g);
        if g > 1 {
            big[(1, 0)] = 3;
        }
        let sh = DMatrix::from_fn(g, g, |i, j| ((i + j + case) % 5) as i64 - 2);
        let sh = (&sh + sh.transpose()).map(|v| v);
        let m =
            SymplecticMatrix::translation(&sh).unwrap().mul(&SymplecticMatrix::basis_change(&big).unwrap()).unwrap();
        let (t, _) = act_tau(&m, &tau).unwrap();
        let (red, gamma) = siegel_reduce(&t).unwrap();
        assert!(red.re().abs().max() <= 0.5 + 1e-12);
        let (again, _) = act_tau(&gamma, &t).unwrap();
        assert!(cmax(&(again.tau() - red.tau())) < 1e-9);
    }
}
