use std::f64::consts::PI;

use lhsm_core::bandstructure::*;
use proptest::prelude::*;

fn lattice() -> LatticeParams {
    LatticeParams::default()
}

fn grid_spectrum(params: &LatticeParams, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * n);
    for k in bz_grid(n) {
        out.push(if k == 0.0 {
            f64::INFINITY
        } else {
            omega(k, Band::Upper, params).unwrap()
        });
        out.push(omega(k, Band::Lower, params).unwrap());
    }
    out.sort_by(f64::total_cmp);
    out
}

#[test]
fn realspace_ring_matches_dispersion() {
    for eps in [1.4, 1.0, 2.0] {
        let params = LatticeParams::with_epsilon(eps).unwrap();
        let n = 200;
        let ring = realspace_spectrum(&params, n, Boundary::Periodic).unwrap();
        let band = grid_spectrum(&params, n);
        assert_eq!(ring.len(), band.len());
        let worst = ring
            .iter()
            .zip(&band)
            .filter(|(a, _)| a.is_finite())
            .map(|(a, b)| (a - b).abs() / b)
            .fold(0.0, f64::max);
        assert!(worst < 1e-10, "eps={eps}: {worst:e}");
        assert_eq!(ring.iter().filter(|w| w.is_infinite()).count(), 1);
    }
}

#[test]
fn group_velocity_matches_central_difference() {
    let p = lattice();
    for band in [Band::Upper, Band::Lower] {
        for i in 1..40 {
            let k = 0.1 + (PI - 0.2) * i as f64 / 40.0;
            let h = 1e-5;
            let fd = (omega(k + h, band, &p).unwrap() - omega(k - h, band, &p).unwrap()) / (2.0 * h);
            let vg = group_velocity(k, band, &p).unwrap();
            assert!((vg - fd).abs() < 1e-6, "{band:?} k={k}: {vg} vs {fd}");
        }
    }
}

#[test]
fn reference_group_velocities() {
    let p = lattice();
    let up = group_velocity(PI / 2.0, Band::Upper, &p).unwrap();
    let lo = group_velocity(PI / 2.0, Band::Lower, &p).unwrap();
    assert!((up + 0.669_221).abs() < 1e-6);
    assert!((lo - 0.042_270).abs() < 1e-6);
}

#[test]
fn edge_models_are_fourth_order() {
    let p = lattice();
    for (band, point) in [
        (Band::Upper, EdgePoint::Pi),
        (Band::Lower, EdgePoint::Pi),
        (Band::Lower, EdgePoint::Zero),
    ] {
        let edge = quadratic_band_edge(band, point, &p).unwrap();
        let err = |dk: f64| {
            let k = edge.k0() - dk.copysign(edge.k0() - 0.5);
            (omega(k, band, &p).unwrap() - edge.model(dk)).abs()
        };
        // halving δk must cut the error by 2⁴
        for dk in [0.04, 0.02, 0.01] {
            let ratio = err(dk) / err(0.5 * dk);
            assert!((ratio - 16.0).abs() < 1.0, "{band:?} {point:?} δk={dk}: ratio {ratio}");
        }
    }
}

#[test]
fn gap_opens_monotonically() {
    let mut prev = -1.0;
    for i in 0..20 {
        let eps = 1.0 + i as f64 / 19.0;
        let gap = band_edges(&LatticeParams::with_epsilon(eps).unwrap())
            .unwrap()
            .gap_width;
        assert!(gap > prev);
        prev = gap;
    }
    let closed = band_edges(&LatticeParams::with_epsilon(1.0).unwrap()).unwrap();
    assert!(closed.gap_width.abs() < 1e-12);
}

proptest! {
    #[test]
    fn dispersion_is_even(k in 1e-3..PI, eps in 0.5..3.0f64) {
        let p = LatticeParams::with_epsilon(eps).unwrap();
        for band in [Band::Upper, Band::Lower] {
            let a = omega(k, band, &p).unwrap();
            let b = omega(-k, band, &p).unwrap();
            prop_assert!((a - b).abs() <= 1e-14 * a);
            let va = group_velocity(k, band, &p).unwrap();
            let vb = group_velocity(-k, band, &p).unwrap();
            prop_assert!((va + vb).abs() <= 1e-14 * va.abs().max(1.0));
        }
    }

    #[test]
    fn bands_never_cross(k in 1e-3..PI, eps in 0.5..3.0f64) {
        let p = LatticeParams::with_epsilon(eps).unwrap();
        prop_assert!(omega(k, Band::Upper, &p).unwrap() >= omega(k, Band::Lower, &p).unwrap());
    }
}
