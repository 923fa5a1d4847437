use std::f64::consts::PI;

use lhsm_core::analytics::*;
use lhsm_core::bandstructure::*;
use lhsm_core::hamiltonian::*;
use num_complex::Complex64;
use proptest::prelude::*;

fn upper_edge() -> QuadraticBandEdge {
    quadratic_band_edge(Band::Upper, EdgePoint::Pi, &LatticeParams::default()).unwrap()
}

fn lower_edge() -> QuadraticBandEdge {
    quadratic_band_edge(Band::Lower, EdgePoint::Pi, &LatticeParams::default()).unwrap()
}

proptest! {
    #[test]
    fn markov_rate_has_period_four_at_quarter_zone(d_s in 0u32..40) {
        let p = LatticeParams::default();
        let w = omega(PI / 2.0, Band::Upper, &p).unwrap();
        let a = GiantAtom::new(w, d_s, 1e-4).unwrap();
        let b = GiantAtom::new(w, d_s + 4, 1e-4).unwrap();
        let ga = markov_decay_rate(&p, &a, PI / 2.0, Band::Upper, 2000).unwrap();
        let gb = markov_decay_rate(&p, &b, PI / 2.0, Band::Upper, 2000).unwrap();
        prop_assert!((ga - gb).abs() <= 1e-12 * ga.max(1e-20));
    }

    #[test]
    fn closed_form_self_energy_is_imaginary(x_frac in -0.9..0.9f64, d_s in 0u32..12) {
        let ctx = SelfEnergyContext::at_detuning(upper_edge(), d_s, 1e-4, 0.02, 2000).unwrap();
        let s = Complex64::new(0.0, -x_frac * ctx.detuning);
        let sigma = self_energy(s, &ctx, SelfEnergyMethod::ClosedForm).unwrap();
        prop_assert_eq!(sigma.re, 0.0);
    }
}

/// Near the edge the bound state spans many cells, the part of the
/// Lorentzian outside the zone is negligible and the two methods converge.
#[test]
fn quadrature_approaches_closed_form_near_the_edge() {
    for edge in [upper_edge(), lower_edge()] {
        let detuning = 1e-5;
        let beta = (detuning / edge.alpha).sqrt();
        for target in [0.5, 1.0, 2.0, 5.0] {
            let d_s = (target / beta).round() as u32;
            // weak coupling keeps the pole within Δ₀ of the bare level
            let ctx = SelfEnergyContext::at_detuning(edge, d_s, 1e-6, detuning, 2000).unwrap();
            let pole = solve_bound_state(&ctx, SelfEnergyMethod::ClosedForm).unwrap().pole;
            let a = self_energy(pole, &ctx, SelfEnergyMethod::ClosedForm).unwrap();
            let b = self_energy(pole, &ctx, SelfEnergyMethod::Quadrature).unwrap();
            let rel = (a - b).norm() / b.norm();
            assert!(rel < 0.02, "{:?} d_s={d_s}: {rel}", edge.band);
        }
    }
}

#[test]
fn poles_solve_the_characteristic_equation() {
    let be = band_edges(&LatticeParams::default()).unwrap();
    for edge in [upper_edge(), lower_edge()] {
        for frac in [0.05, 0.2, 0.5] {
            for d_s in 0..=10 {
                let ctx = SelfEnergyContext::at_detuning(edge, d_s, 1e-4, frac * be.gap_width, 2000).unwrap();
                for method in [SelfEnergyMethod::ClosedForm, SelfEnergyMethod::Quadrature] {
                    let r = solve_bound_state(&ctx, method).unwrap();
                    assert!(r.residual < 1e-12, "{method:?} {d_s}: {:e}", r.residual);
                    assert_eq!(r.pole.re, 0.0);
                }
            }
        }
    }
}

#[test]
fn residue_matches_exact_lattice_sum() {
    let p = LatticeParams::default();
    let grid = mode_grid(2000, &p).unwrap();
    let gap = band_edges(&p).unwrap().gap_width;
    for edge in [upper_edge(), lower_edge()] {
        for d_s in [1u32, 2, 5] {
            let ctx = SelfEnergyContext::at_detuning(edge, d_s, 1e-4, 0.2 * gap, 2000).unwrap();
            let model = solve_bound_state(&ctx, SelfEnergyMethod::ClosedForm).unwrap();
            // same characteristic equation with the exact two-band sum
            let h = |x: f64| x - lattice_self_energy(Complex64::new(0.0, -x), &ctx.atom, &grid).im;
            let span = 0.5 * ctx.detuning;
            let x = lhsm_core::numeric::brent(h, -span, span, 1e-20, 300).unwrap();
            let dx = 1e-6 * ctx.detuning;
            let deriv = (lattice_self_energy(Complex64::new(0.0, -(x + dx)), &ctx.atom, &grid)
                - lattice_self_energy(Complex64::new(0.0, -(x - dx)), &ctx.atom, &grid))
                / Complex64::new(0.0, -2.0 * dx);
            let exact = (Complex64::new(1.0, 0.0) + deriv).inv().norm_sqr();
            let rel = (model.steady_population - exact).abs() / exact;
            assert!(
                rel < 0.01,
                "{:?} d_s={d_s}: {} vs {exact}",
                edge.band,
                model.steady_population
            );
        }
    }
}

#[test]
fn exchange_coupling_parity_and_range() {
    let p = LatticeParams::default();
    let mid = band_edges(&p).unwrap().mid_gap();
    let edge = upper_edge();
    let ctx = SelfEnergyContext::new(edge, GiantAtom::new(mid, 3, 1e-4).unwrap(), 2000).unwrap();
    let mut prev = f64::INFINITY;
    for d_q in 4..=14u32 {
        let pair = AtomPair::new(ctx.atom, d_q).unwrap();
        let j = dipole_coupling(&pair, &ctx, SelfEnergyMethod::ClosedForm).unwrap();
        assert_eq!(j.signum(), if d_q % 2 == 0 { -1.0 } else { 1.0 });
        assert!(j.abs() < prev);
        prev = j.abs();
        if d_q >= 3 {
            let next = dipole_coupling(
                &AtomPair::new(ctx.atom, d_q + 1).unwrap(),
                &ctx,
                SelfEnergyMethod::ClosedForm,
            )
            .unwrap();
            assert!(((j / next).abs().ln() - ctx.beta()).abs() < 1e-10);
        }
    }
}

#[test]
fn exchange_closed_form_tracks_quadrature() {
    let p = LatticeParams::default();
    let mid = band_edges(&p).unwrap().mid_gap();
    let ctx = SelfEnergyContext::new(upper_edge(), GiantAtom::new(mid, 3, 1e-4).unwrap(), 2000).unwrap();
    let pair = AtomPair::new(ctx.atom, 6).unwrap();
    let c = dipole_coupling(&pair, &ctx, SelfEnergyMethod::ClosedForm).unwrap();
    let q = dipole_coupling(&pair, &ctx, SelfEnergyMethod::Quadrature).unwrap();
    assert!((c - q).abs() / q.abs() < 0.15, "{c} vs {q}");
}
