//! Closed-form and semi-analytic predictions for giant atoms on the
//! metamaterial: Markovian decay rate, band-edge self-energy, bound-state
//! pole and residue, and the gap-mediated exchange coupling of two atoms.
//!
//! Near a band edge the detuning of mode `k0 + δk` from the atom is modelled
//! as `Δ(δk) = σ (Δ₀ + α δk²)`, with `σ = +1` when the band lies above the
//! atom and `σ = -1` when it lies below. Purely imaginary Laplace variables
//! are parametrised as `s = -i x`, so `x` is the dressed-state energy
//! measured from `ω_q`.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bandstructure::{group_velocity, omega, Band, LatticeParams, QuadraticBandEdge};
use crate::error::{invalid, Error, Result};
use crate::hamiltonian::{AtomPair, GiantAtom, ModeGrid};
use crate::numeric::{brent, integrate, richardson2_c};

/// Smallest distance of the resonant wavevector from a band edge (0 or π)
/// for which the Markov formula is evaluated.
pub const MARKOV_EDGE_MARGIN: f64 = 0.1;

/// Wigner-Weisskopf decay rate `Γ = 4 N g² [1 + cos(k_r d_s)] / |v_g(k_r)|`
/// of a giant atom resonant with `band` at `k_r > 0`.
pub fn markov_decay_rate(
    params: &LatticeParams,
    atom: &GiantAtom,
    k_r: f64,
    band: Band,
    n_modes: usize,
) -> Result<f64> {
    atom.validate()?;
    if !(MARKOV_EDGE_MARGIN..=PI - MARKOV_EDGE_MARGIN).contains(&k_r) {
        return Err(Error::MarkovInvalid(format!(
            "k_r = {k_r} is within {MARKOV_EDGE_MARGIN} of a band edge"
        )));
    }
    let resonance = omega(k_r, band, params)?;
    if (resonance - atom.omega_q).abs() > 1e-9 * resonance {
        return Err(Error::MarkovInvalid(format!(
            "omega_q = {} is not resonant with the {} band at k_r (omega = {resonance})",
            atom.omega_q,
            band.name()
        )));
    }
    let vg = group_velocity(k_r, band, params)?;
    let g2 = atom.g * atom.g;
    Ok(4.0 * n_modes as f64 * g2 * (1.0 + (k_r * atom.d_s as f64).cos()) / vg.abs())
}

/// Everything the band-edge formulas need about one atom near one edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfEnergyContext {
    pub edge: QuadraticBandEdge,
    pub atom: GiantAtom,
    /// `Δ₀ = |ω_q − ω_edge| > 0`.
    pub detuning: f64,
    /// Mode count `N` multiplying every lattice sum.
    pub n_modes: usize,
}

impl SelfEnergyContext {
    /// Requires `ω_q` to lie on the gap side of the edge (below a band
    /// minimum, above a band maximum).
    pub fn new(edge: QuadraticBandEdge, atom: GiantAtom, n_modes: usize) -> Result<Self> {
        atom.validate()?;
        if n_modes == 0 {
            return Err(invalid("n_modes", "must be >= 1"));
        }
        let detuning = edge.orientation.sign() * (edge.edge_freq - atom.omega_q);
        if !(detuning > 0.0) {
            return Err(Error::NotInGap {
                omega_q: atom.omega_q,
                edge: format!("{}@{:?}", edge.band.name(), edge.point),
            });
        }
        Ok(Self {
            edge,
            atom,
            detuning,
            n_modes,
        })
    }

    /// Places the atom a distance `detuning` from the edge, on its gap side.
    pub fn at_detuning(edge: QuadraticBandEdge, d_s: u32, g: f64, detuning: f64, n_modes: usize) -> Result<Self> {
        let omega_q = edge.edge_freq - edge.orientation.sign() * detuning;
        Self::new(edge, GiantAtom::new(omega_q, d_s, g)?, n_modes)
    }

    fn sigma(&self) -> f64 {
        self.edge.orientation.sign()
    }

    /// Bound-state inverse length `β = √(Δ₀/α)`.
    pub fn beta(&self) -> f64 {
        (self.detuning / self.edge.alpha).sqrt()
    }

    /// Edge-model detuning of mode `k0 + δk` from the atom.
    pub fn mode_detuning(&self, delta_k: f64) -> f64 {
        self.sigma() * (self.detuning + self.edge.alpha * delta_k * delta_k)
    }

    fn coupling_sq(&self, delta_k: f64) -> f64 {
        let g = self.atom.g;
        2.0 * g * g * (1.0 + (self.atom.d_s as f64 * (self.edge.k0() + delta_k)).cos())
    }

    fn prefactor(&self) -> f64 {
        self.n_modes as f64 / (2.0 * PI)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SelfEnergyMethod {
    /// Numerical integral over `δk ∈ (-π, π)` with the quadratic edge model.
    Quadrature,
    /// Analytic integral of the edge model over the whole real line.
    #[default]
    ClosedForm,
}

const QUAD_REL_TOL: f64 = 1e-13;

fn is_imaginary(s: Complex64, scale: f64) -> bool {
    s.re.abs() <= 1e-12 * s.norm().max(scale)
}

/// Self-energy `Σ(s) = Σ_k |g_k|² / (s + i Δ_k)` near the context's band edge.
pub fn self_energy(s: Complex64, ctx: &SelfEnergyContext, method: SelfEnergyMethod) -> Result<Complex64> {
    if ctx.atom.g == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    match method {
        SelfEnergyMethod::Quadrature => {
            if s.re.abs() <= 1e-14 * (1.0 + s.norm()) {
                let x = -s.im;
                let a = ctx.mode_detuning(0.0);
                let b = ctx.mode_detuning(PI);
                if x >= a.min(b) && x <= a.max(b) {
                    return Err(Error::PoleOnContour);
                }
            }
            let value = integrate(
                |dk| ctx.coupling_sq(dk) / (s + Complex64::new(0.0, ctx.mode_detuning(dk))),
                -PI,
                PI,
                0.0,
                QUAD_REL_TOL,
            )?;
            Ok(value * ctx.prefactor())
        }
        SelfEnergyMethod::ClosedForm => {
            if !is_imaginary(s, ctx.detuning) {
                return Err(invalid("s", "closed form needs a purely imaginary argument"));
            }
            let x = -s.im;
            let sigma = ctx.sigma();
            let a = ctx.detuning - sigma * x;
            if a <= 0.0 {
                return Err(Error::BranchViolation(a));
            }
            let alpha = ctx.edge.alpha;
            let ds = ctx.atom.d_s as f64;
            let ng2 = ctx.n_modes as f64 * ctx.atom.g * ctx.atom.g;
            let interference = 1.0 + (ds * ctx.edge.k0()).cos() * (-ds * (a / alpha).sqrt()).exp();
            Ok(Complex64::new(0.0, -sigma * ng2 / (alpha * a).sqrt() * interference))
        }
    }
}

/// Result of the bound-state search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundStateResult {
    /// Purely imaginary pole `s₀ = -i x₀`.
    pub pole: Complex64,
    /// `|s₀ + Σ(s₀)|`.
    pub residual: f64,
    pub residue: Complex64,
    /// `|Res(s₀)|²`.
    pub steady_population: f64,
    /// `1/β` in superlattice periods.
    pub bound_length: f64,
    /// More than one sign change was found on the search bracket; the root
    /// closest to `x = 0` is reported.
    pub ambiguous: bool,
}

impl BoundStateResult {
    /// Dressed-state energy `x₀` relative to `ω_q`.
    pub fn energy(&self) -> f64 {
        -self.pole.im
    }
}

/// `x + S(x)` where `Σ(-i x) = -i S(x)`.
fn pole_function(x: f64, ctx: &SelfEnergyContext, method: SelfEnergyMethod) -> Result<f64> {
    let s = Complex64::new(0.0, -x);
    let sigma = self_energy(s, ctx, method)?;
    Ok(x - sigma.im)
}

const BRACKET_SCAN: usize = 32;

/// Solves `s + Σ(s) = 0` on the imaginary axis.
///
/// The dressed level is repelled from the band, so the root lies between
/// `x = 0` and `x = -S(0)` on the side of `ω_q` away from the edge.
pub fn bound_state_pole(ctx: &SelfEnergyContext, method: SelfEnergyMethod) -> Result<(Complex64, bool)> {
    let s0 = pole_function(0.0, ctx, method)?;
    if s0 == 0.0 {
        return Ok((Complex64::new(0.0, 0.0), false));
    }
    let far = -s0 * (1.0 + 1e-6);
    let eval = |x: f64| pole_function(x, ctx, method);
    let mut roots = Vec::new();
    let mut prev_x = 0.0;
    let mut prev_f = s0;
    for i in 1..=BRACKET_SCAN {
        let x = far * i as f64 / BRACKET_SCAN as f64;
        let f = eval(x)?;
        if f == 0.0 || f.signum() != prev_f.signum() {
            roots.push((prev_x, x));
        }
        prev_x = x;
        prev_f = f;
    }
    let Some(&(lo, hi)) = roots.first() else {
        return Err(Error::NoBoundState { lo: far, hi: 0.0 });
    };
    // bracket closest to x = 0 comes first
    let failure = RefCell::new(None);
    let x = brent(
        |x| match eval(x) {
            Ok(v) => v,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        },
        lo,
        hi,
        1e-20,
        300,
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let x = x.ok_or(Error::NoBoundState { lo: far, hi: 0.0 })?;
    Ok((Complex64::new(0.0, -x), roots.len() > 1))
}

/// `|1/(1 + ∂Σ/∂s)|²` at the pole, with the derivative taken by a
/// Richardson-extrapolated central difference along the imaginary axis.
pub fn residue(ctx: &SelfEnergyContext, pole: Complex64, method: SelfEnergyMethod) -> Result<Complex64> {
    let step = 1e-6 * ctx.detuning;
    if !(step > f64::MIN_POSITIVE * 1e6) {
        return Err(Error::DegenerateResidue(step));
    }
    let quotient = |h: f64| -> Result<Complex64> {
        let dh = Complex64::new(0.0, h);
        Ok((self_energy(pole + dh, ctx, method)? - self_energy(pole - dh, ctx, method)?) / (2.0 * dh))
    };
    let derivative = richardson2_c(quotient(step)?, quotient(0.5 * step)?);
    let denom = Complex64::new(1.0, 0.0) + derivative;
    if denom.norm() < 1e-12 {
        return Err(Error::DegenerateResidue(denom.norm()));
    }
    Ok(denom.inv())
}

pub fn residue_population(ctx: &SelfEnergyContext, pole: Complex64, method: SelfEnergyMethod) -> Result<f64> {
    let p = residue(ctx, pole, method)?.norm_sqr();
    if !(0.0..=1.0 + 1e-12).contains(&p) {
        return Err(Error::DegenerateResidue(p));
    }
    Ok(p.min(1.0))
}

/// Pole, residue and derived quantities in one call.
pub fn solve_bound_state(ctx: &SelfEnergyContext, method: SelfEnergyMethod) -> Result<BoundStateResult> {
    let (pole, ambiguous) = bound_state_pole(ctx, method)?;
    let residual = (pole + self_energy(pole, ctx, method)?).norm();
    let res = residue(ctx, pole, method)?;
    Ok(BoundStateResult {
        pole,
        residual,
        residue: res,
        steady_population: residue_population(ctx, pole, method)?,
        bound_length: 1.0 / ctx.beta(),
        ambiguous,
    })
}

fn check_pair(pair: &AtomPair, ctx: &SelfEnergyContext) -> Result<()> {
    pair.validate()?;
    let (a, b) = (&pair.first, &ctx.atom);
    if a.omega_q != b.omega_q || a.d_s != b.d_s || a.g != b.g {
        return Err(invalid("pair", "atoms differ from the self-energy context atom"));
    }
    Ok(())
}

/// Exchange coupling `J₁₂ = Σ_k g_{k1} g*_{k2} / Δ_k` of two identical atoms
/// in the gap, from the quadratic model of one band edge.
pub fn dipole_coupling(pair: &AtomPair, ctx: &SelfEnergyContext, method: SelfEnergyMethod) -> Result<f64> {
    check_pair(pair, ctx)?;
    let g2 = ctx.atom.g * ctx.atom.g;
    let ds = ctx.atom.d_s as f64;
    let dq = pair.d_q as f64;
    let k0 = ctx.edge.k0();
    match method {
        SelfEnergyMethod::Quadrature => {
            let v = integrate(
                |dk| {
                    let k = k0 + dk;
                    let weight = 2.0 * g2 * (1.0 + (k * ds).cos());
                    Complex64::from_polar(weight / ctx.mode_detuning(dk), -k * dq)
                },
                -PI,
                PI,
                // the integrand oscillates in sign, so |J| can be far below its scale
                QUAD_REL_TOL * 4.0 * g2 * 2.0 * PI / ctx.detuning,
                QUAD_REL_TOL,
            )?;
            Ok(v.re * ctx.prefactor())
        }
        SelfEnergyMethod::ClosedForm => {
            let beta = ctx.beta();
            let n = ctx.n_modes as f64;
            let envelope = (-beta * dq).exp()
                + 0.5 * (ds * k0).cos() * ((-beta * (dq - ds).abs()).exp() + (-beta * (dq + ds)).exp());
            Ok(ctx.sigma() * n * g2 / (ctx.edge.alpha * beta) * (dq * k0).cos() * envelope)
        }
    }
}

/// Self-energy summed over every mode of both bands on the simulation grid.
pub fn lattice_self_energy(s: Complex64, atom: &GiantAtom, grid: &ModeGrid) -> Complex64 {
    grid.k_values
        .iter()
        .enumerate()
        .map(|(j, &k)| {
            let g2 = atom.form_factor(k).norm_sqr();
            let du = grid.frequencies_upper[j] - atom.omega_q;
            let dl = grid.frequencies_lower[j] - atom.omega_q;
            g2 / (s + Complex64::new(0.0, du)) + g2 / (s + Complex64::new(0.0, dl))
        })
        .sum()
}

/// Exchange coupling summed over every mode of both bands on the grid.
pub fn lattice_dipole_coupling(pair: &AtomPair, grid: &ModeGrid) -> Result<f64> {
    pair.validate()?;
    let atom = &pair.first;
    let dq = pair.d_q as f64;
    let mut total = Complex64::new(0.0, 0.0);
    for (j, &k) in grid.k_values.iter().enumerate() {
        let g1 = atom.form_factor(k);
        let g2 = g1 * Complex64::from_polar(1.0, k * dq);
        let num = g1 * g2.conj();
        for w in [grid.frequencies_upper[j], grid.frequencies_lower[j]] {
            let delta = w - atom.omega_q;
            if delta == 0.0 {
                return Err(Error::PoleOnContour);
            }
            total += num / delta;
        }
    }
    Ok(total.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bandstructure::{band_edges, quadratic_band_edge, EdgePoint};

    fn params() -> LatticeParams {
        LatticeParams::default()
    }

    fn upper_ctx(d_s: u32, g: f64, frac: f64, n: usize) -> SelfEnergyContext {
        let p = params();
        let edge = quadratic_band_edge(Band::Upper, EdgePoint::Pi, &p).unwrap();
        let gap = band_edges(&p).unwrap().gap_width;
        SelfEnergyContext::at_detuning(edge, d_s, g, frac * gap, n).unwrap()
    }

    #[test]
    fn markov_zero_and_small_atom() {
        let p = params();
        let k = PI / 2.0;
        let w = omega(k, Band::Upper, &p).unwrap();
        let a2 = GiantAtom::new(w, 2, 1e-4).unwrap();
        assert!(markov_decay_rate(&p, &a2, k, Band::Upper, 5000).unwrap() < 1e-20);
        let a0 = GiantAtom::new(w, 0, 1e-4).unwrap();
        let vg = group_velocity(k, Band::Upper, &p).unwrap().abs();
        let gamma = markov_decay_rate(&p, &a0, k, Band::Upper, 5000).unwrap();
        assert!((gamma - 8.0 * 5000.0 * 1e-8 / vg).abs() < 1e-18);
    }

    #[test]
    fn markov_refuses_edges_and_detuned_atoms() {
        let p = params();
        let w = omega(0.05, Band::Lower, &p).unwrap();
        let a = GiantAtom::new(w, 1, 1e-4).unwrap();
        assert!(matches!(
            markov_decay_rate(&p, &a, 0.05, Band::Lower, 100),
            Err(Error::MarkovInvalid(_))
        ));
        let a = GiantAtom::new(1.0, 1, 1e-4).unwrap();
        assert!(markov_decay_rate(&p, &a, 1.0, Band::Upper, 100).is_err());
    }

    #[test]
    fn context_requires_gap_side() {
        let p = params();
        let edge = quadratic_band_edge(Band::Upper, EdgePoint::Pi, &p).unwrap();
        let above = GiantAtom::new(edge.edge_freq + 0.01, 1, 1e-4).unwrap();
        assert!(matches!(
            SelfEnergyContext::new(edge, above, 100),
            Err(Error::NotInGap { .. })
        ));
        let lower = quadratic_band_edge(Band::Lower, EdgePoint::Pi, &p).unwrap();
        let below = GiantAtom::new(lower.edge_freq - 0.01, 1, 1e-4).unwrap();
        assert!(SelfEnergyContext::new(lower, below, 100).is_err());
    }

    #[test]
    fn zero_coupling() {
        let ctx = upper_ctx(3, 0.0, 0.2, 5000);
        for m in [SelfEnergyMethod::Quadrature, SelfEnergyMethod::ClosedForm] {
            assert_eq!(
                self_energy(Complex64::new(0.0, -1e-3), &ctx, m).unwrap(),
                Complex64::new(0.0, 0.0)
            );
            let (pole, _) = bound_state_pole(&ctx, m).unwrap();
            assert_eq!(pole, Complex64::new(0.0, 0.0));
            assert_eq!(residue_population(&ctx, pole, m).unwrap(), 1.0);
        }
    }

    #[test]
    fn large_atom_closed_form_loses_interference() {
        let ctx = upper_ctx(60, 1e-4, 0.2, 5000);
        let s = Complex64::new(0.0, 0.0);
        let sigma = self_energy(s, &ctx, SelfEnergyMethod::ClosedForm).unwrap();
        let a = ctx.detuning;
        let plain = 5000.0 * 1e-8 / (ctx.edge.alpha * a).sqrt();
        assert!(((-sigma.im) - plain).abs() / plain < 1e-6);
        assert!(sigma.re == 0.0);
    }

    #[test]
    fn closed_form_errors() {
        let ctx = upper_ctx(1, 1e-4, 0.2, 100);
        assert!(matches!(
            self_energy(
                Complex64::new(0.0, -2.0 * ctx.detuning),
                &ctx,
                SelfEnergyMethod::ClosedForm
            ),
            Err(Error::BranchViolation(_))
        ));
        assert!(self_energy(Complex64::new(1e-3, 0.0), &ctx, SelfEnergyMethod::ClosedForm).is_err());
        // s = -i x with x inside the band continuum
        assert_eq!(
            self_energy(
                Complex64::new(0.0, -2.0 * ctx.detuning),
                &ctx,
                SelfEnergyMethod::Quadrature
            ),
            Err(Error::PoleOnContour)
        );
    }

    #[test]
    fn pole_is_imaginary_and_inside_detuning() {
        let ctx = upper_ctx(1, 1e-4, 0.2, 5000);
        let r = solve_bound_state(&ctx, SelfEnergyMethod::ClosedForm).unwrap();
        assert_eq!(r.pole.re, 0.0);
        assert!(r.pole.norm() < ctx.detuning);
        assert!(r.residual < 1e-12, "{}", r.residual);
        assert!(r.energy() < 0.0);
        assert!((0.0..=1.0).contains(&r.steady_population));
    }

    #[test]
    fn lower_edge_pole_mirrors() {
        let p = params();
        let edge = quadratic_band_edge(Band::Lower, EdgePoint::Pi, &p).unwrap();
        let ctx = SelfEnergyContext::at_detuning(edge, 2, 1e-4, 0.02, 5000).unwrap();
        assert!(ctx.atom.omega_q > edge.edge_freq);
        let r = solve_bound_state(&ctx, SelfEnergyMethod::ClosedForm).unwrap();
        assert!(r.energy() > 0.0);
        assert!(r.residual < 1e-12);
    }

    #[test]
    fn below_lower_band_has_bound_state() {
        let p = params();
        let edge = quadratic_band_edge(Band::Lower, EdgePoint::Zero, &p).unwrap();
        for d_s in [1, 4, 7] {
            let ctx = SelfEnergyContext::at_detuning(edge, d_s, 1e-4, 0.02, 5000).unwrap();
            let r = solve_bound_state(&ctx, SelfEnergyMethod::ClosedForm).unwrap();
            assert!(r.energy() < 0.0);
            assert!(r.steady_population > 0.0 && r.steady_population < 1.0);
        }
    }

    #[test]
    fn dipole_sign_follows_parity() {
        let ctx = upper_ctx(3, 1e-4, 0.2, 2000);
        for dq in 4..10u32 {
            let a = AtomPair::new(ctx.atom, dq).unwrap();
            let b = AtomPair::new(ctx.atom, dq + 1).unwrap();
            for m in [SelfEnergyMethod::ClosedForm, SelfEnergyMethod::Quadrature] {
                let ja = dipole_coupling(&a, &ctx, m).unwrap();
                let jb = dipole_coupling(&b, &ctx, m).unwrap();
                assert!(ja * jb < 0.0, "{dq} {m:?}: {ja} {jb}");
            }
        }
    }

    #[test]
    fn dipole_rejects_foreign_pair() {
        let ctx = upper_ctx(3, 1e-4, 0.2, 2000);
        let other = GiantAtom::new(ctx.atom.omega_q, 4, 1e-4).unwrap();
        let pair = AtomPair::new(other, 6).unwrap();
        assert!(dipole_coupling(&pair, &ctx, SelfEnergyMethod::ClosedForm).is_err());
    }
}
