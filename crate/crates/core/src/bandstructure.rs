//! Dispersion of the left-handed superlattice metamaterial.
//!
//! The superlattice unit cell holds two left-handed LC sub-cells: series
//! capacitors `C` and `εC`, shunt inductors `L` and `εL`. Frequencies are in
//! units of the single-cell resonance `ω_r = 1/√(LC)` and wavevectors are per
//! superlattice period (`ΔX = 1`).
//!
//! With `A = (1+ε)²/2` and `R(k) = √(A² − 4ε² sin²(k/2))` the two branches are
//!
//! ```text
//! ω_upper(k) = 1/√(A − R)      (diverges at k = 0, decreasing in |k|)
//! ω_lower(k) = 1/√(A + R)      (Bragg band, increasing in |k|)
//! ```
//!
//! `A − R` is evaluated as `4ε² sin²(k/2) / (A + R)` to avoid cancellation
//! near the zone centre.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numeric::richardson2;

/// Circuit constants of the metamaterial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeParams {
    /// Series capacitance `C` in farads.
    pub capacitance: f64,
    /// Shunt inductance `L` in henries.
    pub inductance: f64,
    /// Superlattice impedance ratio `ε`.
    pub epsilon: f64,
}

impl Default for LatticeParams {
    fn default() -> Self {
        Self {
            capacitance: 2.5e-11,
            inductance: 2e-10,
            epsilon: 1.4,
        }
    }
}

impl LatticeParams {
    pub fn new(capacitance: f64, inductance: f64, epsilon: f64) -> Result<Self> {
        let p = Self {
            capacitance,
            inductance,
            epsilon,
        };
        p.validate()?;
        Ok(p)
    }

    /// Default circuit constants with a different superlattice ratio.
    pub fn with_epsilon(epsilon: f64) -> Result<Self> {
        Self::new(Self::default().capacitance, Self::default().inductance, epsilon)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("capacitance", self.capacitance),
            ("inductance", self.inductance),
            ("epsilon", self.epsilon),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, format!("must be finite and > 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Single-cell resonance `1/√(LC)` in rad/s.
    pub fn omega_r(&self) -> f64 {
        1.0 / (self.capacitance * self.inductance).sqrt()
    }

    /// Superlattice period; all lengths are measured in it.
    pub fn cell_length(&self) -> f64 {
        1.0
    }

    fn a(&self) -> f64 {
        0.5 * (1.0 + self.epsilon).powi(2)
    }

    fn radical(&self, k: f64) -> f64 {
        let a = self.a();
        let s = (0.5 * k).sin();
        (a * a - 4.0 * self.epsilon * self.epsilon * s * s).max(0.0).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    /// Left-handed branch, divergent at `k = 0`.
    Upper,
    /// Bragg-scattering branch.
    Lower,
}

impl Band {
    pub fn name(self) -> &'static str {
        match self {
            Band::Upper => "upper",
            Band::Lower => "lower",
        }
    }
}

fn check_bz(k: f64) -> Result<()> {
    if !k.is_finite() || k.abs() > PI * (1.0 + 4.0 * f64::EPSILON) {
        return Err(Error::OutsideBrillouinZone { k });
    }
    Ok(())
}

/// `1/ω²` for a branch, in units of `1/ω_r²`.
fn inverse_square(k: f64, band: Band, params: &LatticeParams) -> f64 {
    let a = params.a();
    let r = params.radical(k);
    match band {
        Band::Upper => {
            let s = (0.5 * k).sin();
            4.0 * params.epsilon * params.epsilon * s * s / (a + r)
        }
        Band::Lower => a + r,
    }
}

/// Band frequency `ω(k)` in units of `ω_r`.
pub fn omega(k: f64, band: Band, params: &LatticeParams) -> Result<f64> {
    check_bz(k)?;
    if band == Band::Upper && k == 0.0 {
        return Err(Error::UpperBandDivergence);
    }
    Ok(1.0 / inverse_square(k, band, params).sqrt())
}

/// Group velocity `dω/dk` in units of `ω_r ΔX`.
pub fn group_velocity(k: f64, band: Band, params: &LatticeParams) -> Result<f64> {
    check_bz(k)?;
    if k.abs() >= PI {
        return Ok(0.0);
    }
    if band == Band::Upper && k == 0.0 {
        return Err(Error::UpperBandDivergence);
    }
    let e2 = params.epsilon * params.epsilon;
    let r = params.radical(k);
    let u = inverse_square(k, band, params);
    // du/dk = ±ε² sin k / R, dω/dk = -u^{-3/2} (du/dk) / 2
    let sign = match band {
        Band::Upper => -1.0,
        Band::Lower => 1.0,
    };
    Ok(sign * e2 * k.sin() / (2.0 * r * u.powf(1.5)))
}

/// Gap and lower-band widths, all in units of `ω_r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandEdges {
    pub omega_upper_pi: f64,
    pub omega_lower_pi: f64,
    pub omega_lower_zero: f64,
    pub gap_width: f64,
    pub lower_width: f64,
}

impl BandEdges {
    pub fn mid_gap(&self) -> f64 {
        0.5 * (self.omega_upper_pi + self.omega_lower_pi)
    }
}

pub fn band_edges(params: &LatticeParams) -> Result<BandEdges> {
    params.validate()?;
    let omega_upper_pi = omega(PI, Band::Upper, params)?;
    let omega_lower_pi = omega(PI, Band::Lower, params)?;
    let omega_lower_zero = omega(0.0, Band::Lower, params)?;
    Ok(BandEdges {
        omega_upper_pi,
        omega_lower_pi,
        omega_lower_zero,
        gap_width: omega_upper_pi - omega_lower_pi,
        lower_width: omega_lower_pi - omega_lower_zero,
    })
}

/// Band-edge wavevector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgePoint {
    Zero,
    Pi,
}

impl EdgePoint {
    pub fn k(self) -> f64 {
        match self {
            EdgePoint::Zero => 0.0,
            EdgePoint::Pi => PI,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeOrientation {
    /// The band lies above the edge frequency.
    Minimum,
    /// The band lies below the edge frequency.
    Maximum,
}

impl EdgeOrientation {
    /// `+1` when the band lies above the edge, `-1` when below.
    pub fn sign(self) -> f64 {
        match self {
            EdgeOrientation::Minimum => 1.0,
            EdgeOrientation::Maximum => -1.0,
        }
    }
}

/// Quadratic model `ω(k0 + δk) ≈ edge_freq ± alpha δk²` of a band edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticBandEdge {
    pub band: Band,
    pub point: EdgePoint,
    pub edge_freq: f64,
    /// Coefficient of `δk²` in the expansion, `|d²ω/dk²|/2`, in units of
    /// `ω_r ΔX²`.
    pub alpha: f64,
    pub orientation: EdgeOrientation,
}

impl QuadraticBandEdge {
    pub fn k0(&self) -> f64 {
        self.point.k()
    }

    /// `|d²ω/dk²|` at the edge.
    pub fn second_derivative(&self) -> f64 {
        2.0 * self.alpha
    }

    /// Quadratic-model frequency at `k0 + delta_k`.
    pub fn model(&self, delta_k: f64) -> f64 {
        self.edge_freq + self.orientation.sign() * self.alpha * delta_k * delta_k
    }
}

const CURVATURE_STEP: f64 = 1e-4;

/// `ω(k0 + h) - ω(k0)` rearranged so that no two nearly equal numbers are
/// subtracted; the plain difference loses about eight digits at `h = 10⁻⁴`.
fn edge_offset(h: f64, band: Band, point: EdgePoint, params: &LatticeParams) -> f64 {
    let k0 = point.k();
    let e2 = params.epsilon * params.epsilon;
    let a = params.a();
    let s0 = (0.5 * k0).sin().powi(2);
    // sin²((k0 + h)/2) - sin²(k0/2), exact for k0 ∈ {0, π}
    let ds = match point {
        EdgePoint::Zero => (0.5 * h).sin().powi(2),
        EdgePoint::Pi => -(0.5 * h).sin().powi(2),
    };
    let r0 = params.radical(k0);
    let r = params.radical(k0 + h);
    let dr = -4.0 * e2 * ds / (r + r0);
    let (u0, du) = match band {
        Band::Lower => (a + r0, dr),
        Band::Upper => (
            4.0 * e2 * s0 / (a + r0),
            4.0 * e2 * (ds * (a + r0) - s0 * dr) / ((a + r) * (a + r0)),
        ),
    };
    let u = u0 + du;
    -du / (u.sqrt() * u0.sqrt() * (u.sqrt() + u0.sqrt()))
}

/// Quadratic expansion of one of the three physically relevant band edges:
/// upper band at `π`, lower band at `π` and lower band at `0`.
pub fn quadratic_band_edge(band: Band, point: EdgePoint, params: &LatticeParams) -> Result<QuadraticBandEdge> {
    params.validate()?;
    let orientation = match (band, point) {
        (Band::Upper, EdgePoint::Pi) => EdgeOrientation::Minimum,
        (Band::Lower, EdgePoint::Pi) => EdgeOrientation::Maximum,
        (Band::Lower, EdgePoint::Zero) => EdgeOrientation::Minimum,
        (Band::Upper, EdgePoint::Zero) => {
            return Err(Error::UnsupportedBandEdge(
                "upper band has no finite edge at k = 0".into(),
            ))
        }
    };
    let edge_freq = omega(point.k(), band, params)?;
    // ω is even about both 0 and π, so the central difference reduces to
    // 2 (ω(k0 + h) - ω(k0)) / h².
    let second = |h: f64| 2.0 * edge_offset(h, band, point, params) / (h * h);
    let curvature = richardson2(second(CURVATURE_STEP), second(0.5 * CURVATURE_STEP));
    Ok(QuadraticBandEdge {
        band,
        point,
        edge_freq,
        alpha: 0.5 * curvature.abs(),
        orientation,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
}

/// Real-space normal-mode frequencies of a ring of `n_cells` superlattice
/// cells (`2 n_cells` flux nodes), sorted ascending.
///
/// Node `2m` carries inductor `εL` and node `2m+1` inductor `L`; the series
/// capacitor between `2m` and `2m+1` is `εC`, the one between `2m+1` and
/// `2m+2` is `C`. The capacitance matrix of a ring is a weighted graph
/// Laplacian and therefore singular: its null vector is the `k = 0` mode of
/// the upper band, reported as `f64::INFINITY`. To keep that mode finite the
/// problem is solved for `1/ω²` as the spectrum of `L^{1/2} Ĉ L^{1/2}`.
pub fn realspace_spectrum(params: &LatticeParams, n_cells: usize, boundary: Boundary) -> Result<Vec<f64>> {
    params.validate()?;
    if n_cells < 8 || !n_cells.is_multiple_of(2) {
        return Err(invalid("n_cells", format!("must be even and >= 8, got {n_cells}")));
    }
    let Boundary::Periodic = boundary;
    let eps = params.epsilon;
    let dim = 2 * n_cells;
    // inductance (units of L) and capacitance (units of C) per node/link
    let induct = |i: usize| if i.is_multiple_of(2) { eps } else { 1.0 };
    let link = |i: usize| if i.is_multiple_of(2) { eps } else { 1.0 };

    let mut m = DMatrix::<f64>::zeros(dim, dim);
    for i in 0..dim {
        let j = (i + 1) % dim;
        let c = link(i);
        let (si, sj) = (induct(i).sqrt(), induct(j).sqrt());
        m[(i, i)] += c * si * si;
        m[(j, j)] += c * sj * sj;
        m[(i, j)] -= c * si * sj;
        m[(j, i)] -= c * si * sj;
    }
    let scale = m.amax();
    let eig = SymmetricEigen::try_new(m, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::EigenSolver("symmetric eigen-decomposition did not converge".into()))?;
    let tol = 1e-12 * scale;
    let mut freqs = Vec::with_capacity(dim);
    for &mu in eig.eigenvalues.iter() {
        if mu < -tol {
            return Err(Error::NotPositiveSemidefinite { eigenvalue: mu });
        }
        freqs.push(if mu <= tol { f64::INFINITY } else { 1.0 / mu.sqrt() });
    }
    freqs.sort_by(f64::total_cmp);
    Ok(freqs)
}

/// Uniform Brillouin-zone grid `k_j = -π + 2πj/n`, `j = 1..n`, computed as
/// `π(2j - n)/n` so that `k = 0` and `k = π` are hit exactly.
pub fn bz_grid(n: usize) -> Vec<f64> {
    (1..=n).map(|j| PI * (2.0 * j as f64 - n as f64) / n as f64).collect()
}

/// One row of a tabulated band structure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionRow {
    pub k: f64,
    pub omega_upper: f64,
    pub omega_lower: f64,
    pub vg_upper: f64,
    pub vg_lower: f64,
}

/// Band structure on the grid `k_j = -π + 2πj/n`, `j = 1..n`. Where the upper
/// band diverges the row holds `+inf` / `NaN`.
pub fn dispersion_table(params: &LatticeParams, n: usize) -> Result<Vec<DispersionRow>> {
    params.validate()?;
    if n < 2 {
        return Err(invalid("n", "need at least two k-points"));
    }
    bz_grid(n)
        .into_iter()
        .map(|k| {
            let (omega_upper, vg_upper) = if k == 0.0 {
                (f64::INFINITY, f64::NAN)
            } else {
                (omega(k, Band::Upper, params)?, group_velocity(k, Band::Upper, params)?)
            };
            Ok(DispersionRow {
                k,
                omega_upper,
                omega_lower: omega(k, Band::Lower, params)?,
                vg_upper,
                vg_lower: group_velocity(k, Band::Lower, params)?,
            })
        })
        .collect()
}
