//! Single-excitation Hamiltonian of one or two giant atoms on the mode grid.
//!
//! Basis ordering: `N` upper-band modes, `N` lower-band modes, then the `Q`
//! atoms. Both bands share the same `k` grid and the same coupling factor
//! `g_k = g (1 + e^{i k d_s})`; a second atom translated by `D_q` picks up an
//! extra `e^{i k D_q}`. Bare couplings are in units of `ω_r`.

use std::f64::consts::PI;
use std::io::{self, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bandstructure::{bz_grid, omega, Band, LatticeParams};
use crate::error::{invalid, Error, Result};

/// Frequency substituted for the divergent upper-band mode at `k = 0`.
pub const UPPER_BAND_CUTOFF: f64 = 10.0;

/// Largest accepted number of modes per band.
pub const MAX_MODES: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GiantAtom {
    /// Transition frequency in units of `ω_r`.
    pub omega_q: f64,
    /// Separation of the two coupling points, in superlattice periods.
    pub d_s: u32,
    /// Bare coupling per coupling point, in units of `ω_r`.
    pub g: f64,
    /// Leftmost coupling site. Only phase differences enter the dynamics.
    #[serde(default)]
    pub position: i64,
}

impl GiantAtom {
    pub fn new(omega_q: f64, d_s: u32, g: f64) -> Result<Self> {
        let atom = Self {
            omega_q,
            d_s,
            g,
            position: 0,
        };
        atom.validate()?;
        Ok(atom)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_q.is_finite() && self.omega_q > 0.0) {
            return Err(invalid(
                "omega_q",
                format!("must be finite and > 0, got {}", self.omega_q),
            ));
        }
        if !(self.g.is_finite() && self.g >= 0.0) {
            return Err(invalid("g", format!("must be finite and >= 0, got {}", self.g)));
        }
        Ok(())
    }

    /// `g (1 + e^{i k d_s})`.
    pub fn form_factor(&self, k: f64) -> Complex64 {
        self.g * (Complex64::new(1.0, 0.0) + Complex64::from_polar(1.0, k * self.d_s as f64))
    }
}

/// Two identical giant atoms whose leftmost coupling points are `d_q` apart.
///
/// `d_q > d_s` gives separated atoms; smaller separations realise braided or
/// nested layouts, which the builder accepts as well.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomPair {
    pub first: GiantAtom,
    pub second: GiantAtom,
    pub d_q: u32,
}

impl AtomPair {
    pub fn new(atom: GiantAtom, d_q: u32) -> Result<Self> {
        atom.validate()?;
        if d_q == 0 {
            return Err(invalid("d_q", "atom separation must be >= 1"));
        }
        let second = GiantAtom {
            position: atom.position + i64::from(d_q),
            ..atom
        };
        Ok(Self {
            first: atom,
            second,
            d_q,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.first.validate()?;
        let (a, b) = (&self.first, &self.second);
        if a.omega_q != b.omega_q || a.d_s != b.d_s || a.g != b.g {
            return Err(invalid("atoms", "the two atoms must be identical"));
        }
        if self.d_q == 0 {
            return Err(invalid("d_q", "atom separation must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Emitters {
    Single(GiantAtom),
    Pair(AtomPair),
}

impl Emitters {
    pub fn count(&self) -> usize {
        match self {
            Emitters::Single(_) => 1,
            Emitters::Pair(_) => 2,
        }
    }

    pub fn primary(&self) -> &GiantAtom {
        match self {
            Emitters::Single(a) => a,
            Emitters::Pair(p) => &p.first,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Emitters::Single(a) => a.validate(),
            Emitters::Pair(p) => p.validate(),
        }
    }
}

/// Discretised Brillouin zone with both band frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeGrid {
    pub k_values: Vec<f64>,
    pub frequencies_upper: Vec<f64>,
    pub frequencies_lower: Vec<f64>,
}

impl ModeGrid {
    pub fn n_modes(&self) -> usize {
        self.k_values.len()
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.n_modes() as f64
    }
}

pub fn mode_grid(n: usize, params: &LatticeParams) -> Result<ModeGrid> {
    params.validate()?;
    if n < 2 || !n.is_multiple_of(2) {
        return Err(invalid("n_modes", format!("must be even and >= 2, got {n}")));
    }
    if n > MAX_MODES {
        return Err(Error::DimensionOverflow {
            n_modes: n,
            max: MAX_MODES,
        });
    }
    let k_values = bz_grid(n);
    let mut frequencies_upper = Vec::with_capacity(n);
    let mut frequencies_lower = Vec::with_capacity(n);
    for &k in &k_values {
        frequencies_upper.push(if k == 0.0 {
            UPPER_BAND_CUTOFF
        } else {
            omega(k, Band::Upper, params)?
        });
        frequencies_lower.push(omega(k, Band::Lower, params)?);
    }
    Ok(ModeGrid {
        k_values,
        frequencies_upper,
        frequencies_lower,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CouplingSlot {
    First,
    Second { d_q: u32 },
}

/// Coupling of one atom to all `2N` modes (upper block then lower block).
pub fn coupling_amplitudes(atom: &GiantAtom, grid: &ModeGrid, slot: CouplingSlot) -> Vec<Complex64> {
    let per_k: Vec<Complex64> = grid
        .k_values
        .iter()
        .map(|&k| {
            let base = atom.form_factor(k);
            match slot {
                CouplingSlot::First => base,
                CouplingSlot::Second { d_q } => base * Complex64::from_polar(1.0, k * d_q as f64),
            }
        })
        .collect();
    let mut out = per_k.clone();
    out.extend_from_slice(&per_k);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    Lab,
    /// Rotating at the atomic transition frequency.
    #[default]
    Rotating,
}

/// Hermitian arrowhead matrix: diagonal mode block, `Q` dense border
/// columns, diagonal atom block. Borders are stored once; the conjugate row
/// is implied.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrowheadHamiltonian {
    pub mode_diagonal: Vec<f64>,
    pub borders: Vec<Vec<Complex64>>,
    pub atom_diagonal: Vec<f64>,
    pub frame: Frame,
    /// Frequency subtracted from every diagonal entry.
    pub reference: f64,
}

pub fn build_hamiltonian(
    params: &LatticeParams,
    emitters: &Emitters,
    grid: &ModeGrid,
    frame: Frame,
) -> Result<ArrowheadHamiltonian> {
    params.validate()?;
    emitters.validate()?;
    let n = grid.n_modes();
    if n > MAX_MODES {
        return Err(Error::DimensionOverflow {
            n_modes: n,
            max: MAX_MODES,
        });
    }
    let omega_q = emitters.primary().omega_q;
    let reference = match frame {
        Frame::Lab => 0.0,
        Frame::Rotating => omega_q,
    };
    let mode_diagonal = grid
        .frequencies_upper
        .iter()
        .chain(&grid.frequencies_lower)
        .map(|w| w - reference)
        .collect();
    let borders = match emitters {
        Emitters::Single(a) => vec![coupling_amplitudes(a, grid, CouplingSlot::First)],
        Emitters::Pair(p) => vec![
            coupling_amplitudes(&p.first, grid, CouplingSlot::First),
            coupling_amplitudes(&p.first, grid, CouplingSlot::Second { d_q: p.d_q }),
        ],
    };
    Ok(ArrowheadHamiltonian {
        mode_diagonal,
        atom_diagonal: vec![omega_q - reference; emitters.count()],
        borders,
        frame,
        reference,
    })
}

impl ArrowheadHamiltonian {
    pub fn n_field(&self) -> usize {
        self.mode_diagonal.len()
    }

    pub fn n_atoms(&self) -> usize {
        self.atom_diagonal.len()
    }

    pub fn dimension(&self) -> usize {
        self.n_field() + self.n_atoms()
    }

    /// Count of structurally nonzero entries, `2N + 2·2N·Q + Q`.
    pub fn structural_nonzeros(&self) -> usize {
        self.n_field() + 2 * self.n_field() * self.n_atoms() + self.n_atoms()
    }

    /// Diagonal entry `i` of the full matrix.
    pub fn diagonal(&self, i: usize) -> f64 {
        if i < self.n_field() {
            self.mode_diagonal[i]
        } else {
            self.atom_diagonal[i - self.n_field()]
        }
    }

    /// Entry `(i, j)` of the full matrix.
    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        let nf = self.n_field();
        match (i < nf, j < nf) {
            (true, true) if i == j => Complex64::new(self.mode_diagonal[i], 0.0),
            (true, true) => Complex64::new(0.0, 0.0),
            (true, false) => self.borders[j - nf][i],
            (false, true) => self.borders[i - nf][j].conj(),
            (false, false) if i == j => Complex64::new(self.atom_diagonal[i - nf], 0.0),
            (false, false) => Complex64::new(0.0, 0.0),
        }
    }

    /// `y = V x` for the off-diagonal (border) part only.
    pub fn apply_coupling(&self, x: &[Complex64], y: &mut [Complex64]) {
        let nf = self.n_field();
        y[..nf].iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for (q, border) in self.borders.iter().enumerate() {
            let xa = x[nf + q];
            let mut acc = Complex64::new(0.0, 0.0);
            for ((yk, &b), &xk) in y[..nf].iter_mut().zip(border).zip(&x[..nf]) {
                *yk += b * xa;
                acc += b.conj() * xk;
            }
            y[nf + q] = acc;
        }
    }

    /// `y = H x` using the arrowhead structure.
    pub fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        self.apply_coupling(x, y);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += x[i] * self.diagonal(i);
        }
    }

    /// Row-major dense copy; only sensible for small grids.
    pub fn to_dense(&self) -> Vec<Vec<Complex64>> {
        let d = self.dimension();
        (0..d).map(|i| (0..d).map(|j| self.entry(i, j)).collect()).collect()
    }

    /// Frobenius norm of the border block, an upper bound on the spectral
    /// norm of the coupling part.
    pub fn coupling_norm(&self) -> f64 {
        self.borders
            .iter()
            .flat_map(|b| b.iter())
            .map(|c| c.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs_diagonal(&self) -> f64 {
        self.mode_diagonal
            .iter()
            .chain(&self.atom_diagonal)
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `⟨x|H|x⟩`.
    pub fn expectation(&self, x: &[Complex64]) -> f64 {
        let mut y = vec![Complex64::new(0.0, 0.0); x.len()];
        self.apply(x, &mut y);
        x.iter().zip(&y).map(|(a, b)| (a.conj() * b).re).sum()
    }

    /// Structure dump with header `index,type,value`: diagonal entries as
    /// `mode_upper`/`mode_lower`/`atom`, borders as `border_<q>` with the
    /// complex value written `re+imi`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "index,type,value")?;
        let n = self.n_field() / 2;
        for (i, d) in self.mode_diagonal.iter().enumerate() {
            let kind = if i < n { "mode_upper" } else { "mode_lower" };
            writeln!(w, "{i},{kind},{d:.16e}")?;
        }
        for (q, d) in self.atom_diagonal.iter().enumerate() {
            writeln!(w, "{},atom,{d:.16e}", self.n_field() + q)?;
        }
        for (q, border) in self.borders.iter().enumerate() {
            for (i, b) in border.iter().enumerate() {
                writeln!(w, "{i},border_{q},{:.16e}{:+.16e}i", b.re, b.im)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> LatticeParams {
        LatticeParams::default()
    }

    #[test]
    fn grid_convention() {
        let g = mode_grid(4, &params()).unwrap();
        assert_eq!(g.k_values, vec![-PI / 2.0, 0.0, PI / 2.0, PI]);
        assert_eq!(g.frequencies_upper[1], UPPER_BAND_CUTOFF);
        for w in g.k_values.windows(2) {
            assert!((w[1] - w[0] - g.spacing()).abs() < 1e-15);
        }
        assert!(mode_grid(5, &params()).is_err());
        assert!(mode_grid(0, &params()).is_err());
    }

    #[test]
    fn large_grid_lower_band_maximum() {
        let g = mode_grid(5000, &params()).unwrap();
        let max = g.frequencies_lower.iter().cloned().fold(f64::MIN, f64::max);
        assert!((max - 0.530_439_269_5).abs() < 1e-9);
    }

    #[test]
    fn coupling_examples() {
        let grid = ModeGrid {
            k_values: vec![PI / 2.0, 0.0],
            frequencies_upper: vec![1.0, 1.0],
            frequencies_lower: vec![0.5, 0.5],
        };
        let g = 1e-4;
        let a2 = GiantAtom::new(1.0, 2, g).unwrap();
        let c = coupling_amplitudes(&a2, &grid, CouplingSlot::First);
        assert_eq!(c.len(), 4);
        assert!(c[0].norm() < 1e-19);
        assert!((c[1] - Complex64::new(2.0 * g, 0.0)).norm() < 1e-20);
        assert_eq!(c[0], c[2]);

        let a3 = GiantAtom::new(1.0, 3, g).unwrap();
        let c = coupling_amplitudes(&a3, &grid, CouplingSlot::Second { d_q: 6 });
        let expected = Complex64::new(g, -g) * -1.0;
        assert!((c[0] - expected).norm() < 1e-18);
    }

    #[test]
    fn dimension_and_sparsity() {
        let grid = mode_grid(5000, &params()).unwrap();
        let atom = GiantAtom::new(1.0, 4, 1e-4).unwrap();
        let h = build_hamiltonian(&params(), &Emitters::Single(atom), &grid, Frame::Lab).unwrap();
        assert_eq!(h.dimension(), 10_001);
        assert_eq!(h.structural_nonzeros(), 10_000 + 2 * 10_000 + 1);
    }

    #[test]
    fn rotating_frame_shifts_diagonal() {
        let grid = mode_grid(8, &params()).unwrap();
        let atom = GiantAtom::new(0.6, 1, 1e-3).unwrap();
        let lab = build_hamiltonian(&params(), &Emitters::Single(atom), &grid, Frame::Lab).unwrap();
        let rot = build_hamiltonian(&params(), &Emitters::Single(atom), &grid, Frame::Rotating).unwrap();
        assert_eq!(rot.atom_diagonal, vec![0.0]);
        assert_eq!(lab.atom_diagonal, vec![0.6]);
        for (a, b) in lab.mode_diagonal.iter().zip(&rot.mode_diagonal) {
            assert!((a - b - 0.6).abs() < 1e-15);
        }
        assert_eq!(lab.borders, rot.borders);
    }

    #[test]
    fn pair_has_no_direct_atom_coupling() {
        let grid = mode_grid(16, &params()).unwrap();
        let atom = GiantAtom::new(0.6, 3, 1e-3).unwrap();
        let pair = AtomPair::new(atom, 6).unwrap();
        let h = build_hamiltonian(&params(), &Emitters::Pair(pair), &grid, Frame::Lab).unwrap();
        let d = h.dimension();
        assert_eq!(h.entry(d - 1, d - 2), Complex64::new(0.0, 0.0));
        assert_eq!(h.entry(d - 2, d - 1), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(GiantAtom::new(1.0, 1, -1e-4).is_err());
        assert!(GiantAtom::new(0.0, 1, 1e-4).is_err());
        let atom = GiantAtom::new(1.0, 1, 1e-4).unwrap();
        assert!(AtomPair::new(atom, 0).is_err());
        let mut pair = AtomPair::new(atom, 3).unwrap();
        pair.second.g = 2e-4;
        assert!(pair.validate().is_err());
    }

    #[test]
    fn csv_dump_header() {
        let grid = mode_grid(4, &params()).unwrap();
        let atom = GiantAtom::new(1.0, 1, 1e-3).unwrap();
        let h = build_hamiltonian(&params(), &Emitters::Single(atom), &grid, Frame::Lab).unwrap();
        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("index,type,value\n"));
        assert_eq!(text.lines().count(), 1 + 8 + 1 + 8);
    }
}
