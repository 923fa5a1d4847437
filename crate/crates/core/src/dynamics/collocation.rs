//! Field-exact collocation step.
//!
//! Across one step `[t, t + h]` each atom amplitude is replaced by the cubic
//! through its value at `t` and at the three Radau points, which gives fifth
//! order at step ends. For a polynomial source
//! the mode equations `i ċ_k = Δ_k c_k + Σ_p b_pk c_p` integrate in closed
//! form, and feeding that solution back into the atom equations leaves a
//! small linear system for the three unknown nodal values of every atom.
//! Mode frequencies never enter the error, only the smoothness of the atom
//! amplitudes does, so far-detuned modes cost no accuracy. The step works
//! relative to the common atom frequency, which makes it frame independent.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::hamiltonian::ArrowheadHamiltonian;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);
/// Start of the step followed by the three Radau IIA points.
const NODES: [f64; 4] = [0.0, 0.155_051_025_721_682_2, 0.644_948_974_278_317_8, 1.0];
const FACT: [f64; 8] = [1.0, 1.0, 2.0, 6.0, 24.0, 120.0, 720.0, 5040.0];

/// `φ_m(z) = Σ_l z^l / (l + m)!`.
fn phi(m: usize, z: Complex64) -> Complex64 {
    if z.norm() < 1.0 {
        let mut sum = ZERO;
        let mut term = Complex64::new(1.0 / FACT[m], 0.0);
        for l in 0..40 {
            sum += term;
            term *= z / (l + m + 1) as f64;
        }
        sum
    } else {
        let mut p = z.exp();
        for j in 0..m {
            p = (p - 1.0 / FACT[j]) / z;
        }
        p
    }
}

/// Monomial coefficients of the Lagrange basis on `NODES`.
fn lagrange_coefficients() -> [[f64; 4]; 4] {
    let mut out = [[0.0; 4]; 4];
    for (j, row) in out.iter_mut().enumerate() {
        let mut poly = vec![1.0];
        let mut denom = 1.0;
        for (i, &s) in NODES.iter().enumerate() {
            if i == j {
                continue;
            }
            let mut next = vec![0.0; poly.len() + 1];
            for (d, &c) in poly.iter().enumerate() {
                next[d + 1] += c;
                next[d] -= s * c;
            }
            poly = next;
            denom *= NODES[j] - s;
        }
        for (d, c) in poly.iter().enumerate() {
            row[d] = c / denom;
        }
    }
    out
}

fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

struct Integrals {
    h: f64,
    basis: [[f64; 4]; 4],
    rule: Vec<(f64, f64)>,
}

impl Integrals {
    /// `∫₀^τ e^{-iΔ(τ-σ)} (σ/h)^n dσ`.
    fn forced_monomial(&self, n: usize, delta: f64, tau: f64) -> Complex64 {
        phi(n + 1, -I * delta * tau) * (FACT[n] * tau.powi(n as i32 + 1) / self.h.powi(n as i32))
    }

    /// `∫₀^τ e^{-iΔ(τ-σ)} ℓ_j(σ/h) dσ`.
    fn forced(&self, j: usize, delta: f64, tau: f64) -> Complex64 {
        (0..4)
            .map(|n| self.forced_monomial(n, delta, tau) * self.basis[j][n])
            .sum()
    }

    /// `∫₀^τ e^{-iΔs} ds`.
    fn free(&self, delta: f64, tau: f64) -> Complex64 {
        phi(1, -I * delta * tau) * tau
    }

    /// `∫₀^τ ∫₀^s e^{-iΔ(s-σ)} (σ/h)^n dσ ds`.
    fn memory_monomial(&self, n: usize, delta: f64, tau: f64) -> Complex64 {
        if (delta * tau).abs() >= 0.5 {
            return I * (self.forced_monomial(n, delta, tau) - self.forced_monomial(n, 0.0, tau)) / delta;
        }
        // the divided difference above would cancel; integrate
        // ∫₀^τ (σ/h)^n (τ-σ) φ₁(-iΔ(τ-σ)) dσ instead
        let mut sum = ZERO;
        for &(x, wt) in &self.rule {
            let sigma = 0.5 * tau * (x + 1.0);
            let r = tau - sigma;
            sum += phi(1, -I * delta * r) * (r * wt * 0.5 * tau * (sigma / self.h).powi(n as i32));
        }
        sum
    }

    fn memory(&self, j: usize, delta: f64, tau: f64) -> Complex64 {
        (0..4)
            .map(|n| self.memory_monomial(n, delta, tau) * self.basis[j][n])
            .sum()
    }
}

pub(super) struct Collocation {
    n_atoms: usize,
    /// `e^{-iδ h}` for the common atom frequency `δ`.
    phase: Complex64,
    /// `e^{-i(Δ_k - δ) h}`.
    decay: Vec<Complex64>,
    /// `∫₀^h e^{-i(Δ_k-δ)(h-σ)} ℓ_j dσ`, `j = 0..3`.
    forced: Vec<[Complex64; 4]>,
    /// Free-field weights at the three inner nodes.
    free: Vec<[Complex64; 3]>,
    /// Memory coupling to the known value at `t`, row `(p, m)`, column `q`.
    known: Vec<Complex64>,
    /// Inverse of the collocation matrix on the unknown nodal values.
    inverse: DMatrix<Complex64>,
    rhs: Vec<Complex64>,
    nodal: Vec<Complex64>,
}

impl Collocation {
    /// All atoms must share one frequency, as every builder in this crate
    /// guarantees.
    pub(super) fn new(h: &ArrowheadHamiltonian, dt: f64) -> Self {
        let ints = Integrals {
            h: dt,
            basis: lagrange_coefficients(),
            rule: gauss_legendre(16),
        };
        let q = h.n_atoms();
        let shift = h.atom_diagonal[0];
        assert!(
            h.atom_diagonal.iter().all(|&a| a == shift),
            "collocation step needs identical atom frequencies"
        );
        let taus = [NODES[1] * dt, NODES[2] * dt, NODES[3] * dt];
        let detunings: Vec<f64> = h.mode_diagonal.iter().map(|&d| d - shift).collect();

        let decay = detunings.iter().map(|&d| (-I * d * dt).exp()).collect();
        let forced = detunings
            .iter()
            .map(|&d| [0, 1, 2, 3].map(|j| ints.forced(j, d, dt)))
            .collect();
        let free = detunings.iter().map(|&d| taus.map(|tau| ints.free(d, tau))).collect();

        // K[(p, m), (q, j)] = Σ_k conj(b_pk) b_qk B_j(Δ_k - δ, τ_m)
        let rows = 3 * q;
        let mut known = vec![ZERO; rows * q];
        let mut system = DMatrix::<Complex64>::identity(rows, rows);
        for (k, &d) in detunings.iter().enumerate() {
            for (m, &tau) in taus.iter().enumerate() {
                let b = [0, 1, 2, 3].map(|j| ints.memory(j, d, tau));
                for p in 0..q {
                    let bp = h.borders[p][k].conj();
                    let row = 3 * p + m;
                    for qq in 0..q {
                        let w = bp * h.borders[qq][k];
                        known[row * q + qq] += w * b[0];
                        for j in 1..4 {
                            system[(row, 3 * qq + j - 1)] += w * b[j];
                        }
                    }
                }
            }
        }
        let inverse = system
            .try_inverse()
            .expect("collocation matrix is a small perturbation of the identity");
        Self {
            n_atoms: q,
            phase: (-I * shift * dt).exp(),
            decay,
            forced,
            free,
            known,
            inverse,
            rhs: vec![ZERO; rows],
            nodal: vec![ZERO; rows],
        }
    }

    pub(super) fn step(&mut self, h: &ArrowheadHamiltonian, u: &mut [Complex64]) {
        let q = self.n_atoms;
        let nf = h.n_field();
        let (field, atoms) = u.split_at_mut(nf);
        for p in 0..q {
            let mut f = [ZERO; 3];
            for ((b, w), c) in h.borders[p].iter().zip(&self.free).zip(field.iter()) {
                let bc = b.conj() * c;
                f[0] += bc * w[0];
                f[1] += bc * w[1];
                f[2] += bc * w[2];
            }
            for m in 0..3 {
                let row = 3 * p + m;
                let mut v = atoms[p] - I * f[m];
                for qq in 0..q {
                    v -= self.known[row * q + qq] * atoms[qq];
                }
                self.rhs[row] = v;
            }
        }
        for (r, out) in self.nodal.iter_mut().enumerate() {
            *out = (0..3 * q).map(|c| self.inverse[(r, c)] * self.rhs[c]).sum();
        }
        for (k, c) in field.iter_mut().enumerate() {
            let l = &self.forced[k];
            let mut src = ZERO;
            for p in 0..q {
                let n = &self.nodal[3 * p..3 * p + 3];
                src += h.borders[p][k] * (atoms[p] * l[0] + n[0] * l[1] + n[1] * l[2] + n[2] * l[3]);
            }
            *c = (self.decay[k] * *c - I * src) * self.phase;
        }
        for p in 0..q {
            atoms[p] = self.nodal[3 * p + 2] * self.phase;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_branches_agree() {
        for m in 1..5 {
            for z in [Complex64::new(0.0, 0.999), Complex64::new(0.0, -1.001)] {
                let series = {
                    let mut s = ZERO;
                    let mut t = Complex64::new(1.0 / FACT[m], 0.0);
                    for l in 0..60 {
                        s += t;
                        t *= z / (l + m + 1) as f64;
                    }
                    s
                };
                assert!((phi(m, z) - series).norm() < 1e-14, "m={m}");
            }
        }
    }

    #[test]
    fn lagrange_basis_is_cardinal() {
        let c = lagrange_coefficients();
        for (j, row) in c.iter().enumerate() {
            for (i, &x) in NODES.iter().enumerate() {
                let v: f64 = (0..4).map(|n| row[n] * x.powi(n as i32)).sum();
                assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn memory_branches_agree() {
        let ints = Integrals {
            h: 2.0,
            basis: lagrange_coefficients(),
            rule: gauss_legendre(16),
        };
        // straddle the switch between divided difference and quadrature
        for d in [0.2499, 0.2501] {
            for n in 0..4 {
                let direct = ints.memory_monomial(n, d, 2.0);
                let mut quad = ZERO;
                for &(x, wt) in &ints.rule {
                    let sigma = 1.0 + x;
                    let r = 2.0 - sigma;
                    quad += phi(1, -I * d * r) * (r * wt * (sigma / 2.0).powi(n as i32));
                }
                assert!((direct - quad).norm() < 1e-13, "d={d} n={n}");
            }
        }
    }
}
