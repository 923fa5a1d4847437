//! Single-excitation Schrödinger propagation on an [`ArrowheadHamiltonian`]
//! and observables extracted from the resulting trajectories.
//!
//! The upper band diverges like `1/|k|` near the zone centre, which makes a
//! plain explicit scheme stiff. The default integrator therefore propagates
//! every mode exactly against a cubic interpolant of the atom amplitudes
//! (see `collocation`), so its error depends only on how smooth the atom
//! amplitudes are. A fourth-order exponential time-differencing scheme
//! (Cox-Matthews ETDRK4) and classical RK4 on the full matrix are kept for
//! cross-checks.

use std::f64::consts::PI;
use std::io::{self, Write};

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hamiltonian::ArrowheadHamiltonian;
use crate::numeric::{fit_line, LineFit};

mod collocation;
use collocation::Collocation;

/// Bound on `dt` times the relevant operator norm.
pub const STABILITY_LIMIT: f64 = 0.1;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    /// Exact field propagation against cubic atom amplitudes.
    #[default]
    Collocation,
    Etdrk4,
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveConfig {
    /// Time step in units of `1/ω_r`.
    pub dt: f64,
    pub t_max: f64,
    /// Largest accepted `| ‖ψ‖² − 1 |`.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Record every `record_stride`-th step.
    #[serde(default = "default_stride")]
    pub record_stride: usize,
    #[serde(default)]
    pub integrator: Integrator,
}

fn default_tolerance() -> f64 {
    1e-6
}

fn default_stride() -> usize {
    1
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            dt: 1.0,
            t_max: 1000.0,
            tolerance: default_tolerance(),
            record_stride: default_stride(),
            integrator: Integrator::Collocation,
        }
    }
}

impl EvolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(invalid("dt", format!("must be finite and > 0, got {}", self.dt)));
        }
        if !(self.t_max.is_finite() && self.t_max >= self.dt) {
            return Err(invalid(
                "t_max",
                format!("must be finite and >= dt, got {}", self.t_max),
            ));
        }
        if !(self.tolerance > 0.0) {
            return Err(invalid("tolerance", "must be > 0"));
        }
        if self.record_stride == 0 {
            return Err(invalid("record_stride", "must be >= 1"));
        }
        Ok(())
    }

    /// Check the step against the stability guard of the chosen integrator.
    pub fn check_stability(&self, h: &ArrowheadHamiltonian) -> Result<()> {
        let coupling = self.dt * h.coupling_norm();
        if coupling > STABILITY_LIMIT {
            return Err(Error::StabilityGuard {
                quantity: "dt * |coupling|",
                value: coupling,
                limit: STABILITY_LIMIT,
            });
        }
        if self.integrator == Integrator::Rk4 {
            let diag = self.dt * h.max_abs_diagonal();
            if diag > STABILITY_LIMIT {
                return Err(Error::StabilityGuard {
                    quantity: "dt * max|diag|",
                    value: diag,
                    limit: STABILITY_LIMIT,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialState {
    /// `|e_q, 0⟩`: atom `q` excited, field in vacuum.
    AtomExcited(usize),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub t: Vec<f64>,
    /// One series per atom.
    pub atom_amplitudes: Vec<Vec<Complex64>>,
    pub mode_population: Vec<f64>,
    pub norm: Vec<f64>,
    /// `⟨ψ|H|ψ⟩` in the frame of the propagated Hamiltonian.
    pub energy: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn n_atoms(&self) -> usize {
        self.atom_amplitudes.len()
    }

    pub fn population(&self, atom: usize) -> Vec<f64> {
        self.atom_amplitudes[atom].iter().map(|c| c.norm_sqr()).collect()
    }

    pub fn max_norm_drift(&self) -> f64 {
        self.norm.iter().fold(0.0, |m, n| m.max((n - 1.0).abs()))
    }

    /// Export with header `t,re_ce_1,im_ce_1[,re_ce_2,im_ce_2],mode_pop,norm`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let mut header = String::from("t");
        for q in 1..=self.n_atoms() {
            header.push_str(&format!(",re_ce_{q},im_ce_{q}"));
        }
        header.push_str(",mode_pop,norm");
        writeln!(w, "{header}")?;
        for i in 0..self.len() {
            write!(w, "{:.16e}", self.t[i])?;
            for series in &self.atom_amplitudes {
                write!(w, ",{:.16e},{:.16e}", series[i].re, series[i].im)?;
            }
            writeln!(w, ",{:.16e},{:.16e}", self.mode_population[i], self.norm[i])?;
        }
        Ok(())
    }
}

/// Time after which a wavepacket emitted with speed `group_velocity` has
/// circled the `n_modes`-cell ring and returns to the emitter.
pub fn revival_horizon(n_modes: usize, group_velocity: f64) -> f64 {
    n_modes as f64 / group_velocity.abs()
}

struct EtdCoefficients {
    e: Vec<Complex64>,
    e2: Vec<Complex64>,
    q: Vec<Complex64>,
    f1: Vec<Complex64>,
    f2: Vec<Complex64>,
    f3: Vec<Complex64>,
}

fn factorials(n: usize) -> Vec<f64> {
    let mut f = vec![1.0; n + 1];
    for i in 1..=n {
        f[i] = f[i - 1] * i as f64;
    }
    f
}

/// `(q, f1, f2, f3)` divided by `h`, for `z = h L`.
fn etd_weights(z: Complex64, fact: &[f64]) -> [Complex64; 4] {
    const TERMS: usize = 30;
    if z.norm() < 1.0 {
        let mut q = ZERO;
        let mut f1 = ZERO;
        let mut f2 = ZERO;
        let mut f3 = ZERO;
        let mut zp = Complex64::new(1.0, 0.0);
        for n in 1..=TERMS {
            q += zp / (2f64.powi(n as i32) * fact[n]);
            zp *= z;
        }
        let mut zp = Complex64::new(1.0, 0.0);
        for n in 3..=TERMS {
            f1 += zp * (4.0 / fact[n] - 3.0 / fact[n - 1] + 1.0 / fact[n - 2]);
            f2 += zp * (1.0 / fact[n - 1] - 2.0 / fact[n]);
            f3 += zp * (4.0 / fact[n] - 1.0 / fact[n - 1]);
            zp *= z;
        }
        [q, f1, f2, f3]
    } else {
        let ez = z.exp();
        let z3 = z * z * z;
        [
            ((z * 0.5).exp() - 1.0) / z,
            (-4.0 - z + ez * (4.0 - 3.0 * z + z * z)) / z3,
            (2.0 + z + ez * (z - 2.0)) / z3,
            (-4.0 - 3.0 * z - z * z + ez * (4.0 - z)) / z3,
        ]
    }
}

impl EtdCoefficients {
    fn new(h: &ArrowheadHamiltonian, dt: f64) -> Self {
        let fact = factorials(32);
        let d = h.dimension();
        let mut c = Self {
            e: Vec::with_capacity(d),
            e2: Vec::with_capacity(d),
            q: Vec::with_capacity(d),
            f1: Vec::with_capacity(d),
            f2: Vec::with_capacity(d),
            f3: Vec::with_capacity(d),
        };
        for i in 0..d {
            let z = -I * h.diagonal(i) * dt;
            let [q, f1, f2, f3] = etd_weights(z, &fact);
            c.e.push(z.exp());
            c.e2.push((z * 0.5).exp());
            c.q.push(q * dt);
            c.f1.push(f1 * dt);
            c.f2.push(f2 * dt);
            c.f3.push(f3 * dt);
        }
        c
    }
}

struct Workspace {
    nu: Vec<Complex64>,
    a: Vec<Complex64>,
    na: Vec<Complex64>,
    b: Vec<Complex64>,
    nb: Vec<Complex64>,
    c: Vec<Complex64>,
    nc: Vec<Complex64>,
}

impl Workspace {
    fn new(d: usize) -> Self {
        let z = || vec![ZERO; d];
        Self {
            nu: z(),
            a: z(),
            na: z(),
            b: z(),
            nb: z(),
            c: z(),
            nc: z(),
        }
    }
}

/// `out = -i V x`.
fn coupling_rhs(h: &ArrowheadHamiltonian, x: &[Complex64], out: &mut [Complex64]) {
    h.apply_coupling(x, out);
    out.iter_mut().for_each(|v| *v *= -I);
}

/// `out = -i H x`.
fn full_rhs(h: &ArrowheadHamiltonian, x: &[Complex64], out: &mut [Complex64]) {
    h.apply(x, out);
    out.iter_mut().for_each(|v| *v *= -I);
}

fn etdrk4_step(h: &ArrowheadHamiltonian, co: &EtdCoefficients, u: &mut [Complex64], w: &mut Workspace) {
    let d = u.len();
    coupling_rhs(h, u, &mut w.nu);
    for i in 0..d {
        w.a[i] = co.e2[i] * u[i] + co.q[i] * w.nu[i];
    }
    coupling_rhs(h, &w.a, &mut w.na);
    for i in 0..d {
        w.b[i] = co.e2[i] * u[i] + co.q[i] * w.na[i];
    }
    coupling_rhs(h, &w.b, &mut w.nb);
    for i in 0..d {
        w.c[i] = co.e2[i] * w.a[i] + co.q[i] * (2.0 * w.nb[i] - w.nu[i]);
    }
    coupling_rhs(h, &w.c, &mut w.nc);
    for i in 0..d {
        u[i] = co.e[i] * u[i] + co.f1[i] * w.nu[i] + 2.0 * co.f2[i] * (w.na[i] + w.nb[i]) + co.f3[i] * w.nc[i];
    }
}

fn rk4_step(h: &ArrowheadHamiltonian, dt: f64, u: &mut [Complex64], w: &mut Workspace) {
    let d = u.len();
    // k1 -> nu, k2 -> na, k3 -> nb, k4 -> nc
    full_rhs(h, u, &mut w.nu);
    for i in 0..d {
        w.a[i] = u[i] + 0.5 * dt * w.nu[i];
    }
    full_rhs(h, &w.a, &mut w.na);
    for i in 0..d {
        w.a[i] = u[i] + 0.5 * dt * w.na[i];
    }
    full_rhs(h, &w.a, &mut w.nb);
    for i in 0..d {
        w.a[i] = u[i] + dt * w.nb[i];
    }
    full_rhs(h, &w.a, &mut w.nc);
    for i in 0..d {
        u[i] += dt / 6.0 * (w.nu[i] + 2.0 * (w.na[i] + w.nb[i]) + w.nc[i]);
    }
}

enum Stepper {
    Etd(EtdCoefficients),
    Rk4,
    Collocation(Collocation),
}

fn record(h: &ArrowheadHamiltonian, t: f64, u: &[Complex64], traj: &mut Trajectory, tol: f64) -> Result<()> {
    let nf = h.n_field();
    let field: f64 = u[..nf].iter().map(|c| c.norm_sqr()).sum();
    let mut norm = field;
    for (q, series) in traj.atom_amplitudes.iter_mut().enumerate() {
        let c = u[nf + q];
        if !(c.re.is_finite() && c.im.is_finite()) {
            return Err(Error::NonFinite { t });
        }
        norm += c.norm_sqr();
        series.push(c);
    }
    if !norm.is_finite() {
        return Err(Error::NonFinite { t });
    }
    let drift = (norm - 1.0).abs();
    if drift > tol {
        return Err(Error::NormDrift {
            t,
            drift,
            tolerance: tol,
        });
    }
    traj.t.push(t);
    traj.mode_population.push(field);
    traj.norm.push(norm);
    traj.energy.push(h.expectation(u));
    Ok(())
}

/// Propagate `i dψ/dt = H ψ` from `initial` up to `cfg.t_max`.
///
/// Fails with [`Error::NormDrift`] as soon as a recorded sample leaves the
/// norm tolerance; such a run is not returned.
pub fn evolve(h: &ArrowheadHamiltonian, initial: InitialState, cfg: &EvolveConfig) -> Result<Trajectory> {
    cfg.validate()?;
    cfg.check_stability(h)?;
    let InitialState::AtomExcited(q) = initial;
    if q >= h.n_atoms() {
        return Err(invalid("initial", format!("atom index {q} out of range")));
    }
    let d = h.dimension();
    let mut u = vec![ZERO; d];
    u[h.n_field() + q] = Complex64::new(1.0, 0.0);

    let n_steps = (cfg.t_max / cfg.dt - 1e-9).ceil() as usize;
    let mut traj = Trajectory {
        atom_amplitudes: vec![Vec::with_capacity(n_steps / cfg.record_stride + 2); h.n_atoms()],
        ..Default::default()
    };
    record(h, 0.0, &u, &mut traj, cfg.tolerance)?;

    let mut work = Workspace::new(d);
    let mut stepper = match cfg.integrator {
        Integrator::Etdrk4 => Stepper::Etd(EtdCoefficients::new(h, cfg.dt)),
        Integrator::Rk4 => Stepper::Rk4,
        Integrator::Collocation => Stepper::Collocation(Collocation::new(h, cfg.dt)),
    };
    for step in 1..=n_steps {
        match &mut stepper {
            Stepper::Etd(co) => etdrk4_step(h, co, &mut u, &mut work),
            Stepper::Rk4 => rk4_step(h, cfg.dt, &mut u, &mut work),
            Stepper::Collocation(c) => c.step(h, &mut u),
        }
        if step % cfg.record_stride == 0 || step == n_steps {
            record(h, step as f64 * cfg.dt, &u, &mut traj, cfg.tolerance)?;
        }
    }
    Ok(traj)
}

/// Exponential fit `|c_e(t)|² ≈ A e^{-Γ t}` over a time window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    /// Population decay rate `Γ` in units of `ω_r`.
    pub rate: f64,
    /// Fitted `ln A`.
    pub log_amplitude: f64,
    /// RMS residual of `ln |c_e|²`.
    pub residual: f64,
    pub samples: usize,
}

fn window_samples(traj: &Trajectory, atom: usize, window: (f64, f64)) -> Result<(Vec<f64>, Vec<f64>)> {
    let (t0, t1) = window;
    if !(t1 > t0) {
        return Err(Error::FitWindow(format!("empty window [{t0}, {t1}]")));
    }
    if atom >= traj.n_atoms() {
        return Err(invalid("atom", format!("index {atom} out of range")));
    }
    let mut ts = Vec::new();
    let mut ps = Vec::new();
    for (t, c) in traj.t.iter().zip(&traj.atom_amplitudes[atom]) {
        if *t >= t0 && *t <= t1 {
            ts.push(*t);
            ps.push(c.norm_sqr());
        }
    }
    if ts.len() < 3 {
        return Err(Error::FitWindow(format!("only {} samples in [{t0}, {t1}]", ts.len())));
    }
    if let Some(p) = ps.iter().find(|&&p| p <= 1e-12) {
        return Err(Error::FitWindow(format!("population {p:e} below 1e-12")));
    }
    Ok((ts, ps))
}

fn to_decay_fit(fit: LineFit, samples: usize) -> DecayFit {
    DecayFit {
        rate: -fit.slope,
        log_amplitude: fit.intercept,
        residual: fit.residual,
        samples,
    }
}

/// Least-squares decay rate of atom 0 over `window`.
///
/// The population must decrease strictly across the window; anything else
/// means the dynamics is not a simple exponential decay there.
pub fn fit_decay_rate(traj: &Trajectory, window: (f64, f64)) -> Result<DecayFit> {
    let (ts, ps) = window_samples(traj, 0, window)?;
    if ps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::NonMonotonicWindow {
            t0: window.0,
            t1: window.1,
        });
    }
    let logs: Vec<f64> = ps.iter().map(|p| p.ln()).collect();
    let fit = fit_line(&ts, &logs).ok_or_else(|| Error::FitWindow("degenerate window".into()))?;
    Ok(to_decay_fit(fit, ts.len()))
}

/// Same least-squares slope as [`fit_decay_rate`] without the monotonicity
/// requirement. Used for trapped emitters whose population only wobbles.
pub fn fit_log_slope(traj: &Trajectory, atom: usize, window: (f64, f64)) -> Result<DecayFit> {
    let (ts, ps) = window_samples(traj, atom, window)?;
    let logs: Vec<f64> = ps.iter().map(|p| p.ln()).collect();
    let fit = fit_line(&ts, &logs).ok_or_else(|| Error::FitWindow("degenerate window".into()))?;
    Ok(to_decay_fit(fit, ts.len()))
}

/// Relative change allowed between the tail average and the average over a
/// window twice as long.
pub const TAIL_STABILITY: f64 = 0.01;

fn tail_mean(p: &[f64], fraction: f64) -> f64 {
    let n = p.len();
    let start = ((n as f64) * (1.0 - fraction)).floor() as usize;
    let start = start.min(n - 1);
    let tail = &p[start..];
    tail.iter().sum::<f64>() / tail.len() as f64
}

/// Time-averaged `|c_e|²` of `atom` over the final `tail_fraction` of the run.
pub fn steady_population_of(traj: &Trajectory, atom: usize, tail_fraction: f64) -> Result<f64> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(invalid("tail_fraction", "must lie in (0, 1]"));
    }
    if atom >= traj.n_atoms() || traj.len() < 4 {
        return Err(invalid("trajectory", "too short or atom index out of range"));
    }
    let p = traj.population(atom);
    let value = tail_mean(&p, tail_fraction);
    if 2.0 * tail_fraction <= 1.0 {
        let wider = tail_mean(&p, 2.0 * tail_fraction);
        let drift = (value - wider).abs() / value.max(f64::MIN_POSITIVE);
        if drift > TAIL_STABILITY {
            return Err(Error::TailNotConverged { value, drift });
        }
    }
    Ok(value)
}

/// Steady population of atom 0, see [`steady_population_of`].
pub fn steady_population(traj: &Trajectory, tail_fraction: f64) -> Result<f64> {
    steady_population_of(traj, 0, tail_fraction)
}

/// Smallest peak-to-trough swing accepted by [`rabi_frequency`].
pub const MIN_RABI_CONTRAST: f64 = 0.5;

/// Dominant angular frequency of `|c_e|²` of the second atom (or of the only
/// atom for single-emitter runs).
///
/// The Hann-windowed periodogram peak is located with parabolic
/// interpolation of the log magnitude, then refined by a least-squares
/// sinusoid fit around it. For pure exchange dynamics the result is `2|J|`.
pub fn rabi_frequency(traj: &Trajectory) -> Result<f64> {
    let atom = if traj.n_atoms() >= 2 { 1 } else { 0 };
    let p = traj.population(atom);
    let n = p.len();
    if n < 16 {
        return Err(invalid("trajectory", "need at least 16 samples"));
    }
    let (lo, hi) = p.iter().fold((f64::MAX, f64::MIN), |(l, h), &v| (l.min(v), h.max(v)));
    let contrast = hi - lo;
    if contrast < MIN_RABI_CONTRAST {
        return Err(Error::LowContrast { contrast });
    }
    let dt = traj.t[1] - traj.t[0];
    let mean = p.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex64> = p
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let w = 0.5 - 0.5 * (2.0 * PI * i as f64 / (n - 1) as f64).cos();
            Complex64::new((v - mean) * w, 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let mags: Vec<f64> = buf[..n / 2].iter().map(|c| c.norm()).collect();
    let peak = (1..mags.len())
        .max_by(|&a, &b| mags[a].total_cmp(&mags[b]))
        .ok_or(Error::LowContrast { contrast })?;
    let mut bin = peak as f64;
    if peak + 1 < mags.len() {
        let (a, b, c) = (mags[peak - 1].ln(), mags[peak].ln(), mags[peak + 1].ln());
        let denom = a - 2.0 * b + c;
        if denom.abs() > 0.0 && denom.is_finite() {
            bin += 0.5 * (a - c) / denom;
        }
    }
    let span = n as f64 * dt;
    let estimate = 2.0 * PI * bin / span;
    let bin_width = 2.0 * PI / span;
    Ok(refine_sinusoid(&traj.t, &p, estimate - bin_width, estimate + bin_width))
}

/// Residual of the best fit `a + b cos ωt + c sin ωt`.
fn sinusoid_residual(t: &[f64], y: &[f64], w: f64) -> f64 {
    // normal equations for (a, b, c)
    let mut m = [[0.0f64; 3]; 3];
    let mut r = [0.0f64; 3];
    for (&ti, &yi) in t.iter().zip(y) {
        let basis = [1.0, (w * ti).cos(), (w * ti).sin()];
        for i in 0..3 {
            r[i] += basis[i] * yi;
            for j in 0..3 {
                m[i][j] += basis[i] * basis[j];
            }
        }
    }
    let mat = nalgebra::Matrix3::from_fn(|i, j| m[i][j]);
    let rhs = nalgebra::Vector3::new(r[0], r[1], r[2]);
    let Some(coef) = mat.lu().solve(&rhs) else {
        return f64::MAX;
    };
    t.iter()
        .zip(y)
        .map(|(&ti, &yi)| {
            let f = coef[0] + coef[1] * (w * ti).cos() + coef[2] * (w * ti).sin();
            (yi - f).powi(2)
        })
        .sum()
}

fn refine_sinusoid(t: &[f64], y: &[f64], lo: f64, hi: f64) -> f64 {
    let lo = lo.max(1e-3 * hi);
    let golden = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - golden * (b - a);
    let mut d = a + golden * (b - a);
    let mut fc = sinusoid_residual(t, y, c);
    let mut fd = sinusoid_residual(t, y, d);
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - golden * (b - a);
            fc = sinusoid_residual(t, y, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + golden * (b - a);
            fd = sinusoid_residual(t, y, d);
        }
        if (b - a) < 1e-12 * (a + b) {
            break;
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bandstructure::LatticeParams;
    use crate::hamiltonian::{build_hamiltonian, mode_grid, Emitters, Frame, GiantAtom};

    fn synthetic(t: Vec<f64>, pops: &[Vec<f64>]) -> Trajectory {
        let n = t.len();
        Trajectory {
            atom_amplitudes: pops
                .iter()
                .map(|p| p.iter().map(|v| Complex64::new(v.sqrt(), 0.0)).collect())
                .collect(),
            t,
            mode_population: vec![0.0; n],
            norm: vec![1.0; n],
            energy: vec![0.0; n],
        }
    }

    #[test]
    fn etd_weights_limit_and_continuity() {
        let fact = factorials(32);
        let w = etd_weights(Complex64::new(0.0, 0.0), &fact);
        assert!((w[0] - 0.5).norm() < 1e-15);
        for v in &w[1..] {
            assert!((v - 1.0 / 6.0).norm() < 1e-15);
        }
        // series and closed form agree across the switch-over radius
        let z_in = Complex64::new(0.0, -0.999_999);
        let z_out = Complex64::new(0.0, -1.000_001);
        let a = etd_weights(z_in, &fact);
        let b = etd_weights(z_out, &fact);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-6);
        }
    }

    #[test]
    fn exact_exponential_fit() {
        let t: Vec<f64> = (0..2000).map(|i| i as f64).collect();
        let p: Vec<f64> = t.iter().map(|t| (-0.001 * t).exp()).collect();
        let traj = synthetic(t, &[p]);
        let fit = fit_decay_rate(&traj, (100.0, 1500.0)).unwrap();
        assert!((fit.rate - 0.001).abs() < 1e-9);
    }

    #[test]
    fn fit_rejects_bad_windows() {
        let t: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let flat = synthetic(t.clone(), &[vec![1.0; 100]]);
        assert!(matches!(
            fit_decay_rate(&flat, (0.0, 50.0)),
            Err(Error::NonMonotonicWindow { .. })
        ));
        let tiny = synthetic(t.clone(), &[t.iter().map(|t| (-t).exp()).collect()]);
        assert!(matches!(fit_decay_rate(&tiny, (0.0, 90.0)), Err(Error::FitWindow(_))));
        assert!(fit_decay_rate(&flat, (10.0, 10.5)).is_err());
    }

    #[test]
    fn steady_population_of_constant_is_exact() {
        let t: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let traj = synthetic(t, &[vec![1.0; 100]]);
        assert_eq!(steady_population(&traj, 0.2).unwrap(), 1.0);
    }

    #[test]
    fn steady_population_detects_drift() {
        let t: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let p = t.iter().map(|t| (-0.002 * t).exp()).collect();
        let traj = synthetic(t, &[p]);
        assert!(matches!(
            steady_population(&traj, 0.2),
            Err(Error::TailNotConverged { .. })
        ));
    }

    #[test]
    fn rabi_of_known_signal() {
        let j = 1e-5;
        let t: Vec<f64> = (0..4000).map(|i| i as f64 * 250.0).collect();
        let pb: Vec<f64> = t.iter().map(|t| (j * t).sin().powi(2)).collect();
        let pa: Vec<f64> = pb.iter().map(|v| 1.0 - v).collect();
        let traj = synthetic(t, &[pa, pb]);
        let w = rabi_frequency(&traj).unwrap();
        assert!((w - 2.0 * j).abs() / (2.0 * j) < 1e-3, "{w}");
    }

    #[test]
    fn rabi_rejects_low_contrast() {
        let t: Vec<f64> = (0..400).map(|i| i as f64).collect();
        let pb: Vec<f64> = t.iter().map(|t| 0.01 * (0.1 * t).sin().powi(2)).collect();
        let traj = synthetic(t, &[pb.clone(), pb]);
        assert!(matches!(rabi_frequency(&traj), Err(Error::LowContrast { .. })));
    }

    #[test]
    fn decoupled_atom_stays_excited() {
        let params = LatticeParams::default();
        let grid = mode_grid(64, &params).unwrap();
        let atom = GiantAtom::new(0.6, 3, 0.0).unwrap();
        let h = build_hamiltonian(&params, &Emitters::Single(atom), &grid, Frame::Rotating).unwrap();
        let cfg = EvolveConfig {
            dt: 0.5,
            t_max: 200.0,
            ..Default::default()
        };
        let traj = evolve(&h, InitialState::AtomExcited(0), &cfg).unwrap();
        assert!(traj.population(0).iter().all(|&p| p == 1.0));
        assert_eq!(steady_population(&traj, 0.2).unwrap(), 1.0);
    }

    #[test]
    fn stability_guard_trips() {
        let params = LatticeParams::default();
        let grid = mode_grid(64, &params).unwrap();
        let atom = GiantAtom::new(0.6, 3, 1e-2).unwrap();
        let h = build_hamiltonian(&params, &Emitters::Single(atom), &grid, Frame::Rotating).unwrap();
        let cfg = EvolveConfig {
            dt: 10.0,
            t_max: 100.0,
            ..Default::default()
        };
        assert!(matches!(
            evolve(&h, InitialState::AtomExcited(0), &cfg),
            Err(Error::StabilityGuard { .. })
        ));
        let rk = EvolveConfig {
            dt: 0.05,
            integrator: Integrator::Rk4,
            ..cfg
        };
        // upper-band modes next to k = 0 sit far above ω_r
        assert!(matches!(
            evolve(&h, InitialState::AtomExcited(0), &rk),
            Err(Error::StabilityGuard {
                quantity: "dt * max|diag|",
                ..
            })
        ));
    }
}
