//! Scenario execution.

use std::collections::BTreeMap;

use lhsm_core::analytics::{
    dipole_coupling, lattice_dipole_coupling, markov_decay_rate, solve_bound_state, SelfEnergyContext, SelfEnergyMethod,
};
use lhsm_core::bandstructure::{
    band_edges, dispersion_table, group_velocity, omega, quadratic_band_edge, Band, EdgePoint, LatticeParams,
    QuadraticBandEdge,
};
use lhsm_core::dynamics::{
    evolve, fit_decay_rate, fit_log_slope, rabi_frequency, revival_horizon, steady_population, DecayFit, EvolveConfig,
    InitialState, Integrator, Trajectory, STABILITY_LIMIT,
};
use lhsm_core::hamiltonian::{build_hamiltonian, mode_grid, AtomPair, Emitters, Frame, GiantAtom};
use lhsm_core::numeric::fit_line;
use rayon::prelude::*;

use crate::config::{EvolveSpec, OmegaSpec, ScenarioConfig, ScenarioKind};
use crate::error::{Context, HarnessError};
use crate::output::{Cell, Manifest, Plot, ResultSet, Table};
use crate::plot::{LinePlot, Series};

type Result<T> = std::result::Result<T, HarnessError>;

/// Upper limit on recorded samples per trajectory when no stride is given.
const TARGET_SAMPLES: f64 = 20_000.0;
/// Fraction of the run averaged for steady populations.
const TAIL_FRACTION: f64 = 0.2;

/// Runs a scenario on the calling thread.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ResultSet> {
    sweep(cfg, 1)
}

/// Runs a scenario with sweep points spread over `workers` threads. Rows keep
/// the order of the sweep axis; failed points carry their error in the
/// `error` column and do not stop the run.
pub fn sweep(cfg: &ScenarioConfig, workers: usize) -> Result<ResultSet> {
    cfg.validate()?;
    if workers == 0 {
        return Err(HarnessError::config("workers", "must be >= 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| HarnessError::config("workers", e.to_string()))?;
    let out = pool.install(|| match cfg.scenario {
        ScenarioKind::Dispersion => dispersion(cfg),
        ScenarioKind::DecaySweep => decay_sweep(cfg),
        ScenarioKind::BoundStateSweep => bound_state_sweep(cfg),
        ScenarioKind::DetuningSweep => detuning_sweep(cfg),
        ScenarioKind::TwoAtomRabi => two_atom_rabi(cfg),
        ScenarioKind::TwoAtomDistanceSweep => distance_sweep(cfg),
    })?;
    let manifest = Manifest {
        scenario: cfg.scenario.name().to_string(),
        config_hash: cfg.hash(),
        timestamp: None,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        tables: out.tables.iter().map(|t| format!("{}.csv", t.name)).collect(),
        plots: out.plots.iter().map(|p| format!("{}.svg", p.name)).collect(),
        summary: out.summary,
    };
    Ok(ResultSet {
        manifest,
        config_json: cfg.to_canonical_json(),
        tables: out.tables,
        plots: out.plots,
    })
}

#[derive(Default)]
struct Output {
    tables: Vec<Table>,
    plots: Vec<Plot>,
    summary: BTreeMap<String, f64>,
}

impl Output {
    fn plot(&mut self, name: &str, p: LinePlot) {
        self.plots.push(Plot {
            name: name.into(),
            svg: p.render(),
        });
    }
}

/// Evaluates `f` on every axis value in parallel, keeping axis order.
fn map_axis<T: Send>(values: &[f64], f: impl Fn(f64) -> T + Sync) -> Vec<T> {
    values.par_iter().map(|&v| f(v)).collect()
}

fn error_cell(errors: &[String]) -> Cell {
    if errors.is_empty() {
        Cell::Empty
    } else {
        Cell::Text(errors.join("; "))
    }
}

/// Keeps the value, or records the error and yields `None`.
fn keep<T>(r: lhsm_core::Result<T>, what: &str, errors: &mut Vec<String>) -> Option<T> {
    r.map_err(|e| errors.push(format!("{what}: {e}"))).ok()
}

fn relative(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(a), Some(b)) if b != 0.0 => Some((a - b).abs() / b.abs()),
        _ => None,
    }
}

/// Step, duration and recording stride for one run, starting from the
/// scenario's defaults and the stability bound of `h`.
fn evolve_config(spec: &EvolveSpec, dt: f64, t_max: f64, coupling_norm: f64) -> EvolveConfig {
    let guard = 0.95 * STABILITY_LIMIT / coupling_norm.max(f64::MIN_POSITIVE);
    let dt = spec.dt.unwrap_or(dt.min(guard));
    let t_max = spec.t_max.unwrap_or(t_max);
    let steps = (t_max / dt).ceil();
    EvolveConfig {
        dt,
        t_max,
        tolerance: spec.tolerance.unwrap_or(1e-6),
        record_stride: spec
            .record_stride
            .unwrap_or_else(|| (steps / TARGET_SAMPLES).ceil().max(1.0) as usize),
        integrator: spec.integrator.unwrap_or(Integrator::Collocation),
    }
}

fn run_dynamics(
    params: &LatticeParams,
    emitters: Emitters,
    n: usize,
    spec: &EvolveSpec,
    dt: f64,
    t_max: f64,
) -> lhsm_core::Result<(Trajectory, EvolveConfig)> {
    let grid = mode_grid(n, params)?;
    let h = build_hamiltonian(params, &emitters, &grid, Frame::Rotating)?;
    let cfg = evolve_config(spec, dt, t_max, h.coupling_norm());
    Ok((evolve(&h, InitialState::AtomExcited(0), &cfg)?, cfg))
}

fn axis(cfg: &ScenarioConfig) -> (&str, &[f64]) {
    cfg.sweep_axis
        .as_ref()
        .map(|a| (a.parameter.as_str(), a.values.as_slice()))
        .unwrap_or(("", &[]))
}

fn dispersion(cfg: &ScenarioConfig) -> Result<Output> {
    let p = &cfg.lattice;
    let ctx = || "dispersion".to_string();
    let mut out = Output::default();
    let rows = dispersion_table(p, cfg.grid_n).context(ctx)?;
    let mut t = Table::new(
        "dispersion",
        &["k", "omega_upper", "omega_lower", "vg_upper", "vg_lower"],
    );
    for r in &rows {
        t.push(vec![
            Cell::Num(r.k),
            Cell::Num(r.omega_upper),
            Cell::Num(r.omega_lower),
            Cell::Num(r.vg_upper),
            Cell::Num(r.vg_lower),
        ]);
    }
    out.tables.push(t);

    let edges = band_edges(p).context(ctx)?;
    let s = &mut out.summary;
    s.insert("gap_width".into(), edges.gap_width);
    s.insert("lower_width".into(), edges.lower_width);
    s.insert("omega_upper_pi".into(), edges.omega_upper_pi);
    s.insert("omega_lower_pi".into(), edges.omega_lower_pi);
    s.insert("omega_lower_zero".into(), edges.omega_lower_zero);
    for (key, band, point) in [
        ("alpha_upper_pi", Band::Upper, EdgePoint::Pi),
        ("alpha_lower_pi", Band::Lower, EdgePoint::Pi),
        ("alpha_lower_zero", Band::Lower, EdgePoint::Zero),
    ] {
        s.insert(key.into(), quadratic_band_edge(band, point, p).context(ctx)?.alpha);
    }

    // the upper band diverges at k = 0; show it up to a few ω_r
    let cap = 3.0 * edges.omega_upper_pi.max(1.0);
    let upper: Vec<_> = rows
        .iter()
        .filter(|r| r.omega_upper <= cap)
        .map(|r| (r.k, r.omega_upper))
        .collect();
    let lower: Vec<_> = rows.iter().map(|r| (r.k, r.omega_lower)).collect();
    out.plot(
        "band_diagram",
        LinePlot::new(
            &format!("Band structure, epsilon = {}", p.epsilon),
            "k",
            "omega / omega_r",
        )
        .with(Series::markers("upper band", upper))
        .with(Series::markers("lower band", lower)),
    );

    let (param, values) = axis(cfg);
    if param == "epsilon" {
        let rows = map_axis(values, |eps| {
            let mut errors = Vec::new();
            let edges = keep(
                LatticeParams::new(p.capacitance, p.inductance, eps).and_then(|q| band_edges(&q)),
                "band edges",
                &mut errors,
            );
            vec![
                Cell::Num(eps),
                Cell::opt(edges.map(|e| e.gap_width)),
                Cell::opt(edges.map(|e| e.lower_width)),
                error_cell(&errors),
            ]
        });
        let mut t = Table::new("gap", &["epsilon", "gap_width", "lower_width", "error"]);
        rows.into_iter().for_each(|r| t.push(r));
        let pts = points(&t, "epsilon", "gap_width");
        out.tables.push(t);
        out.plot(
            "gap_vs_epsilon",
            LinePlot::new("Band gap", "epsilon", "gap width / omega_r").with(Series::line("gap", pts)),
        );
    }
    Ok(out)
}

fn points(t: &Table, x: &str, y: &str) -> Vec<(f64, f64)> {
    t.column(x)
        .into_iter()
        .zip(t.column(y))
        .filter_map(|(a, b)| Some((a?, b?)))
        .collect()
}

fn decay_sweep(cfg: &ScenarioConfig) -> Result<Output> {
    let atoms = cfg.atoms()?;
    let Some(OmegaSpec::Resonant { k_r, band }) = atoms.omega_q else {
        unreachable!("validated")
    };
    let (param, values) = axis(cfg);
    let n = cfg.grid_n;
    let rows = map_axis(values, |v| {
        let (mut d_s, mut g, mut k, mut p) = (atoms.d_s, atoms.g, k_r, cfg.lattice);
        match param {
            "d_s" => d_s = v as u32,
            "g" => g = v,
            "k_r" => k = v,
            "epsilon" => p.epsilon = v,
            _ => unreachable!("validated"),
        }
        let mut errors = Vec::new();
        let point = (|| {
            let w = omega(k, band, &p)?;
            let atom = GiantAtom::new(w, d_s, g)?;
            let vg = group_velocity(k, band, &p)?;
            Ok::<_, lhsm_core::Error>((w, atom, vg))
        })();
        let Some((w, atom, vg)) = keep(point, "setup", &mut errors) else {
            let mut row = vec![Cell::Num(v), Cell::Int(d_s.into()), Cell::Num(g), Cell::Num(k)];
            row.extend(std::iter::repeat_n(Cell::Empty, 9));
            row.push(error_cell(&errors));
            return row;
        };
        let analytic = keep(markov_decay_rate(&p, &atom, k, band, n), "markov", &mut errors);

        let horizon = 0.95 * revival_horizon(n, vg);
        let gamma = analytic.unwrap_or(0.0);
        let auto_end = if gamma > 0.0 {
            (2.5 / gamma).min(horizon)
        } else {
            horizon
        };
        let run = keep(
            run_dynamics(&p, Emitters::Single(atom), n, &cfg.evolve, 0.5, auto_end),
            "dynamics",
            &mut errors,
        );
        let (mut numeric, mut method, mut window, mut drift) = (None, "", (f64::NAN, f64::NAN), None);
        if let Some((traj, ec)) = run {
            let end = auto_end.min(ec.t_max);
            let start = if gamma > 0.0 && 0.5 / gamma < 0.5 * end {
                0.5 / gamma
            } else {
                0.05 * end
            };
            window = (start, end);
            drift = Some(traj.max_norm_drift());
            let fit: Option<DecayFit> = match fit_decay_rate(&traj, window) {
                Ok(f) => {
                    method = "exponential";
                    Some(f)
                }
                Err(lhsm_core::Error::NonMonotonicWindow { .. }) => {
                    method = "log_slope";
                    keep(fit_log_slope(&traj, 0, window), "fit", &mut errors)
                }
                Err(e) => {
                    errors.push(format!("fit: {e}"));
                    None
                }
            };
            numeric = fit.map(|f| f.rate);
        }
        vec![
            Cell::Num(v),
            Cell::Int(d_s.into()),
            Cell::Num(g),
            Cell::Num(k),
            Cell::Num(w),
            Cell::opt(numeric),
            Cell::opt(analytic),
            Cell::opt(relative(numeric, analytic).filter(|_| gamma > 0.0)),
            Cell::Text(method.into()),
            Cell::Num(window.0),
            Cell::Num(window.1),
            Cell::opt(drift),
            Cell::Num(vg),
            error_cell(&errors),
        ]
    });
    let mut t = Table::new(
        "decay",
        &[
            param,
            "d_s",
            "g",
            "k_r",
            "omega_q",
            "gamma_numeric",
            "gamma_analytic",
            "relative_error",
            "fit_method",
            "window_start",
            "window_end",
            "max_norm_drift",
            "group_velocity",
            "error",
        ],
    );
    t.columns[0] = format!("sweep_{param}");
    rows.into_iter().for_each(|r| t.push(r));

    let mut out = Output::default();
    let x = t.columns[0].clone();
    let max = t.column("gamma_numeric").into_iter().flatten().fold(0.0, f64::max);
    out.summary.insert("gamma_numeric_max".into(), max);
    out.plot(
        "decay_rates",
        LinePlot::new(
            &format!("Decay rate, {} band, k_r = {k_r:.4}", band.name()),
            param,
            "Gamma / omega_r",
        )
        .with(Series::markers("numerical", points(&t, &x, "gamma_numeric")))
        .with(Series::line("Markov", points(&t, &x, "gamma_analytic"))),
    );
    out.tables.push(t);
    Ok(out)
}

/// Residue and dynamics for one emitter next to `edge`.
struct BoundPoint {
    residue: Option<f64>,
    residue_quadrature: Option<f64>,
    pole_energy: Option<f64>,
    steady: Option<f64>,
    drift: Option<f64>,
}

fn bound_point(
    cfg: &ScenarioConfig,
    p: &LatticeParams,
    edge: QuadraticBandEdge,
    atom: GiantAtom,
    t_max: f64,
    errors: &mut Vec<String>,
) -> BoundPoint {
    let n = cfg.grid_n;
    let mut out = BoundPoint {
        residue: None,
        residue_quadrature: None,
        pole_energy: None,
        steady: None,
        drift: None,
    };
    if let Some(ctx) = keep(SelfEnergyContext::new(edge, atom, n), "context", errors) {
        let closed = keep(
            solve_bound_state(&ctx, SelfEnergyMethod::ClosedForm),
            "closed form",
            errors,
        );
        out.residue = closed.map(|b| b.steady_population);
        out.pole_energy = closed.map(|b| b.energy());
        out.residue_quadrature = keep(
            solve_bound_state(&ctx, SelfEnergyMethod::Quadrature),
            "quadrature",
            errors,
        )
        .map(|b| b.steady_population);
    }
    if let Some((traj, _)) = keep(
        run_dynamics(p, Emitters::Single(atom), n, &cfg.evolve, 1.0, t_max),
        "dynamics",
        errors,
    ) {
        out.drift = Some(traj.max_norm_drift());
        out.steady = keep(steady_population(&traj, TAIL_FRACTION), "steady population", errors);
    }
    out
}

fn bound_state_sweep(cfg: &ScenarioConfig) -> Result<Output> {
    let atoms = cfg.atoms()?;
    let resolved = atoms.omega_q.expect("validated").resolve(&cfg.lattice)?;
    let edge = resolved.edge.expect("validated");
    let (param, values) = axis(cfg);
    let rows = map_axis(values, |v| {
        let (mut d_s, mut g) = (atoms.d_s, atoms.g);
        match param {
            "d_s" => d_s = v as u32,
            "g" => g = v,
            _ => unreachable!("validated"),
        }
        let mut errors = Vec::new();
        let atom = GiantAtom::new(resolved.omega_q, d_s, g);
        let (b, beta) = match keep(atom, "atom", &mut errors) {
            Some(atom) => {
                let b = bound_point(cfg, &cfg.lattice, edge, atom, 5000.0, &mut errors);
                let beta = SelfEnergyContext::new(edge, atom, cfg.grid_n).ok().map(|c| c.beta());
                (Some(b), beta)
            }
            None => (None, None),
        };
        let b = b.as_ref();
        vec![
            Cell::Num(v),
            Cell::Int(d_s.into()),
            Cell::Num(g),
            Cell::Num(resolved.omega_q),
            Cell::Num(edge.orientation.sign() * (edge.edge_freq - resolved.omega_q)),
            Cell::opt(beta),
            Cell::opt(b.and_then(|b| b.pole_energy)),
            Cell::opt(b.and_then(|b| b.residue)),
            Cell::opt(b.and_then(|b| b.residue_quadrature)),
            Cell::opt(b.and_then(|b| b.steady)),
            Cell::opt(b.and_then(|b| relative(b.residue, b.steady))),
            Cell::opt(b.and_then(|b| b.drift)),
            error_cell(&errors),
        ]
    });
    let mut t = Table::new(
        "bound_state",
        &[
            param,
            "d_s",
            "g",
            "omega_q",
            "detuning",
            "beta",
            "pole_energy",
            "residue_population",
            "residue_population_quadrature",
            "steady_population",
            "relative_error",
            "max_norm_drift",
            "error",
        ],
    );
    t.columns[0] = format!("sweep_{param}");
    rows.into_iter().for_each(|r| t.push(r));

    let mut out = Output::default();
    out.summary.insert("omega_q".into(), resolved.omega_q);
    out.summary.insert("edge_freq".into(), edge.edge_freq);
    out.summary.insert("alpha".into(), edge.alpha);
    let x = t.columns[0].clone();
    out.plot(
        "bound_state",
        LinePlot::new(
            &format!("Steady population, omega_q = {:.6}", resolved.omega_q),
            param,
            "steady population",
        )
        .with(Series::markers("dynamics", points(&t, &x, "steady_population")))
        .with(Series::line("residue", points(&t, &x, "residue_population"))),
    );
    out.tables.push(t);
    Ok(out)
}

fn detuning_sweep(cfg: &ScenarioConfig) -> Result<Output> {
    let atoms = cfg.atoms()?;
    let p = &cfg.lattice;
    let ctx = || "detuning sweep".to_string();
    let gap = band_edges(p).context(ctx)?.gap_width;
    let upper = quadratic_band_edge(Band::Upper, EdgePoint::Pi, p).context(ctx)?;
    let lower = quadratic_band_edge(Band::Lower, EdgePoint::Pi, p).context(ctx)?;
    let (param, values) = axis(cfg);
    let rows = map_axis(values, |v| {
        let detuning = if param == "fraction" { v * gap } else { v };
        let mut errors = Vec::new();
        let mut row = vec![Cell::Num(v), Cell::Num(detuning), Cell::Num(detuning / gap)];
        for (name, edge) in [("upper", upper), ("lower", lower)] {
            let w = edge.edge_freq - edge.orientation.sign() * detuning;
            let mut local = Vec::new();
            let b = keep(GiantAtom::new(w, atoms.d_s, atoms.g), "atom", &mut local)
                .map(|atom| bound_point(cfg, p, edge, atom, 8000.0, &mut local));
            errors.extend(local.into_iter().map(|e| format!("{name} {e}")));
            row.push(Cell::opt(b.as_ref().and_then(|b| b.residue)));
            row.push(Cell::opt(b.as_ref().and_then(|b| b.steady)));
        }
        row.push(error_cell(&errors));
        row
    });
    let mut t = Table::new(
        "detuning",
        &[
            param,
            "detuning",
            "gap_fraction",
            "upper_residue_population",
            "upper_steady_population",
            "lower_residue_population",
            "lower_steady_population",
            "error",
        ],
    );
    t.columns[0] = format!("sweep_{param}");
    rows.into_iter().for_each(|r| t.push(r));

    let mut out = Output::default();
    out.summary.insert("gap_width".into(), gap);
    out.plot(
        "detuning",
        LinePlot::new(
            &format!("Steady population, d_s = {}", atoms.d_s),
            "detuning / omega_r",
            "steady population",
        )
        .with(Series::markers(
            "upper edge, dynamics",
            points(&t, "detuning", "upper_steady_population"),
        ))
        .with(Series::line(
            "upper edge, residue",
            points(&t, "detuning", "upper_residue_population"),
        ))
        .with(Series::markers(
            "lower edge, dynamics",
            points(&t, "detuning", "lower_steady_population"),
        ))
        .with(Series::line(
            "lower edge, residue",
            points(&t, "detuning", "lower_residue_population"),
        )),
    );
    out.tables.push(t);
    Ok(out)
}

/// Exchange couplings of a pair from both edge formulas and the lattice sum.
fn exchange(cfg: &ScenarioConfig, d_q: u32, errors: &mut Vec<String>) -> Result<(Option<[Option<f64>; 3]>, f64)> {
    let atoms = cfg.atoms()?;
    let resolved = atoms.omega_q.expect("validated").resolve(&cfg.lattice)?;
    let edge = resolved.edge.expect("validated");
    let ctx = || format!("exchange coupling at d_q = {d_q}");
    let atom = GiantAtom::new(resolved.omega_q, atoms.d_s, atoms.g).context(ctx)?;
    let sctx = SelfEnergyContext::new(edge, atom, cfg.grid_n).context(ctx)?;
    let Some(pair) = keep(AtomPair::new(atom, d_q), "pair", errors) else {
        return Ok((None, sctx.beta()));
    };
    let closed = keep(
        dipole_coupling(&pair, &sctx, SelfEnergyMethod::ClosedForm),
        "closed form",
        errors,
    );
    let quad = keep(
        dipole_coupling(&pair, &sctx, SelfEnergyMethod::Quadrature),
        "quadrature",
        errors,
    );
    let lattice = keep(
        mode_grid(cfg.grid_n, &cfg.lattice).and_then(|g| lattice_dipole_coupling(&pair, &g)),
        "lattice sum",
        errors,
    );
    Ok((Some([closed, quad, lattice]), sctx.beta()))
}

fn two_atom_rabi(cfg: &ScenarioConfig) -> Result<Output> {
    let atoms = cfg.atoms()?;
    let d_q = atoms.d_q.expect("validated");
    let resolved = atoms.omega_q.expect("validated").resolve(&cfg.lattice)?;
    let ctx = || format!("two-atom run at d_q = {d_q}");
    let mut errors = Vec::new();
    let (j, beta) = exchange(cfg, d_q, &mut errors)?;
    let [j_closed, j_quad, j_lattice] = j.unwrap_or([None; 3]);

    let atom = GiantAtom::new(resolved.omega_q, atoms.d_s, atoms.g).context(ctx)?;
    let pair = AtomPair::new(atom, d_q).context(ctx)?;
    let (traj, _) =
        run_dynamics(&cfg.lattice, Emitters::Pair(pair), cfg.grid_n, &cfg.evolve, 4.0, 2.0e6).context(ctx)?;
    let rabi = rabi_frequency(&traj).context(ctx)?;
    let pa = traj.population(0);
    let pb = traj.population(1);
    let (lo, hi) = pb.iter().fold((f64::MAX, f64::MIN), |(l, h), &v| (l.min(v), h.max(v)));

    let mut out = Output::default();
    let s = &mut out.summary;
    s.insert("omega_q".into(), resolved.omega_q);
    s.insert("beta".into(), beta);
    s.insert("rabi_frequency".into(), rabi);
    s.insert("contrast".into(), hi - lo);
    s.insert("max_norm_drift".into(), traj.max_norm_drift());
    for (key, v) in [
        ("j_closed", j_closed),
        ("j_quadrature", j_quad),
        ("j_lattice", j_lattice),
    ] {
        if let Some(v) = v {
            s.insert(key.into(), v);
        }
    }
    for (key, j) in [("closed", j_closed), ("quadrature", j_quad), ("lattice", j_lattice)] {
        if let Some(j) = j.filter(|j| *j != 0.0) {
            s.insert(
                format!("relative_error_{key}"),
                (rabi - 2.0 * j.abs()).abs() / (2.0 * j.abs()),
            );
        }
    }

    let mut t = Table::new("trajectory", &["t", "population_a", "population_b", "norm"]);
    for i in 0..traj.len() {
        t.push(vec![
            Cell::Num(traj.t[i]),
            Cell::Num(pa[i]),
            Cell::Num(pb[i]),
            Cell::Num(traj.norm[i]),
        ]);
    }
    let series = |p: &[f64]| -> Vec<(f64, f64)> { traj.t.iter().copied().zip(p.iter().copied()).collect() };
    out.plot(
        "rabi",
        LinePlot::new(
            &format!("Exchange dynamics, d_s = {}, D_q = {d_q}", atoms.d_s),
            "t * omega_r",
            "population",
        )
        .with(Series::line("atom a", series(&pa)))
        .with(Series::line("atom b", series(&pb))),
    );
    out.tables.push(t);
    Ok(out)
}

fn distance_sweep(cfg: &ScenarioConfig) -> Result<Output> {
    let (_, values) = axis(cfg);
    let rows = map_axis(values, |v| -> Result<Vec<Cell>> {
        let d_q = v as u32;
        let mut errors = Vec::new();
        let (j, _) = exchange(cfg, d_q, &mut errors)?;
        let [a, b, c] = j.unwrap_or([None; 3]);
        let ln = |j: Option<f64>| j.filter(|j| *j != 0.0).map(|j| j.abs().ln());
        Ok(vec![
            Cell::Int(d_q.into()),
            Cell::opt(a),
            Cell::opt(b),
            Cell::opt(c),
            Cell::opt(ln(a)),
            Cell::opt(ln(b)),
            Cell::opt(ln(c)),
            error_cell(&errors),
        ])
    });
    let mut t = Table::new(
        "exchange",
        &[
            "d_q",
            "j_closed",
            "j_quadrature",
            "j_lattice",
            "ln_abs_j_closed",
            "ln_abs_j_quadrature",
            "ln_abs_j_lattice",
            "error",
        ],
    );
    for r in rows {
        t.push(r?);
    }

    let mut out = Output::default();
    let (_, beta) = exchange(cfg, 1, &mut Vec::new())?;
    out.summary.insert("beta".into(), beta);
    for name in ["closed", "quadrature", "lattice"] {
        let pts = points(&t, "d_q", &format!("ln_abs_j_{name}"));
        let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        if let Some(fit) = fit_line(&x, &y) {
            out.summary.insert(format!("slope_{name}"), fit.slope);
        }
    }
    out.plot(
        "exchange",
        LinePlot::new("Exchange coupling", "D_q", "ln |J| (J in omega_r)")
            .with(Series::line("closed form", points(&t, "d_q", "ln_abs_j_closed")))
            .with(Series::markers("quadrature", points(&t, "d_q", "ln_abs_j_quadrature")))
            .with(Series::markers("lattice sum", points(&t, "d_q", "ln_abs_j_lattice"))),
    );
    out.tables.push(t);
    Ok(out)
}
