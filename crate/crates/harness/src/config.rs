//! JSON scenario configuration.
//!
//! ```json
//! {
//!   "scenario": "decay_sweep",
//!   "lattice": { "capacitance": 2.5e-11, "inductance": 2e-10, "epsilon": 1.4 },
//!   "atoms": { "omega_q": { "resonant": { "k_r": 1.5707963267948966, "band": "upper" } },
//!              "d_s": 0, "g": 1e-4 },
//!   "grid_n": 2000,
//!   "evolve": { "dt": 0.5 },
//!   "sweep_axis": { "parameter": "d_s", "values": [0, 1, 2, 3] }
//! }
//! ```

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use lhsm_core::bandstructure::{
    band_edges, omega, quadratic_band_edge, Band, EdgePoint, LatticeParams, QuadraticBandEdge,
};
use lhsm_core::dynamics::Integrator;
use lhsm_core::hamiltonian::MAX_MODES;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Context, HarnessError};

pub const DEFAULT_GRID: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Dispersion,
    DecaySweep,
    BoundStateSweep,
    DetuningSweep,
    TwoAtomRabi,
    TwoAtomDistanceSweep,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 6] = [
        Self::Dispersion,
        Self::DecaySweep,
        Self::BoundStateSweep,
        Self::DetuningSweep,
        Self::TwoAtomRabi,
        Self::TwoAtomDistanceSweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Dispersion => "dispersion",
            Self::DecaySweep => "decay_sweep",
            Self::BoundStateSweep => "bound_state_sweep",
            Self::DetuningSweep => "detuning_sweep",
            Self::TwoAtomRabi => "two_atom_rabi",
            Self::TwoAtomDistanceSweep => "two_atom_distance_sweep",
        }
    }

    /// Parameters accepted on the sweep axis.
    pub fn sweep_parameters(self) -> &'static [&'static str] {
        match self {
            Self::Dispersion => &["epsilon"],
            Self::DecaySweep => &["d_s", "g", "k_r", "epsilon"],
            Self::BoundStateSweep => &["d_s", "g"],
            Self::DetuningSweep => &["fraction", "detuning"],
            Self::TwoAtomRabi => &[],
            Self::TwoAtomDistanceSweep => &["d_q"],
        }
    }

    fn requires_sweep(self) -> bool {
        matches!(
            self,
            Self::DecaySweep | Self::BoundStateSweep | Self::DetuningSweep | Self::TwoAtomDistanceSweep
        )
    }

    fn is_pair(self) -> bool {
        matches!(self, Self::TwoAtomRabi | Self::TwoAtomDistanceSweep)
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted = s.replace('-', "_");
        Self::ALL.into_iter().find(|k| k.name() == wanted).ok_or_else(|| {
            let names: Vec<_> = Self::ALL.iter().map(|k| k.name()).collect();
            HarnessError::config(
                "scenario",
                format!("unknown scenario `{s}`, expected one of {}", names.join(", ")),
            )
        })
    }
}

/// How the emitter frequency is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmegaSpec {
    /// Fixed `ω_q` in units of `ω_r`.
    Explicit(f64),
    /// On resonance with `band` at wavevector `k_r`.
    Resonant { k_r: f64, band: Band },
    /// A distance `detuning` from an edge, on its gap side.
    Edge {
        band: Band,
        point: EdgePoint,
        detuning: f64,
    },
    /// Like `Edge`, with the detuning given as a fraction of the gap width
    /// (edges at `π`) or of the lower bandwidth (lower band at `0`).
    EdgeFraction {
        band: Band,
        point: EdgePoint,
        fraction: f64,
    },
    /// Centre of the gap between the bands at `π`.
    MidGap,
}

/// `ω_q` together with the band-edge context it belongs to, if any.
#[derive(Debug, Clone, Copy)]
pub struct ResolvedOmega {
    pub omega_q: f64,
    pub edge: Option<QuadraticBandEdge>,
    pub resonance: Option<(f64, Band)>,
}

impl OmegaSpec {
    pub fn resolve(&self, params: &LatticeParams) -> Result<ResolvedOmega, HarnessError> {
        let ctx = || "resolving omega_q".to_string();
        let edges = band_edges(params).context(ctx)?;
        match *self {
            OmegaSpec::Explicit(w) => {
                if !w.is_finite() {
                    return Err(HarnessError::config("atoms.omega_q", "must be finite"));
                }
                Ok(ResolvedOmega {
                    omega_q: w,
                    edge: nearest_gap_edge(w, params)?,
                    resonance: None,
                })
            }
            OmegaSpec::Resonant { k_r, band } => Ok(ResolvedOmega {
                omega_q: omega(k_r, band, params).context(ctx)?,
                edge: None,
                resonance: Some((k_r, band)),
            }),
            OmegaSpec::Edge { band, point, detuning } => {
                let edge = quadratic_band_edge(band, point, params).context(ctx)?;
                Ok(ResolvedOmega {
                    omega_q: edge.edge_freq - edge.orientation.sign() * detuning,
                    edge: Some(edge),
                    resonance: None,
                })
            }
            OmegaSpec::EdgeFraction { band, point, fraction } => {
                let edge = quadratic_band_edge(band, point, params).context(ctx)?;
                let width = match point {
                    EdgePoint::Pi => edges.gap_width,
                    EdgePoint::Zero => edges.lower_width,
                };
                Ok(ResolvedOmega {
                    omega_q: edge.edge_freq - edge.orientation.sign() * fraction * width,
                    edge: Some(edge),
                    resonance: None,
                })
            }
            OmegaSpec::MidGap => Ok(ResolvedOmega {
                omega_q: edges.mid_gap(),
                edge: Some(quadratic_band_edge(Band::Upper, EdgePoint::Pi, params).context(ctx)?),
                resonance: None,
            }),
        }
    }

    fn needs_edge(&self) -> bool {
        !matches!(self, OmegaSpec::Resonant { .. })
    }
}

/// Closest band edge that has `omega_q` on its gap side. Near-ties go to the
/// upper band, so mid-gap emitters use the edge at the upper band minimum.
pub fn nearest_gap_edge(omega_q: f64, params: &LatticeParams) -> Result<Option<QuadraticBandEdge>, HarnessError> {
    let mut best: Option<(f64, QuadraticBandEdge)> = None;
    for (band, point) in [
        (Band::Upper, EdgePoint::Pi),
        (Band::Lower, EdgePoint::Pi),
        (Band::Lower, EdgePoint::Zero),
    ] {
        let edge = quadratic_band_edge(band, point, params).context(|| "band edge".into())?;
        let detuning = edge.orientation.sign() * (edge.edge_freq - omega_q);
        if detuning > 0.0 && best.is_none_or(|(d, _)| detuning < d * (1.0 - 1e-9)) {
            best = Some((detuning, edge));
        }
    }
    Ok(best.map(|(_, e)| e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomsSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_q: Option<OmegaSpec>,
    #[serde(default)]
    pub d_s: u32,
    pub g: f64,
    /// Separation of the two atoms; present only for two-atom scenarios.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_q: Option<u32>,
}

/// Time-stepping settings. Missing fields get scenario-specific defaults.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_stride: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrator: Option<Integrator>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub parameter: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    #[serde(default)]
    pub lattice: LatticeParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<AtomsSpec>,
    /// Modes per band for dynamics, k-points for the dispersion table.
    #[serde(default = "default_grid")]
    pub grid_n: usize,
    #[serde(default)]
    pub evolve: EvolveSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_axis: Option<SweepAxis>,
    /// Where results go. Not part of the hashed configuration.
    #[serde(default, skip_serializing)]
    pub output_dir: Option<PathBuf>,
}

fn default_grid() -> usize {
    DEFAULT_GRID
}

/// Command-line overrides applied on top of a config file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub n_modes: Option<usize>,
    pub epsilon: Option<f64>,
    pub g: Option<f64>,
    pub d_s: Option<u32>,
    pub d_q: Option<u32>,
    pub omega_q: Option<f64>,
    pub k_r: Option<f64>,
    pub t_max: Option<f64>,
    pub dt: Option<f64>,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical serialisation; the config hash is taken over these bytes.
    pub fn to_canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serialises");
        s.push('\n');
        s
    }

    /// Lower-case hex SHA-256 of [`Self::to_canonical_json`].
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_canonical_json().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn atoms(&self) -> Result<&AtomsSpec, HarnessError> {
        self.atoms
            .as_ref()
            .ok_or_else(|| HarnessError::config("atoms", format!("required by {}", self.scenario)))
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), HarnessError> {
        if let Some(n) = o.n_modes {
            self.grid_n = n;
        }
        if let Some(e) = o.epsilon {
            self.lattice.epsilon = e;
        }
        if let Some(t) = o.t_max {
            self.evolve.t_max = Some(t);
        }
        if let Some(dt) = o.dt {
            self.evolve.dt = Some(dt);
        }
        let touches_atoms =
            o.g.is_some() || o.d_s.is_some() || o.d_q.is_some() || o.omega_q.is_some() || o.k_r.is_some();
        if !touches_atoms {
            return Ok(());
        }
        let atoms = self
            .atoms
            .as_mut()
            .ok_or_else(|| HarnessError::config("atoms", "atom overrides given but the config has no atoms"))?;
        if let Some(g) = o.g {
            atoms.g = g;
        }
        if let Some(d) = o.d_s {
            atoms.d_s = d;
        }
        if let Some(d) = o.d_q {
            atoms.d_q = Some(d);
        }
        if let Some(w) = o.omega_q {
            atoms.omega_q = Some(OmegaSpec::Explicit(w));
        }
        if let Some(k) = o.k_r {
            let band = match atoms.omega_q {
                Some(OmegaSpec::Resonant { band, .. }) => band,
                _ => Band::Upper,
            };
            atoms.omega_q = Some(OmegaSpec::Resonant { k_r: k, band });
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let kind = self.scenario;
        self.lattice
            .validate()
            .map_err(|e| HarnessError::config("lattice", e.to_string()))?;
        if self.grid_n < 2 || !self.grid_n.is_multiple_of(2) || self.grid_n > MAX_MODES {
            return Err(HarnessError::config(
                "grid_n",
                format!("must be even and in [2, {MAX_MODES}], got {}", self.grid_n),
            ));
        }
        self.validate_evolve()?;
        self.validate_atoms()?;

        match (&self.sweep_axis, kind.requires_sweep()) {
            (None, true) => return Err(HarnessError::config("sweep_axis", format!("required by {kind}"))),
            (Some(_), false) if kind.sweep_parameters().is_empty() => {
                return Err(HarnessError::config("sweep_axis", format!("{kind} takes no sweep")))
            }
            _ => {}
        }
        if let Some(axis) = &self.sweep_axis {
            validate_axis(kind, axis)?;
        }
        Ok(())
    }

    fn validate_evolve(&self) -> Result<(), HarnessError> {
        let e = &self.evolve;
        for (field, v) in [
            ("evolve.dt", e.dt),
            ("evolve.t_max", e.t_max),
            ("evolve.tolerance", e.tolerance),
        ] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(HarnessError::config(field, format!("must be finite and > 0, got {v}")));
                }
            }
        }
        if e.record_stride == Some(0) {
            return Err(HarnessError::config("evolve.record_stride", "must be >= 1"));
        }
        Ok(())
    }

    fn validate_atoms(&self) -> Result<(), HarnessError> {
        let kind = self.scenario;
        if kind == ScenarioKind::Dispersion {
            return Ok(());
        }
        let atoms = self.atoms()?;
        if !(atoms.g.is_finite() && atoms.g >= 0.0) {
            return Err(HarnessError::config(
                "atoms.g",
                format!("must be finite and >= 0, got {}", atoms.g),
            ));
        }
        let swept = self.sweep_axis.as_ref().map(|a| a.parameter.as_str());
        match (kind.is_pair(), atoms.d_q) {
            (false, Some(_)) => return Err(HarnessError::config("atoms.d_q", format!("{kind} uses a single atom"))),
            (true, None) if swept != Some("d_q") => {
                return Err(HarnessError::config("atoms.d_q", format!("required by {kind}")))
            }
            (true, Some(0)) => return Err(HarnessError::config("atoms.d_q", "must be >= 1")),
            _ => {}
        }
        match (kind, atoms.omega_q) {
            (ScenarioKind::DetuningSweep, _) => Ok(()),
            (_, None) => Err(HarnessError::config("atoms.omega_q", format!("required by {kind}"))),
            (ScenarioKind::DecaySweep, Some(spec)) if spec.needs_edge() => Err(HarnessError::config(
                "atoms.omega_q",
                "decay_sweep needs a `resonant` frequency",
            )),
            (ScenarioKind::DecaySweep, Some(_)) => Ok(()),
            (_, Some(spec)) if !spec.needs_edge() => Err(HarnessError::config(
                "atoms.omega_q",
                format!("{kind} needs a frequency in a gap, not a `resonant` one"),
            )),
            (_, Some(spec)) => {
                let r = spec.resolve(&self.lattice)?;
                if r.edge.is_none() {
                    return Err(HarnessError::config(
                        "atoms.omega_q",
                        format!("{} lies inside a band", r.omega_q),
                    ));
                }
                Ok(())
            }
        }
    }
}

fn validate_axis(kind: ScenarioKind, axis: &SweepAxis) -> Result<(), HarnessError> {
    let allowed = kind.sweep_parameters();
    if !allowed.contains(&axis.parameter.as_str()) {
        return Err(HarnessError::config(
            "sweep_axis.parameter",
            format!(
                "`{}` is not a parameter of {kind}; expected one of {}",
                axis.parameter,
                allowed.join(", ")
            ),
        ));
    }
    if axis.values.is_empty() {
        return Err(HarnessError::config("sweep_axis.values", "must not be empty"));
    }
    for (i, &v) in axis.values.iter().enumerate() {
        let field = format!("sweep_axis.values[{i}]");
        if !v.is_finite() {
            return Err(HarnessError::config(field, "must be finite"));
        }
        match axis.parameter.as_str() {
            "d_s" | "d_q" => {
                let min = if axis.parameter == "d_q" { 1.0 } else { 0.0 };
                if v.fract() != 0.0 || v < min || v > u32::MAX as f64 {
                    return Err(HarnessError::config(
                        field,
                        format!("{} must be an integer >= {min}", axis.parameter),
                    ));
                }
            }
            "g" if v < 0.0 => return Err(HarnessError::config(field, "g must be >= 0")),
            "epsilon" | "fraction" | "detuning" if v <= 0.0 => {
                return Err(HarnessError::config(field, format!("{} must be > 0", axis.parameter)))
            }
            _ => {}
        }
    }
    Ok(())
}
