use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use lhsm_qed::{sweep, HarnessError, Overrides, ScenarioConfig, ScenarioKind};

/// Run a giant-atom waveguide scenario and write CSV tables, SVG plots and a
/// manifest.
#[derive(Debug, Parser)]
#[command(name = "lhsm-qed", version)]
struct Cli {
    /// dispersion, decay_sweep, bound_state_sweep, detuning_sweep,
    /// two_atom_rabi or two_atom_distance_sweep
    scenario: ScenarioKind,
    /// JSON scenario config
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's `output_dir`, then `out`
    #[arg(long, env = "LHSM_QED_OUT")]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Modes per band (k-points for `dispersion`)
    #[arg(long)]
    n_modes: Option<usize>,
    /// Leave the timestamp out of the manifest so reruns are byte-identical
    #[arg(long)]
    seedless: bool,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    g: Option<f64>,
    #[arg(long)]
    ds: Option<u32>,
    #[arg(long)]
    dq: Option<u32>,
    #[arg(long)]
    omega_q: Option<f64>,
    #[arg(long)]
    k_r: Option<f64>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    let text = fs::read_to_string(&cli.config).map_err(|e| HarnessError::io(&cli.config, e))?;
    let mut cfg: ScenarioConfig = serde_json::from_str(&text)?;
    if cfg.scenario != cli.scenario {
        return Err(HarnessError::config(
            "scenario",
            format!(
                "command line asks for {} but the config describes {}",
                cli.scenario, cfg.scenario
            ),
        ));
    }
    cfg.apply(&Overrides {
        n_modes: cli.n_modes,
        epsilon: cli.epsilon,
        g: cli.g,
        d_s: cli.ds,
        d_q: cli.dq,
        omega_q: cli.omega_q,
        k_r: cli.k_r,
        t_max: cli.t_max,
        dt: cli.dt,
    })?;
    cfg.validate()?;
    let out = cli
        .out
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));

    let mut result = sweep(&cfg, cli.workers)?;
    if !cli.seedless {
        result.stamp();
    }
    result.write(&out)?;
    let failures = result.failures();
    for f in &failures {
        eprintln!("warning: {f}");
    }
    println!(
        "{}: wrote {} table(s) and {} plot(s) to {} (config {})",
        cfg.scenario,
        result.tables.len(),
        result.plots.len(),
        out.display(),
        &result.manifest.config_hash[..12]
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
