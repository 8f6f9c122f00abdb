mod commands;
mod config;

use clap::Parser;
use config::Settings;
use ncorr_core::error::NcorrError;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

/// Compare evaluators of band-limited n-correlation sums for CUE eigenangles and zeta zeros.
#[derive(Parser, Debug)]
#[command(name = "ncorr", version)]
struct Cli {
    /// Configuration file of `key = value` lines; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// compare, sample, verify-jstar, decay, zeta or plotdata.
    #[arg(long)]
    command: Option<String>,
    /// Correlation order.
    #[arg(long)]
    n: Option<String>,
    /// Matrix size.
    #[arg(long = "N")]
    n_matrix: Option<String>,
    /// Weight scale.
    #[arg(long = "T")]
    t_weight: Option<String>,
    #[arg(long)]
    q: Option<String>,
    #[arg(long)]
    phi_width: Option<String>,
    #[arg(long)]
    phi_eps: Option<String>,
    #[arg(long)]
    phi_amplitude: Option<String>,
    /// Band limit of each weight.
    #[arg(long)]
    g_width: Option<String>,
    /// Contour offset.
    #[arg(long)]
    delta: Option<String>,
    /// Contour truncation height.
    #[arg(long)]
    tmax: Option<String>,
    #[arg(long)]
    nodes: Option<String>,
    /// Number of Haar matrices for Monte Carlo.
    #[arg(long)]
    matrices: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// File of zeta ordinates, one per line.
    #[arg(long)]
    zeros: Option<String>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    tolerance: Option<String>,
    /// Run zeta n-correlation beyond the proven support range.
    #[arg(long)]
    force_conjectural: bool,
    /// Comma-separated evaluators for compare.
    #[arg(long)]
    methods: Option<String>,
    /// Comma-separated contour offsets for decay.
    #[arg(long)]
    deltas: Option<String>,
    /// Half-width of the Montgomery profile.
    #[arg(long)]
    profile_width: Option<String>,
}

fn settings(cli: &Cli) -> Result<Settings, NcorrError> {
    let mut s = match &cli.config {
        Some(p) => Settings::from_file(p)?,
        None => Settings::default(),
    };
    let flags = [
        ("command", &cli.command),
        ("n", &cli.n),
        ("N", &cli.n_matrix),
        ("T", &cli.t_weight),
        ("q", &cli.q),
        ("phi_width", &cli.phi_width),
        ("phi_eps", &cli.phi_eps),
        ("phi_amplitude", &cli.phi_amplitude),
        ("g_width", &cli.g_width),
        ("delta", &cli.delta),
        ("tmax", &cli.tmax),
        ("nodes", &cli.nodes),
        ("matrices", &cli.matrices),
        ("seed", &cli.seed),
        ("zeros", &cli.zeros),
        ("out", &cli.out),
        ("tolerance", &cli.tolerance),
        ("methods", &cli.methods),
        ("deltas", &cli.deltas),
        ("profile_width", &cli.profile_width),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            s.set(k, v)?;
        }
    }
    if cli.force_conjectural {
        s.set("force_conjectural", "true")?;
    }
    Ok(s)
}

fn exit_code(e: &NcorrError) -> u8 {
    match e {
        NcorrError::Numerical(_) | NcorrError::Tail { .. } | NcorrError::Pole { .. } | NcorrError::Strip { .. } => 3,
        _ => 2,
    }
}

fn emit(outcome: &commands::Outcome, out: Option<&PathBuf>) -> Result<(), NcorrError> {
    print!("{}", outcome.table);
    let mut lines = String::new();
    for r in &outcome.records {
        lines.push_str(&r.to_string());
        lines.push('\n');
    }
    match out {
        Some(p) if !outcome.owns_out => std::fs::write(p, lines)?,
        _ => std::io::stdout().write_all(lines.as_bytes())?,
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<bool, NcorrError> {
    let cfg = settings(cli)?.resolve()?;
    let outcome = commands::run(&cfg)?;
    emit(&outcome, cfg.out.as_ref())?;
    Ok(outcome.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("tolerance check failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
