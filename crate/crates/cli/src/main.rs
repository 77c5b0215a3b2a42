//! `nsbox`: classify, evaluate and simulate no-signaling boxes.
//!
//! Exit codes are stable: `check` returns 0 (local), 10 (nonlocal but
//! no-signaling), 20 (signaling) or 2 (invalid table); every subcommand
//! returns 1 on unreadable or malformed input and 2 on out-of-range flags.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "nsbox", version, about = "No-signaling correlations toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate a box file and decide no-signaling and locality.
    Check {
        file: PathBuf,
        /// Tolerance for float boxes (normalization and no-signaling).
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// CHSH mark of a box file, or of a two-qubit state under a setting family.
    Chsh {
        #[arg(conflicts_with_all = ["state", "settings"], required_unless_present = "state")]
        file: Option<PathBuf>,
        /// Schmidt angle θ in [0, π/4].
        #[arg(long, requires = "settings", allow_negative_numbers = true)]
        state: Option<f64>,
        /// Family name (chsh-optimal, bb84, chsh-protocol) or JSON family file.
        #[arg(long, requires = "state")]
        settings: Option<String>,
        /// Frame of the state: `singlet` (cos θ|01⟩ − sin θ|10⟩) or
        /// `schmidt` (cos θ|00⟩ + sin θ|11⟩).
        #[arg(long, value_enum, default_value_t = Frame::Singlet)]
        frame: Frame,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Monte Carlo run of a simulation model checked against its oracle.
    Simulate {
        #[arg(long)]
        model: String,
        /// Rounds per setting; total rounds for `coin-game`.
        #[arg(long)]
        rounds: u64,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 4.0)]
        sigma: f64,
        /// Family name, `random-K`, or a JSON file of `{"a": [..], "b": [..]}`
        /// pairs. Only used by models measuring directions.
        #[arg(long)]
        settings: Option<String>,
        /// Write the JSON-lines transcript here.
        #[arg(long)]
        transcript: Option<PathBuf>,
        /// Worker threads (0 = all cores); results do not depend on it.
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Key advantage of the isotropic family against the individual attack.
    Keyrate {
        #[arg(long, default_value_t = 0.0)]
        pmin: f64,
        #[arg(long, default_value_t = 1.0)]
        pmax: f64,
        #[arg(long, default_value_t = 101)]
        steps: usize,
        /// Bisection bracket width for the crossing.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Largest Alice–Charly mark compatible with a given Alice–Bob mark.
    Monogamy {
        /// Step of the M_AB grid, in (0, 1]; decimals and `n/d` are exact.
        #[arg(long, default_value = "1/2")]
        grid: String,
        #[arg(long, default_value = "2")]
        from: String,
        #[arg(long, default_value = "4")]
        to: String,
    },
    /// BB84 versus CHSH-protocol data from the singlet.
    Compare,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Frame {
    Singlet,
    Schmidt,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Check { file, tol } => commands::check(&file, tol),
        Command::Chsh {
            file,
            state,
            settings,
            frame,
            tol,
        } => commands::chsh(file.as_deref(), state, settings.as_deref(), frame, tol),
        Command::Simulate {
            model,
            rounds,
            seed,
            sigma,
            settings,
            transcript,
            workers,
            format,
        } => commands::simulate(commands::SimulateArgs {
            model,
            rounds,
            seed,
            sigma,
            settings,
            transcript,
            workers,
            format,
        }),
        Command::Keyrate {
            pmin,
            pmax,
            steps,
            tol,
        } => commands::keyrate(pmin, pmax, steps, tol),
        Command::Monogamy { grid, from, to } => commands::monogamy(&grid, &from, &to),
        Command::Compare => commands::compare(),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("nsbox: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
