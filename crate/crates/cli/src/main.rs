use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ising_pert::cli::{self, ConfigError, Format, RunError, PRESETS};

#[derive(Parser, Debug)]
#[command(name = "ising-pert", version, about = "Perturbational product formulas for the Ising chain")]
struct Args {
    /// Print the built-in presets and exit.
    #[arg(long)]
    list_presets: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one experiment and write its data files.
    Run {
        /// TOML configuration; overrides preset values key by key.
        #[arg(long, required_unless_present = "preset")]
        config: Option<PathBuf>,
        /// Start from a built-in preset (fig1 to fig6).
        #[arg(long)]
        preset: Option<String>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

fn list_presets() {
    for p in PRESETS {
        println!("{:<6} {}", p.name, p.summary);
        for note in p.notes {
            println!("       {note}");
        }
    }
}

fn execute(
    config: Option<PathBuf>,
    preset: Option<String>,
    out: Option<PathBuf>,
    format: Option<FormatArg>,
) -> Result<(), RunError> {
    let source = config
        .as_ref()
        .map(|p| {
            std::fs::read_to_string(p)
                .map_err(|e| ConfigError::Validation(format!("cannot read {}: {e}", p.display())))
        })
        .transpose()?;
    let (mut run_config, label, preset) = cli::resolve(source.as_deref(), preset.as_deref())?;
    if let Some(out) = out {
        run_config.output_path = out;
    }
    if let Some(f) = format {
        run_config.format = f.into();
    }
    let report = cli::run(&run_config, &label, preset)?;
    for f in &report.files {
        println!("{}", f.display());
    }
    for e in &report.metadata.pole_events {
        eprintln!(
            "warning: {} t = {} skipped (tan argument {} near a pole)",
            e.context, e.t, e.x
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    if args.list_presets {
        list_presets();
        return ExitCode::SUCCESS;
    }
    let Some(Command::Run {
        config,
        preset,
        out,
        format,
    }) = args.command
    else {
        eprintln!("error: nothing to do; try `ising-pert run --preset fig1` or --help");
        return ExitCode::from(2);
    };
    match execute(config, preset, out, format) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.kind());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
