use std::io::Write;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use topo1d::{Error, ErrorFamily};
use topo1d_cli::{execute, Cli};

const THREADS_VAR: &str = "TOPO1D_THREADS";

fn exit_code(family: ErrorFamily) -> u8 {
    match family {
        ErrorFamily::Usage => 1,
        ErrorFamily::Parse => 2,
        ErrorFamily::Precondition => 3,
        ErrorFamily::Numerical => 4,
    }
}

fn family_name(family: ErrorFamily) -> &'static str {
    match family {
        ErrorFamily::Usage => "usage",
        ErrorFamily::Parse => "parse",
        ErrorFamily::Precondition => "precondition",
        ErrorFamily::Numerical => "numerical",
    }
}

/// Variant name of the error, from its debug rendering.
fn kind(e: &Error) -> String {
    let d = format!("{e:?}");
    d.split(|c: char| !c.is_alphanumeric()).next().unwrap_or_default().to_string()
}

fn fail(e: &Error) -> ExitCode {
    let family = e.family();
    let payload = serde_json::json!({
        "error": { "family": family_name(family), "kind": kind(e), "message": e.to_string() }
    });
    eprintln!("{payload}");
    ExitCode::from(exit_code(family))
}

fn configure_threads() -> Result<(), Error> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Usage(format!("{THREADS_VAR} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Usage(format!("{THREADS_VAR}: {e}")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(exit_code(ErrorFamily::Usage)),
            };
        }
    };
    if let Err(e) = configure_threads() {
        return fail(&e);
    }
    match execute(&cli) {
        Ok(run) => {
            let mut out = std::io::stdout().lock();
            if out.write_all(&run.stdout).and_then(|_| out.flush()).is_err() {
                return ExitCode::from(exit_code(ErrorFamily::Usage));
            }
            match run.status {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => fail(&e),
            }
        }
        Err(e) => fail(&e),
    }
}
