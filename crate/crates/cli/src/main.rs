mod args;
mod commands;
mod config;
mod manifest;

use std::fmt;
use std::process::ExitCode;

use anyhow::Result;
use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, CommandArgs, RerunArgs};
use commands::Console;
use config::{resolve, Env};
use manifest::{diff_outputs, read_manifest, TOOL};

const EXIT_USER: u8 = 1;
const EXIT_INTERNAL: u8 = 2;

/// A mistake in the invocation or its inputs.
#[derive(Debug)]
pub struct UserError(pub String);

impl fmt::Display for UserError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UserError {}

fn is_user_error(err: &anyhow::Error) -> bool {
    use maskprobe::Error as E;
    err.chain().any(|cause| {
        if cause.is::<UserError>() || cause.is::<std::io::Error>() {
            return true;
        }
        matches!(
            cause.downcast_ref::<E>(),
            Some(
                E::InvalidInput(_)
                    | E::DegenerateInput(_)
                    | E::ModelLoad { .. }
                    | E::Io { .. }
                    | E::Handshake { .. }
                    | E::ProtocolViolation { .. }
                    | E::Remote { .. }
                    | E::Transport { .. }
                    | E::PartialComparison { .. }
            )
        )
    })
}

fn rerun(args: &RerunArgs, console: &Console) -> Result<()> {
    let recorded = read_manifest(&args.manifest)?;
    if recorded.tool != TOOL {
        anyhow::bail!(UserError(format!(
            "{} was not written by {TOOL}",
            args.manifest.display()
        )));
    }
    if recorded.version != env!("CARGO_PKG_VERSION") {
        console.warn(format!(
            "manifest written by version {}, replaying with {}",
            recorded.version,
            env!("CARGO_PKG_VERSION")
        ));
    }
    let current = commands::inputs_of(&recorded.config)?;
    for (was, now) in recorded.inputs.iter().zip(&current) {
        if was != now {
            anyhow::bail!(UserError(format!(
                "{} input {} changed since the recorded run",
                was.role,
                was.path.display()
            )));
        }
    }
    let replayed = commands::execute(&recorded.config, &args.out.out, console)?;
    let diffs = diff_outputs(&recorded.outputs, &replayed.outputs);
    if diffs.is_empty() {
        console.say(format!(
            "reproduced {} output(s) of `{}` byte-identically",
            replayed.outputs.len(),
            recorded.config.name()
        ));
        return Ok(());
    }
    let listing = diffs.join("\n  ");
    if recorded.config.uses_remote() {
        console.warn(format!(
            "outputs of a remote-backed run differ:\n  {listing}"
        ));
        Ok(())
    } else {
        anyhow::bail!("replay of a native run is not byte-identical:\n  {listing}")
    }
}

fn run(command: CommandArgs) -> Result<()> {
    let console = Console;
    match command {
        CommandArgs::Serve(a) => commands::serve(&a),
        CommandArgs::Rerun(a) => rerun(&a, &console),
        other => {
            let out = match &other {
                CommandArgs::Train(a) => a.out.out.clone(),
                CommandArgs::Eval(a) => a.out.out.clone(),
                CommandArgs::Explain(a) => a.out.out.clone(),
                CommandArgs::Compare(a) => a.out.out.clone(),
                CommandArgs::Stack(a) => a.out.out.clone(),
                CommandArgs::Probe(a) => a.out.out.clone(),
                CommandArgs::Synth(a) => a.out.out.clone(),
                CommandArgs::Serve(_) | CommandArgs::Rerun(_) => unreachable!(),
            };
            let resolved = resolve(other, &Env::from_process())?.expect("run command");
            for w in &resolved.warnings {
                console.warn(w);
            }
            commands::execute(&resolved.config, &out, &console)?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USER),
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if is_user_error(&err) {
                eprintln!("Run `maskprobe --help` for usage.");
                ExitCode::from(EXIT_USER)
            } else {
                ExitCode::from(EXIT_INTERNAL)
            }
        }
    }
}
