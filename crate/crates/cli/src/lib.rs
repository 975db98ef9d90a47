//! Command-line front end for `ttscost`.
//!
//! [`run`] parses an argument list, executes the verb and writes its table to
//! stdout or to `--out DIR`, together with a run manifest. Exit status is 0 on
//! success, 1 on a domain error or failed check and 2 on a usage error.

pub mod args;
pub mod commands;
pub mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use clap::error::ErrorKind;
use clap::Parser;

pub use args::Cli;
use output::{Digest256, Manifest};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub fn parse<I, T>(argv: I) -> Result<Cli, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    Cli::try_parse_from(argv)
}

/// Runs one command; `argv[0]` is the program name.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match parse(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = stdout.write_all(text.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = stderr.write_all(text.as_bytes());
                    EXIT_USAGE
                }
            };
        }
    };
    let command: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match execute(&cli, command, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e:#}");
            EXIT_DOMAIN
        }
    }
}

fn execute(cli: &Cli, command: Vec<String>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    let preset_dir = cli.global.preset_dir.as_deref();
    let outcome = match cli.global.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(usize::from(n))
            .build()
            .context("cli: failed to start worker threads")?
            .install(|| commands::execute(&cli.verb, preset_dir))?,
        None => commands::execute(&cli.verb, preset_dir)?,
    };
    let data = outcome.table.render(cli.global.format);
    let inputs = outcome
        .inputs
        .iter()
        .map(|p| Digest256::of_file(p).with_context(|| format!("cli: failed to hash `{}`", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let mut manifest = Manifest {
        command,
        inputs,
        outputs: Vec::new(),
        preset_version: ttscost::arch::PRESET_VERSION,
        threads: cli.global.threads,
        timestamp_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
    };
    match &cli.global.out {
        Some(dir) => {
            let name = format!("{}.{}", cli.verb.name(), cli.global.format.extension());
            write_file(dir, &name, data.as_bytes())?;
            manifest.outputs.push(Digest256 {
                path: name.into(),
                sha256: output::sha256_hex(data.as_bytes()),
            });
            write_file(dir, "manifest.json", manifest.to_json().as_bytes())?;
            writeln!(stdout, "{}", outcome.summary)?;
        }
        None => {
            stdout.write_all(data.as_bytes())?;
            manifest.outputs.push(Digest256 {
                path: "-".into(),
                sha256: output::sha256_hex(data.as_bytes()),
            });
            writeln!(stderr, "{}", outcome.summary)?;
            write!(stderr, "manifest: {}", manifest.to_json())?;
        }
    }
    Ok(if outcome.failed { EXIT_DOMAIN } else { EXIT_OK })
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cli: failed to create `{}`", dir.display()))?;
    let path = dir.join(name);
    std::fs::write(&path, bytes).with_context(|| format!("cli: failed to write `{}`", path.display()))
}
