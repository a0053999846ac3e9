//! `scenverify` command-line tool.
//!
//! Exit codes: 0 success, 1 failed self-test, 2 model error, 3 numeric
//! failure, 64 usage error, 74 output error.

mod args;
mod commands;
mod failure;

use std::ffi::OsString;

use clap::{CommandFactory, Parser};

use args::Cli;
use failure::EXIT_USAGE;

/// Subcommands that take parameter values as `--NAME VALUE`.
const PARAM_FLAGS: [&str; 2] = ["check", "estimate"];

/// Rewrites unknown `--NAME VALUE` and `--NAME=VALUE` flags into
/// `--set NAME=VALUE` for the subcommands that accept parameter values.
fn rewrite_parameter_flags(argv: Vec<OsString>) -> Vec<OsString> {
    let Some(pos) = argv
        .iter()
        .position(|a| PARAM_FLAGS.iter().any(|s| a == *s))
    else {
        return argv;
    };
    let sub = argv[pos].to_string_lossy().into_owned();
    let cmd = Cli::command();
    let known: Vec<String> = cmd
        .find_subcommand(&sub)
        .expect("listed subcommand exists")
        .get_arguments()
        .filter_map(|a| a.get_long().map(str::to_string))
        .chain(["help".to_string()])
        .collect();
    let mut out: Vec<OsString> = argv[..=pos].to_vec();
    let mut rest = argv[pos + 1..].iter();
    while let Some(arg) = rest.next() {
        let text = arg.to_string_lossy();
        let Some(flag) = text.strip_prefix("--").filter(|f| !f.is_empty()) else {
            out.push(arg.clone());
            continue;
        };
        let (name, inline) = match flag.split_once('=') {
            Some((n, v)) => (n, Some(v.to_string())),
            None => (flag, None),
        };
        if known.iter().any(|k| k == name) {
            out.push(arg.clone());
            continue;
        }
        let value = match inline {
            Some(v) => v,
            None => match rest.next() {
                Some(v) => v.to_string_lossy().into_owned(),
                // leave it for clap to report
                None => {
                    out.push(arg.clone());
                    continue;
                }
            },
        };
        out.push("--set".into());
        out.push(format!("{name}={value}").into());
    }
    out
}

fn run() -> i32 {
    let argv = rewrite_parameter_flags(std::env::args_os().collect());
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.exit_code() == 0 { 0 } else { EXIT_USAGE };
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("scenverify: {f}");
            f.code()
        }
    }
}

fn main() {
    std::process::exit(run());
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(s: &str) -> Vec<OsString> {
        s.split_whitespace().map(OsString::from).collect()
    }

    #[test]
    fn parameter_flags_become_assignments() {
        assert_eq!(
            rewrite_parameter_flags(args("scenverify check m.umc --v 0.3 --lambda 0.13 --w=2")),
            args("scenverify check m.umc --set v=0.3 --lambda 0.13 --set w=2")
        );
    }

    #[test]
    fn other_subcommands_are_untouched() {
        let a = args("scenverify gen-uav --nx 4 --bogus 1");
        assert_eq!(rewrite_parameter_flags(a.clone()), a);
    }
}
