use std::process::ExitCode;

use clap::Parser;
use vortexflow::cli::{error_line, run, Args};

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", error_line(&e));
            // configuration problems get their own status
            ExitCode::from(if e.field().is_some() { 2 } else { 1 })
        }
    }
}
