use std::process::ExitCode;

use clap::Parser;
use steer_cli::{run, CliConfig};

fn main() -> ExitCode {
    let config = CliConfig::parse();
    match run(&config) {
        Ok(report) => {
            println!(
                "{}: {} frames, {} particles, system {}",
                config.scene.display(),
                report.final_frame,
                report.particle_count,
                report.system_type
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            let body = e.body();
            eprintln!("error [{}]: {}", body.stage, body.reason);
            ExitCode::from(2)
        }
    }
}
