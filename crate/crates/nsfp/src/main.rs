use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(nsfp::cli::run(std::env::args()) as u8)
}
