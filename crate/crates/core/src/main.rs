use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(compcbf::cli::run(std::env::args_os()))
}
