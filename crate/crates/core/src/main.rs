use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(gmx::cli::main_with_args(std::env::args_os()) as u8)
}
