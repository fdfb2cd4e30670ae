use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(hsw_core::cli::main_with(std::env::args_os()))
}
