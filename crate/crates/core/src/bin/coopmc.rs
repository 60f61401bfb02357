use std::process::ExitCode;

fn main() -> ExitCode {
    coopmc::cli::main_with_args(std::env::args_os())
}
