use std::process::ExitCode;

fn main() -> ExitCode {
    picm::cli::main_with_args(std::env::args_os())
}
