use std::process::ExitCode;

fn main() -> ExitCode {
    nvcavity_cli::main_with(std::env::args_os())
}
