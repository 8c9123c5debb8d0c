use std::process::ExitCode;

fn main() -> ExitCode {
    changesurface_cli::main_with_args(std::env::args_os())
}
