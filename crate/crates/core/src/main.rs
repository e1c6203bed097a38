use std::process::ExitCode;

fn main() -> ExitCode {
    fermirot::cli::run(std::env::args_os())
}
