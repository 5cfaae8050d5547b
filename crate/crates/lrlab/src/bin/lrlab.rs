use std::process::ExitCode;

fn main() -> ExitCode {
    lrlab::cli::run()
}
