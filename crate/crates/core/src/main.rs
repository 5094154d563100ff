use std::process::ExitCode;

fn main() -> ExitCode {
    gensurrogate::cli::main_with_args(std::env::args_os())
}
