fn main() -> std::process::ExitCode {
    tissuesim::cli::run_cli(std::env::args_os())
}
