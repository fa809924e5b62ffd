fn main() -> std::process::ExitCode {
    forte::cli::main_with_args(std::env::args_os())
}
