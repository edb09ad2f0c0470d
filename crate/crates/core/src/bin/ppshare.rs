fn main() -> std::process::ExitCode {
    ppshare::cli::main()
}
