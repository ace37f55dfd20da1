fn main() -> std::process::ExitCode {
    vstirap::cli::main()
}
