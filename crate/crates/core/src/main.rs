fn main() -> std::process::ExitCode {
    twophoto::cli::main()
}
