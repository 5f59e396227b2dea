fn main() -> std::process::ExitCode {
    askg_service::cli::main()
}
