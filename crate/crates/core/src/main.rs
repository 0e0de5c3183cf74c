fn main() -> std::process::ExitCode {
    shield_vimpc::cli::main()
}
