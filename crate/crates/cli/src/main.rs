fn main() -> std::process::ExitCode {
    bayesmix_cli::main_entry()
}
