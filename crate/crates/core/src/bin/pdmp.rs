fn main() {
    std::process::exit(pdmp_core::cli::run_command(std::env::args_os()));
}
