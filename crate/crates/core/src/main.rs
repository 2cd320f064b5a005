fn main() {
    std::process::exit(potentia::cli::run_command(std::env::args_os()));
}
