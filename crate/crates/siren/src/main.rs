fn main() {
    std::process::exit(siren::cli::run(std::env::args_os()));
}
