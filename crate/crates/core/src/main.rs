fn main() {
    std::process::exit(slukit::cli::run(std::env::args_os()));
}
