fn main() {
    std::process::exit(mgmra::cli::run(std::env::args_os()));
}
