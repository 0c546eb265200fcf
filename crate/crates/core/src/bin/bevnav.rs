fn main() {
    std::process::exit(bevnav::cli::run(std::env::args_os()));
}
