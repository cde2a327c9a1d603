fn main() {
    std::process::exit(avn_steering::cli::run(std::env::args_os()));
}
