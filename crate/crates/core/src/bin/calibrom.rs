fn main() {
    std::process::exit(calibrom::interface::cli::run(std::env::args_os()));
}
