fn main() {
    std::process::exit(ptscat::cli::run(std::env::args_os()));
}
