fn main() {
    std::process::exit(concave_dl::cli::run(std::env::args_os()));
}
