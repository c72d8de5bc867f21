fn main() {
    std::process::exit(gfr::cli::run(std::env::args_os()));
}
