fn main() {
    std::process::exit(fpgrad::cli::run(std::env::args_os()));
}
