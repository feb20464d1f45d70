fn main() {
    std::process::exit(bichromatic_eit::cli::run(std::env::args_os()));
}
