fn main() {
    std::process::exit(specnorm::cli::run(std::env::args_os()));
}
