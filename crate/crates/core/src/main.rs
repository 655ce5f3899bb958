fn main() {
    std::process::exit(gibbs_spectral::cli::run(std::env::args_os()));
}
