fn main() {
    std::process::exit(akm_bicluster::cli::run(std::env::args_os()));
}
