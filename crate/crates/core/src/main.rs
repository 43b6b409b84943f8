fn main() {
    std::process::exit(pcs_rod::cli::run(std::env::args_os()));
}
