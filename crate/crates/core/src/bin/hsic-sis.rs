fn main() {
    std::process::exit(hsic_sis::cli::run(std::env::args_os()));
}
