fn main() {
    std::process::exit(tec_core::cli::run(std::env::args_os()));
}
