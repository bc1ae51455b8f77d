fn main() {
    std::process::exit(pspin_cw::cli::run(std::env::args_os()));
}
