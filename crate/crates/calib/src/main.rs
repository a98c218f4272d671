fn main() {
    std::process::exit(calib::cli::run_cli(std::env::args_os()));
}
