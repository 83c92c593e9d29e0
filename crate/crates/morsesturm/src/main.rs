fn main() {
    std::process::exit(morsesturm::cli::run(std::env::args_os()));
}
