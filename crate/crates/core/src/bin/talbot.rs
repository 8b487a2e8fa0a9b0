fn main() {
    std::process::exit(talbot_core::cli::run(std::env::args_os()));
}
