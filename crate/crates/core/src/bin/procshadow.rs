fn main() {
    std::process::exit(procshadow::cli::run(std::env::args_os()));
}
