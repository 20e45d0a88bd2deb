fn main() {
    std::process::exit(veccontract::cli::run(std::env::args_os()));
}
