fn main() {
    std::process::exit(blsmed::cli::run(std::env::args_os()));
}
