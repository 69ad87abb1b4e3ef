fn main() {
    std::process::exit(marketfield_cli::run(std::env::args_os()));
}
