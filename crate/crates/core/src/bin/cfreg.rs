fn main() {
    std::process::exit(cfreg::cli::cli_main(std::env::args_os()));
}
