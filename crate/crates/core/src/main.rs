fn main() {
    std::process::exit(aml::harness::cli::cli_main(std::env::args_os()));
}
