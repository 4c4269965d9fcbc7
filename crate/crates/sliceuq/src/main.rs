fn main() {
    std::process::exit(sliceuq::cli::cli_main(std::env::args()));
}
