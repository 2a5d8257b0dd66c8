fn main() {
    std::process::exit(symprune::cli::run(std::env::args_os()));
}
