fn main() {
    std::process::exit(matchideal::cli::run(std::env::args_os()));
}
