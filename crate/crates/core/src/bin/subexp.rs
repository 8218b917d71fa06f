fn main() {
    std::process::exit(subexp::cli::run(std::env::args_os()));
}
