fn main() {
    std::process::exit(rankdesign::cli::main_with_args(std::env::args_os()));
}
