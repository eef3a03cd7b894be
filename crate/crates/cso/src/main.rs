fn main() {
    std::process::exit(cso::cli::main_with_args(std::env::args_os()));
}
