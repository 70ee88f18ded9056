fn main() {
    std::process::exit(panolayout::cli::main_with(std::env::args_os()));
}
