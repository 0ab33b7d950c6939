fn main() {
    std::process::exit(regconflict::cli::main_with(std::env::args_os()));
}
