fn main() {
    std::process::exit(qtm_core::cli::main_with_args(std::env::args_os()));
}
