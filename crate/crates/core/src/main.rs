fn main() {
    std::process::exit(biot_crb::cli::main_with_args(std::env::args_os()));
}
