fn main() {
    std::process::exit(domain_reweight::cli::main_with_args(std::env::args_os()));
}
