fn main() {
    std::process::exit(disentangle::cli::main_from_args(std::env::args_os()));
}
