fn main() {
    std::process::exit(sarrs::cli::run(std::env::args_os()));
}
