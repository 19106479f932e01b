fn main() {
    std::process::exit(rcldpc::cli::run(std::env::args_os()));
}
