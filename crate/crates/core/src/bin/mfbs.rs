fn main() {
    std::process::exit(mfbs::cli::run(std::env::args_os()));
}
