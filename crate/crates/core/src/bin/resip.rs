fn main() {
    std::process::exit(resipscope::cli::run(std::env::args_os()));
}
