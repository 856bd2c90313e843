fn main() {
    std::process::exit(slicetwin::cli::run(std::env::args_os()));
}
