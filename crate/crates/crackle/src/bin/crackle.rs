fn main() {
    std::process::exit(crackle::cli::dispatch(std::env::args_os()));
}
