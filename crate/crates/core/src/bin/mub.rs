fn main() {
    std::process::exit(musb::cli::dispatch(std::env::args_os()));
}
