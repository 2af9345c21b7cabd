fn main() {
    let code = ozlab::cli::dispatch(std::env::args().collect());
    std::process::exit(code);
}
