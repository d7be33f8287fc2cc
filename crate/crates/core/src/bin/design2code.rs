fn main() {
    let argv: Vec<String> = std::env::args().collect();
    std::process::exit(design2code::cli::dispatch(&argv));
}
