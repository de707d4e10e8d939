fn main() {
    std::process::exit(delayosc::cli::run(std::env::args_os()));
}
