fn main() {
    std::process::exit(switchosc::cli::run(std::env::args_os()));
}
