fn main() {
    std::process::exit(beamchain::cli::main_with(std::env::args_os()));
}
