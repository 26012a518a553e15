fn main() {
    std::process::exit(vspinn::cli::run(std::env::args_os()));
}
