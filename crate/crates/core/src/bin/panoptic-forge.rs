fn main() {
    std::process::exit(panoptic_forge::cli::run(std::env::args_os()));
}
