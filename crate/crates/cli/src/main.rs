fn main() {
    std::process::exit(droplet_cli::run(std::env::args_os()));
}
