fn main() {
    std::process::exit(regfbm::run(std::env::args_os()));
}
