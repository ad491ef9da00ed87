fn main() {
    std::process::exit(ncc_lab::run(std::env::args_os()));
}
