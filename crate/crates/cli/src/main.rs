fn main() {
    std::process::exit(hetpanel::run(std::env::args_os()));
}
