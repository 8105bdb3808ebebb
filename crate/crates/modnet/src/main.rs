fn main() {
    std::process::exit(modnet::cli_main());
}
