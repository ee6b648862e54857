fn main() {
    std::process::exit(bicnet::harness::cli_main());
}
