fn main() {
    std::process::exit(twophase::cli_main());
}
