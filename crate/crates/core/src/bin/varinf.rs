fn main() {
    std::process::exit(varinf::cli::cli_main(std::env::args_os()));
}
