fn main() {
    std::process::exit(aql_cli::run(std::env::args_os()));
}
