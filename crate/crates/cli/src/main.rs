fn main() {
    std::process::exit(sfs_cli::run_cli(std::env::args_os()));
}
