fn main() {
    std::process::exit(ntnsim_cli::run_cli(std::env::args_os()));
}
