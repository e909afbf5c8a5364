fn main() {
    let code = wishsync_cli::cli::run(std::env::args_os(), &mut std::io::stdout());
    std::process::exit(code);
}
