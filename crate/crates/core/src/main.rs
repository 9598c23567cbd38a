fn main() {
    re_sysid::cli::init_logging();
    let code = re_sysid::cli::run(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr());
    std::process::exit(code);
}
