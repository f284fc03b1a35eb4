fn main() {
    std::process::exit(mpc_csas::cli::run(std::env::args_os()));
}
