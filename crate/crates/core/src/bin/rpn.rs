fn main() {
    std::process::exit(rpn_dst::cli::run(std::env::args_os()));
}
