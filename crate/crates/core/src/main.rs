fn main() {
    std::process::exit(deconv_gof::cli::run(std::env::args_os()));
}
