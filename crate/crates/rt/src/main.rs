fn main() {
    std::process::exit(bmui_rt::cli::run(std::env::args_os()));
}
