fn main() {
    std::process::exit(channelkit::cli::run(std::env::args_os()));
}
