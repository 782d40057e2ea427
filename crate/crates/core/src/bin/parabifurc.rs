fn main() {
    std::process::exit(parabifurc::cli::run(std::env::args().collect()));
}
