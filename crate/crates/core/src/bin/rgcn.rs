fn main() {
    std::process::exit(rgcn::cli::run());
}
