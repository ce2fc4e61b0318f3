fn main() {
    std::process::exit(lie_swarm::cli::main_with_args(std::env::args_os()));
}
