fn main() {
    std::process::exit(pareto_robust::cli::main());
}
