fn main() {
    std::process::exit(itergauge::cli::main_with(std::env::args()));
}
