fn main() {
    std::process::exit(uwacr_bench::cli::main_with(std::env::args_os()));
}
