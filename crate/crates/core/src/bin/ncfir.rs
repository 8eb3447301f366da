fn main() { std::process::exit(ncfir::cli::main()) }
