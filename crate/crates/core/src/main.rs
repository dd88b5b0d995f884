fn main() {
    env_logger::Builder::from_env(
        env_logger::Env::new().filter_or("CTLSTAR2LTL_LOG", "warn"),
    )
    .init();
    std::process::exit(ctlstar2ltl::cli::run());
}
