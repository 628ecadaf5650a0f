use std::io;

use tracing_subscriber::EnvFilter;

fn main() {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(io::stderr)
        .init();
    let env = |k: &str| std::env::var(k).ok();
    let code = quota_service::cli::run(std::env::args().skip(1), &env, &mut io::stdout(), &mut io::stderr());
    std::process::exit(code);
}
