use clap::Parser;

fn main() {
    env_logger::init();
    let cli = sqlclarify_service::cli::Cli::parse();
    std::process::exit(sqlclarify_service::cli::run(cli));
}
