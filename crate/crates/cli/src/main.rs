use clap::Parser;

fn main() {
    let cli = match aqua_cli::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            std::process::exit(if e.use_stderr() { aqua_cli::error::EXIT_INVALID } else { 0 });
        }
    };
    std::process::exit(aqua_cli::run(cli));
}
