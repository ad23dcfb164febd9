use clap::Parser;
use divreins_cli::Cli;

fn main() {
    let cli = Cli::parse();
    match divreins_cli::run(&cli) {
        Ok((outcome, path)) => {
            println!("{}", outcome.summary);
            println!("wrote {}", path.display());
        }
        Err(e) => {
            eprintln!("divreins: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
