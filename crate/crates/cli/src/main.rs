use clap::Parser;
use riskcast_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(manifest) => {
            for entry in &manifest.outputs {
                println!("{}", cli.out.join(&entry.path).display());
            }
        }
        Err(e) => {
            eprintln!("riskcast: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
