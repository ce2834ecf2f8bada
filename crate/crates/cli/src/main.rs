use clap::Parser;
use sds_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(cli.command, &cli.run) {
        Ok(outputs) => {
            for f in outputs.files {
                println!("{}", f.display());
            }
        }
        Err(e) => {
            eprintln!("sds {}: {e}", cli.command.name());
            std::process::exit(e.exit_code());
        }
    }
}
