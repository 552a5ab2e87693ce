use clap::Parser;

use rfr_sabr_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(out) => out.emit(),
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    };
    std::process::exit(code);
}
