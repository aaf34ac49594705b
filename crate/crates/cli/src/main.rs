use clap::Parser;

fn main() {
    let cli = atrp_cli::app::Cli::parse();
    match atrp_cli::app::run(&cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            std::process::exit(e.category().exit_code());
        }
    }
}
