use clap::Parser;
use tass::cli::{configure_threads, run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let outcome = configure_threads().and_then(|_| run(&cli));
    match outcome {
        Ok(summary) => {
            if cli.global.json {
                println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
            }
        }
        Err(e) => {
            let body = serde_json::json!({ "error": e.to_string(), "exit_code": e.exit_code() });
            eprintln!("{body}");
            std::process::exit(e.exit_code());
        }
    }
}
