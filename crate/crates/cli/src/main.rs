use clap::Parser;

fn main() {
    let cli = match balkwise_cli::app::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // usage errors are validation errors; help and version are not errors
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = balkwise_cli::app::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
