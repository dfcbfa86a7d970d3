use clap::Parser;
use idma_wb::args::Cli;

fn main() {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: thread pool: {e}");
            std::process::exit(2);
        }
    }
    if let Err(e) = idma_wb::run(&cli, argv[1..].to_vec()) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
