use std::process::ExitCode;

fn main() -> ExitCode {
    if let Ok(v) = std::env::var("SHARDFLOW_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("shardflow: {e}");
                    return ExitCode::from(2);
                }
            }
            _ => {
                eprintln!("shardflow: SHARDFLOW_THREADS must be a positive integer, got '{v}'");
                return ExitCode::from(2);
            }
        }
    }
    match shardflow::cli::run(std::env::args_os()) {
        Ok(report) => {
            println!("{}", report.summary);
            for f in &report.files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("shardflow: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
