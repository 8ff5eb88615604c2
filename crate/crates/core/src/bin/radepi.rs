use std::io::Write;
use std::process::ExitCode;

fn main() -> ExitCode {
    let outcome = radepi_core::cli::run(std::env::args_os());
    if let Some(report) = &outcome.report {
        let mut out = std::io::stdout().lock();
        let _ = out.write_all(report.as_bytes());
    }
    if let Some(msg) = &outcome.stderr {
        eprintln!("{}", msg.trim_end());
    }
    ExitCode::from(outcome.code as u8)
}
