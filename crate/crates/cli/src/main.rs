use std::io::Write;
use std::process::ExitCode;

fn main() -> ExitCode {
    let out = plinv_cli::run_cli(std::env::args_os());
    // A closed pipe is not worth a panic.
    let _ = if out.code == plinv_cli::EXIT_OK {
        std::io::stdout().write_all(out.report.as_bytes())
    } else {
        std::io::stderr().write_all(out.report.as_bytes())
    };
    ExitCode::from(out.code as u8)
}
