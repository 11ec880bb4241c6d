use std::process::ExitCode;

fn main() -> ExitCode {
    let outcome = lossrisk::cli::run_command(std::env::args_os());
    if let Some(msg) = &outcome.message {
        if outcome.code == 0 {
            print!("{msg}");
        } else {
            eprintln!("{msg}");
        }
    }
    if let Some(json) = &outcome.json {
        print!("{json}");
    }
    ExitCode::from(outcome.code as u8)
}
