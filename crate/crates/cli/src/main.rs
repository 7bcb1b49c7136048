use std::process::ExitCode;

fn main() -> ExitCode {
    let outcome = problab_cli::run(std::env::args_os());
    if let Err(e) = &outcome {
        eprintln!("error: {e}");
    }
    ExitCode::from(problab_cli::status_code(&outcome))
}
