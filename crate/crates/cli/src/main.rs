use std::process::ExitCode;

fn main() -> ExitCode {
    let code = circle_ot_cli::run(std::env::args_os(), &mut std::io::stdout());
    ExitCode::from(code as u8)
}
