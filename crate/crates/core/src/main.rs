use std::process::ExitCode;

fn main() -> ExitCode {
    let code = lightconv3d::cli::run(std::env::args_os(), &mut std::io::stdout().lock(), &mut std::io::stderr());
    ExitCode::from(code)
}
