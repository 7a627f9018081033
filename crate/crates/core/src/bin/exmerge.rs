use std::process::ExitCode;

fn main() -> ExitCode {
    let code = match exmerge::cli::parse_args(std::env::args_os()) {
        Ok(config) => exmerge::cli::run(&config),
        Err(e) => {
            let _ = e.print();
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
