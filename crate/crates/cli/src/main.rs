use std::process::ExitCode;

fn main() -> ExitCode {
    evqa_cli::main()
}
