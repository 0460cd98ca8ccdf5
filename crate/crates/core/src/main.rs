use std::process::ExitCode;

fn main() -> ExitCode {
    memctrl::cli::entry()
}
