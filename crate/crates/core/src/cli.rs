//! Command-line interface. Populated as subsystems land.

/// Runs the CLI and returns a process exit code.
pub fn run() -> i32 {
    eprintln!("jetcascade: no subcommands wired yet");
    64
}
