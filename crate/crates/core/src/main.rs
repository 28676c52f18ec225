fn main() {
    // failures are reported as JSON by the CLI itself
    std::panic::set_hook(Box::new(|_| {}));
    std::process::exit(kbdecode::cli::main());
}
