//! Runner-protocol server for the toy subject language, on stdin/stdout.

fn main() -> std::io::Result<()> {
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    semdiff_core::toy::serve(stdin.lock(), stdout.lock())
}
