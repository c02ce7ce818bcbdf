use std::io;

fn main() {
    let code = seqtest::cli::main_with(std::env::args_os(), io::stdin().lock(), io::stdout().lock(), io::stderr());
    std::process::exit(code);
}
