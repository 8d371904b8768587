use clap::Parser;

fn main() {
    let cli = shiftconv_cli::Cli::parse();
    std::process::exit(shiftconv_cli::main_with(cli));
}
