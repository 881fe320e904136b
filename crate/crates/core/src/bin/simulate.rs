use clap::Parser;
use fluidnet::cli::{main_with, Args};

fn main() {
    std::process::exit(main_with(Args::parse()));
}
