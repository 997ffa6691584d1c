//! Drives the command-line front end in process, as the `lrtomo` binary would.

use std::io;

fn main() {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/fig1.json");
    let runs: [&[&str]; 3] = [
        &["lrtomo", "threshold", "--k", "3", "--n", "60", "--d", "2", "--alpha", "0.9,0.95"],
        &["lrtomo", "analyze", data, "--rule", "eq9", "--enclosure", "none", "--samples", "20", "--no-timestamp"],
        &["lrtomo", "cutoff", "--shots", "20", "--points", "5"],
    ];
    for args in runs {
        println!("$ {}", args.join(" "));
        let code = lrtomo::cli::run(args.iter().copied(), &mut io::stdout(), &mut io::stderr());
        println!("(exit {code})\n");
    }
}
