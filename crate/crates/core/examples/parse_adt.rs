//! Parses an ADT source file (or a bundled ADT) and prints it back in
//! canonical form with its fields and methods.
//!
//! cargo run --example parse_adt -- [file.adt | name]

use commute::bench::bundled_source;
use commute::dsl::{parse_adt, render_adt};
use commute::ir::Model;

fn main() -> commute::Result<()> {
    let arg = std::env::args().nth(1).unwrap_or_else(|| "simpleset".into());
    let src = match std::fs::read_to_string(&arg) {
        Ok(s) => s,
        Err(_) => bundled_source(&arg).unwrap_or_else(|| panic!("no file or bundled ADT `{arg}`")).to_string(),
    };
    let adt = parse_adt(&src)?;
    print!("{}", render_adt(&adt));
    let model = Model::new(&adt)?;
    println!("-- {} state words, {} methods", model.width, model.methods.len());
    Ok(())
}
