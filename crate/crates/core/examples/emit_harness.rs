//! Writes the C harnesses for one method pair.
//!
//! cargo run --example emit_harness -- [adt] [m] [n] [phi] [inv] [dir]

use commute::bench::bundled_model;
use commute::dsl::{parse_formula, parse_pair_formula};
use commute::encode::{build_mono_encoding, build_pieces, emit_c, EmitOptions, PieceRelation};

fn main() -> commute::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let get = |i: usize, d: &'static str| args.get(i).map_or(d, String::as_str).to_string();
    let model = bundled_model(&get(0, "simpleset"))?;
    let phi = parse_formula(&get(3, "x1 != y1"), &model.adt, &get(1, "add"), &get(2, "add"))?;
    let inv = match get(4, "") {
        t if t.is_empty() => None,
        t => Some(parse_pair_formula(&t, &model.adt)?),
    };
    let dir = std::path::PathBuf::from(get(5, "harness"));
    std::fs::create_dir_all(&dir).map_err(|e| commute::Error::io(&dir, e))?;

    let pieces = build_pieces(&model, &phi, inv.as_ref().map_or(PieceRelation::Observational, PieceRelation::Formula))?;
    let mut progs = vec![build_mono_encoding(&model, &phi)?, pieces.piece1, pieces.piece2];
    progs.extend(pieces.piece3);
    for prog in &progs {
        let file = emit_c(&model, prog, &EmitOptions::default())?;
        let path = dir.join(&file.path);
        std::fs::write(&path, &file.text).map_err(|e| commute::Error::io(&path, e))?;
        println!("{}  {}", file.checksum, path.display());
    }
    Ok(())
}
