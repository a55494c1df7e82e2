//! Writes the built-in fixture models as model documents.
//!
//! cargo run -p h2s-core --example export_fixtures -- out/

use std::path::PathBuf;

use h2s_core::fixtures;
use h2s_core::model_io::serialize_model;

fn main() -> std::io::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fixtures".into()));
    std::fs::create_dir_all(&dir)?;
    for (name, model) in fixtures::all() {
        let path = dir.join(format!("{name}.seg.json"));
        std::fs::write(&path, serialize_model(&model))?;
        println!("{}", path.display());
    }
    Ok(())
}
