//! Export a layout as a closed OBJ mesh plus its JSON document, then read
//! the mesh back.
//!
//! cargo run --release --example export_mesh -- [OUT_DIR]

use std::path::PathBuf;

use panolayout::hypotheses::LayoutModel;
use panolayout::io::{export_model, is_closed, layout_mesh, parse_obj};

fn main() -> panolayout::error::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out/mesh".into()));
    let l_room = LayoutModel::new(
        vec![
            [-2.0, 1.2],
            [1.1, 1.2],
            [1.1, -0.8],
            [0.4, -0.8],
            [0.4, -2.0],
            [-2.0, -2.0],
        ],
        1.4,
    );
    let mesh = layout_mesh(&l_room);
    println!(
        "{} vertices, {} faces, closed: {}",
        mesh.vertices.len(),
        mesh.faces.len(),
        is_closed(&mesh)
    );

    let (json, obj) = export_model(&l_room, &out, "l_room")?;
    let text = std::fs::read_to_string(&obj).map_err(|source| panolayout::error::Error::Io {
        path: obj.clone(),
        source,
    })?;
    let back = parse_obj(&text)?;
    println!("wrote {} and {}", obj.display(), json.display());
    println!(
        "round trip: {} vertices, {} faces",
        back.vertices.len(),
        back.faces.len()
    );
    Ok(())
}
