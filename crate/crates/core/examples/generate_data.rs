//! Regenerates the bundled graphs: `cargo run --example generate_data [DIR]`.

use treegnas::synth::{bundled_datasets, planted_partition};
use treegnas::{edge_homophily, save_graph};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = std::env::args().nth(1).unwrap_or_else(|| "data".into());
    for (name, cfg) in bundled_datasets() {
        let g = planted_partition(&cfg)?;
        let dir = std::path::Path::new(&root).join(name);
        save_graph(&g, &dir)?;
        println!("{}: n={} edges={} H={:.4}", dir.display(), g.num_nodes(), g.num_edges(), edge_homophily(&g)?);
    }
    Ok(())
}
