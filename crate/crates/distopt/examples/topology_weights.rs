//! Generate each topology family, build the Metropolis mixing weights, and
//! validate every structural property.
//!
//! ```bash
//! cargo run -p distopt --example topology_weights
//! ```

use distopt::graph::{Topology, TopologyKind};

fn main() -> distopt::Result<()> {
    let kinds = [
        TopologyKind::Complete,
        TopologyKind::Ring,
        TopologyKind::RandomConnected { extra_edge_prob: 0.3 },
    ];
    let m = 5;
    for kind in &kinds {
        println!("== {} on {m} nodes ==", kind.name());
        for epoch in 0..3 {
            let topology = Topology::generate(kind, m, epoch, 42)?;
            let weights = topology.metropolis_weights()?;
            let report = weights.validate(&topology)?;
            println!(
                "epoch {epoch}: {} edges, connected = {}, eta = {:.4}, validation = {report}",
                topology.edges().len(),
                topology.is_connected(),
                weights.eta(),
            );
        }
        // The weight matrix of the epoch-0 graph, row by row.
        let topology = Topology::generate(kind, m, 0, 42)?;
        let weights = topology.metropolis_weights()?;
        for i in 0..m {
            let row: Vec<String> =
                (0..m).map(|j| format!("{:.3}", weights.entry(i, j))).collect();
            println!("  [{}]", row.join(", "));
        }
        let tree = topology.spanning_tree()?;
        println!("  spanning tree: {tree:?}\n");
    }
    Ok(())
}
