use std::collections::BTreeMap;
use std::fmt::Write;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use super::{EdgeKind, NodeKind, SchemaGraph};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphStats {
    pub node_counts: BTreeMap<String, u64>,
    pub edge_counts: BTreeMap<String, u64>,
    pub group_count: u64,
    /// USES_FIELD_GROUP edges per group; zero when there are no groups.
    pub avg_fanout: Ratio<u64>,
    pub max_fanout: u64,
}

impl GraphStats {
    pub fn nodes(&self, kind: NodeKind) -> u64 {
        self.node_counts.get(kind.as_str()).copied().unwrap_or(0)
    }

    pub fn edges(&self, kind: EdgeKind) -> u64 {
        self.edge_counts.get(kind.as_str()).copied().unwrap_or(0)
    }

    pub fn total_nodes(&self) -> u64 {
        self.node_counts.values().sum()
    }

    pub fn total_edges(&self) -> u64 {
        self.edge_counts.values().sum()
    }

    pub fn avg_fanout_f64(&self) -> f64 {
        *self.avg_fanout.numer() as f64 / *self.avg_fanout.denom() as f64
    }

    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let total_nodes = self.total_nodes().max(1) as f64;
        let _ = writeln!(out, "{:<22} {:>10} {:>8}", "Component", "Count", "Share");
        for kind in NodeKind::ALL {
            let n = self.nodes(kind);
            let _ = writeln!(out, "{:<22} {:>10} {:>7.1}%", kind.as_str(), n, 100.0 * n as f64 / total_nodes);
        }
        let _ = writeln!(out, "{:<22} {:>10}", "total nodes", self.total_nodes());
        for kind in EdgeKind::ALL {
            let _ = writeln!(out, "{:<22} {:>10}", kind.as_str(), self.edges(kind));
        }
        let _ = writeln!(out, "{:<22} {:>10}", "total edges", self.total_edges());
        let _ = writeln!(out, "{:<22} {:>10}", "groups", self.group_count);
        let _ = writeln!(out, "{:<22} {:>10.2}", "average fan-out", self.avg_fanout_f64());
        let _ = writeln!(out, "{:<22} {:>10}", "maximum fan-out", self.max_fanout);
        out
    }
}

pub fn graph_stats(graph: &SchemaGraph) -> GraphStats {
    let mut node_counts: BTreeMap<String, u64> = NodeKind::ALL.iter().map(|k| (k.as_str().to_string(), 0)).collect();
    for node in graph.nodes().values() {
        *node_counts.get_mut(node.kind().as_str()).expect("all kinds seeded") += 1;
    }
    let mut edge_counts: BTreeMap<String, u64> = EdgeKind::ALL.iter().map(|k| (k.as_str().to_string(), 0)).collect();
    let mut fanout: BTreeMap<&str, u64> = graph.groups().map(|(id, _)| (id, 0)).collect();
    for edge in graph.edges() {
        *edge_counts.get_mut(edge.kind.as_str()).expect("all kinds seeded") += 1;
        if edge.kind == EdgeKind::UsesFieldGroup {
            *fanout.entry(edge.to.as_str()).or_default() += 1;
        }
    }
    let group_count = fanout.len() as u64;
    let links: u64 = fanout.values().sum();
    let avg_fanout = if group_count == 0 { Ratio::from_integer(0) } else { Ratio::new(links, group_count) };
    GraphStats {
        node_counts,
        edge_counts,
        group_count,
        avg_fanout,
        max_fanout: fanout.values().copied().max().unwrap_or(0),
    }
}
