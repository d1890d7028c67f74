//! Graphviz export of predicted scene graphs.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::model::{NodeId, SceneGraph};
use crate::roles::RoleClass;

use super::layout::dot_node;

/// One `digraph` per frame, in the given order. Human nodes with a role in
/// `roles` (keyed by frame and node) get it as a second label line.
pub fn export_dot(graphs: &[SceneGraph], roles: &BTreeMap<(u64, NodeId), RoleClass>) -> String {
    let mut out = String::new();
    for g in graphs {
        let mut nodes = g.nodes.clone();
        nodes.sort_by_key(|n| n.id);
        let mut edges = g.edges.clone();
        edges.sort();
        if nodes.is_empty() && edges.is_empty() {
            writeln!(out, "digraph f{} {{}}", g.frame_id).unwrap();
            continue;
        }
        writeln!(out, "digraph f{} {{", g.frame_id).unwrap();
        for n in &nodes {
            let mut label = n.class.name().to_string();
            if let Some(role) = roles.get(&(g.frame_id, n.id)) {
                label.push_str("\\n");
                label.push_str(role.title());
            }
            writeln!(out, "  {} [label=\"{}\"];", dot_node(n.id), escape(&label)).unwrap();
        }
        for e in &edges {
            writeln!(out, "  {} -> {} [label=\"{}\"];", dot_node(e.subject), dot_node(e.object), e.predicate.name()).unwrap();
        }
        out.push_str("}\n");
    }
    out
}

fn escape(s: &str) -> String {
    s.replace('"', "\\\"")
}
