use serde::{Deserialize, Serialize};

use super::{Action, QueryState};

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplorationNode {
    pub id: NodeId,
    pub parent: Option<NodeId>,
    /// The action that produced this node from its parent.
    pub action: Option<Action>,
    pub query_state: QueryState,
    pub visit_count: u64,
    pub failure_count: u64,
    pub success_triplets: Vec<String>,
    pub children: Vec<NodeId>,
}

impl ExplorationNode {
    pub fn depth(&self) -> usize {
        self.query_state.depth()
    }
}

/// Arena of exploration nodes; node 0 is the empty root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplorationTree {
    nodes: Vec<ExplorationNode>,
}

impl Default for ExplorationTree {
    fn default() -> Self {
        Self::new()
    }
}

impl ExplorationTree {
    pub const ROOT: NodeId = 0;

    pub fn new() -> Self {
        ExplorationTree {
            nodes: vec![ExplorationNode {
                id: Self::ROOT,
                parent: None,
                action: None,
                query_state: QueryState::default(),
                visit_count: 0,
                failure_count: 0,
                success_triplets: Vec::new(),
                children: Vec::new(),
            }],
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nodes(&self) -> &[ExplorationNode] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> Option<&ExplorationNode> {
        self.nodes.get(id)
    }

    pub fn root(&self) -> &ExplorationNode {
        &self.nodes[Self::ROOT]
    }

    pub(crate) fn node_mut(&mut self, id: NodeId) -> &mut ExplorationNode {
        &mut self.nodes[id]
    }

    /// Adds the child of `parent` reached by `action`.
    pub fn expand(&mut self, parent: NodeId, action: Action) -> NodeId {
        let id = self.nodes.len();
        let query_state = self.nodes[parent].query_state.apply(&action);
        self.nodes.push(ExplorationNode {
            id,
            parent: Some(parent),
            action: Some(action),
            query_state,
            visit_count: 0,
            failure_count: 0,
            success_triplets: Vec::new(),
            children: Vec::new(),
        });
        self.nodes[parent].children.push(id);
        id
    }

    /// Node ids from `id` up to, but excluding, the root; deepest first.
    pub fn path(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut cursor = Some(id);
        while let Some(n) = cursor {
            if n == Self::ROOT {
                break;
            }
            out.push(n);
            cursor = self.nodes[n].parent;
        }
        out
    }

    /// Whether `id` or any ancestor has reached `threshold` failures.
    pub fn is_excluded(&self, id: NodeId, threshold: u64) -> bool {
        self.path(id).iter().any(|&n| self.nodes[n].failure_count >= threshold)
    }

    /// Actions already expanded below `id`.
    pub fn child_actions(&self, id: NodeId) -> Vec<&Action> {
        self.nodes[id].children.iter().filter_map(|&c| self.nodes[c].action.as_ref()).collect()
    }

    /// Parent links point backwards, each child extends its parent's state
    /// by exactly its own action, and child lists mirror parent links.
    pub fn is_well_formed(&self) -> bool {
        self.nodes.iter().all(|n| match n.parent {
            None => n.id == Self::ROOT && n.query_state.is_empty(),
            Some(p) => {
                p < n.id
                    && self.nodes[p].children.contains(&n.id)
                    && n.action.as_ref().is_some_and(|a| self.nodes[p].query_state.apply(a) == n.query_state)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explorer::ColumnRef;

    fn select(c: &str) -> Action {
        Action::SelectUnusedColumn { column: ColumnRef::new("d.s.t", c) }
    }

    #[test]
    fn paths_exclude_the_root() {
        let mut t = ExplorationTree::new();
        let a = t.expand(ExplorationTree::ROOT, select("a"));
        let b = t.expand(a, select("b"));
        assert_eq!(t.path(b), vec![b, a]);
        assert!(t.path(ExplorationTree::ROOT).is_empty());
        assert!(t.is_well_formed());
        assert_eq!(t.node(b).unwrap().depth(), 2);
    }

    #[test]
    fn exclusion_covers_the_subtree() {
        let mut t = ExplorationTree::new();
        let a = t.expand(ExplorationTree::ROOT, select("a"));
        let b = t.expand(a, select("b"));
        t.node_mut(a).failure_count = 3;
        assert!(t.is_excluded(a, 3));
        assert!(t.is_excluded(b, 3));
        assert!(!t.is_excluded(ExplorationTree::ROOT, 3));
    }
}
