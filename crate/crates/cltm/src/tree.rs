//! Latent tree topology over observed labels and latent (hidden) nodes.
//!
//! Nodes are indexed `0..observed_count` for observed labels and
//! `observed_count..node_count` for latent nodes. Edges are undirected and
//! stored as sorted `(low, high)` index pairs in lexicographic order, so two
//! structurally equal trees compare equal.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// An undirected tree over observed and latent nodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TreeJson", into = "TreeJson")]
pub struct LatentTree {
    observed: Vec<String>,
    latent: Vec<String>,
    edges: Vec<(usize, usize)>,
}

/// Wire form: edges are name pairs so files stay readable and stable under
/// internal re-indexing.
#[derive(Serialize, Deserialize)]
struct TreeJson {
    observed: Vec<String>,
    latent: Vec<String>,
    edges: Vec<(String, String)>,
}

impl From<LatentTree> for TreeJson {
    fn from(t: LatentTree) -> Self {
        let edges = t
            .edges
            .iter()
            .map(|&(a, b)| (t.node_name(a).to_owned(), t.node_name(b).to_owned()))
            .collect();
        TreeJson {
            observed: t.observed,
            latent: t.latent,
            edges,
        }
    }
}

impl TryFrom<TreeJson> for LatentTree {
    type Error = Error;

    fn try_from(j: TreeJson) -> Result<Self> {
        let mut edges = Vec::with_capacity(j.edges.len());
        let index_of = |name: &str| -> Result<usize> {
            j.observed
                .iter()
                .chain(j.latent.iter())
                .position(|n| n == name)
                .ok_or_else(|| Error::Format(format!("unknown node name {name:?} in tree edge")))
        };
        for (a, b) in &j.edges {
            edges.push((index_of(a)?, index_of(b)?));
        }
        LatentTree::new(j.observed, j.latent, edges)
    }
}

impl LatentTree {
    /// Build a tree from node names and index edges, validating that the
    /// result is a connected acyclic graph with no self loops.
    pub fn new(
        observed: Vec<String>,
        latent: Vec<String>,
        edges: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let n = observed.len() + latent.len();
        if observed.is_empty() {
            return Err(Error::InvalidInput("tree needs at least one observed node".into()));
        }
        {
            let mut names: Vec<&String> = observed.iter().chain(latent.iter()).collect();
            names.sort();
            if names.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidInput("duplicate node name in tree".into()));
            }
        }
        let mut edges: Vec<(usize, usize)> = edges
            .into_iter()
            .map(|(a, b)| if a <= b { (a, b) } else { (b, a) })
            .collect();
        edges.sort_unstable();
        edges.dedup();
        for &(a, b) in &edges {
            if a == b {
                return Err(Error::InvalidInput(format!("self loop on node {a}")));
            }
            if b >= n {
                return Err(Error::InvalidInput(format!("edge ({a},{b}) out of range for {n} nodes")));
            }
        }
        if edges.len() + 1 != n {
            return Err(Error::InvalidInput(format!(
                "tree on {n} nodes must have {} edges, got {}",
                n - 1,
                edges.len()
            )));
        }
        let tree = LatentTree {
            observed,
            latent,
            edges,
        };
        if !tree.is_connected() {
            return Err(Error::InvalidInput("tree is not connected".into()));
        }
        Ok(tree)
    }

    /// A tree with auto-generated names: observed `y0..`, latent `h1..`.
    pub fn with_auto_names(
        observed_count: usize,
        latent_count: usize,
        edges: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let observed = (0..observed_count).map(|i| format!("y{i}")).collect();
        let latent = (1..=latent_count).map(|i| format!("h{i}")).collect();
        Self::new(observed, latent, edges)
    }

    pub fn observed_count(&self) -> usize {
        self.observed.len()
    }

    pub fn latent_count(&self) -> usize {
        self.latent.len()
    }

    pub fn node_count(&self) -> usize {
        self.observed.len() + self.latent.len()
    }

    pub fn is_latent(&self, node: usize) -> bool {
        node >= self.observed.len()
    }

    pub fn node_name(&self, node: usize) -> &str {
        if node < self.observed.len() {
            &self.observed[node]
        } else {
            &self.latent[node - self.observed.len()]
        }
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.observed
            .iter()
            .chain(self.latent.iter())
            .position(|n| n == name)
    }

    pub fn observed_names(&self) -> &[String] {
        &self.observed
    }

    pub fn latent_names(&self) -> &[String] {
        &self.latent
    }

    /// Edges as sorted `(low, high)` index pairs, in lexicographic order.
    /// Edge potentials elsewhere in the crate are keyed by position in this
    /// slice.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Adjacency lists, each sorted ascending.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.node_count()];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    pub fn degree(&self, node: usize) -> usize {
        self.edges
            .iter()
            .filter(|&&(a, b)| a == node || b == node)
            .count()
    }

    fn is_connected(&self) -> bool {
        let n = self.node_count();
        let adj = self.adjacency();
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &u in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    count += 1;
                    stack.push(u);
                }
            }
        }
        count == n
    }

    /// Check the extra invariant required of structure-learning output:
    /// every latent node has degree at least 3.
    pub fn validate_latent_degrees(&self) -> Result<()> {
        for node in self.observed.len()..self.node_count() {
            let d = self.degree(node);
            if d < 3 {
                return Err(Error::InvalidInput(format!(
                    "latent node {} has degree {d} (must be >= 3)",
                    self.node_name(node)
                )));
            }
        }
        Ok(())
    }

    /// GraphViz DOT rendering with deterministic node and edge order.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph latent_tree {\n");
        for name in &self.observed {
            out.push_str(&format!("  \"{name}\" [shape=ellipse];\n"));
        }
        for name in &self.latent {
            out.push_str(&format!("  \"{name}\" [shape=box, style=dashed];\n"));
        }
        for &(a, b) in &self.edges {
            out.push_str(&format!(
                "  \"{}\" -- \"{}\";\n",
                self.node_name(a),
                self.node_name(b)
            ));
        }
        out.push_str("}\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn star() -> LatentTree {
        LatentTree::with_auto_names(3, 1, vec![(0, 3), (1, 3), (2, 3)]).unwrap()
    }

    #[test]
    fn counts_and_names() {
        let t = star();
        assert_eq!(t.node_count(), 4);
        assert_eq!(t.node_name(3), "h1");
        assert_eq!(t.node_index("y2"), Some(2));
        assert!(t.is_latent(3));
        assert!(!t.is_latent(0));
    }

    #[test]
    fn rejects_cycle_and_disconnected() {
        // 3 nodes, 3 edges: cycle.
        assert!(LatentTree::with_auto_names(3, 0, vec![(0, 1), (1, 2), (0, 2)]).is_err());
        // 4 nodes, two disjoint edges plus a duplicate to hit the count.
        assert!(LatentTree::with_auto_names(4, 0, vec![(0, 1), (2, 3), (1, 0)]).is_err());
        assert!(LatentTree::with_auto_names(2, 0, vec![(0, 0)]).is_err());
    }

    #[test]
    fn latent_degree_validation() {
        let t = star();
        assert!(t.validate_latent_degrees().is_ok());
        let bad = LatentTree::with_auto_names(2, 1, vec![(0, 2), (1, 2)]).unwrap();
        assert!(bad.validate_latent_degrees().is_err());
    }

    #[test]
    fn json_round_trip_uses_names() {
        let t = star();
        let s = serde_json::to_string(&t).unwrap();
        assert!(s.contains("\"edges\":[[\"y0\",\"h1\"]"));
        let back: LatentTree = serde_json::from_str(&s).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn dot_is_deterministic() {
        let a = star().to_dot();
        let b = star().to_dot();
        assert_eq!(a, b);
        assert!(a.contains("\"y0\" -- \"h1\""));
    }
}
