use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::TopologyError;

/// Directed graph on `0..node_count`. An edge `(from, to)` is a channel from
/// agent `from` to agent `to`. Self-loops are never stored; every node is
/// treated as its own neighbor when weights are built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Digraph {
    node_count: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Digraph {
    pub fn new(
        node_count: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, TopologyError> {
        if node_count == 0 {
            return Err(TopologyError::EmptyGraph);
        }
        let mut set = BTreeSet::new();
        for (from, to) in edges {
            if from >= node_count || to >= node_count {
                return Err(TopologyError::NodeOutOfRange {
                    from,
                    to,
                    node_count,
                });
            }
            if from == to {
                return Err(TopologyError::SelfLoop(from));
            }
            if !set.insert((from, to)) {
                return Err(TopologyError::DuplicateEdge { from, to });
            }
        }
        Ok(Self {
            node_count,
            edges: set,
        })
    }

    /// Directed ring `0 -> 1 -> ... -> n-1 -> 0`.
    pub fn ring(n: usize) -> Result<Self, TopologyError> {
        let edges = if n < 2 {
            Vec::new()
        } else if n == 2 {
            vec![(0, 1), (1, 0)]
        } else {
            (0..n).map(|i| (i, (i + 1) % n)).collect()
        };
        Self::new(n, edges)
    }

    pub fn complete(n: usize) -> Result<Self, TopologyError> {
        let edges = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)));
        Self::new(n, edges)
    }

    /// Seeded random strongly connected digraph: a directed ring over a random
    /// permutation of the nodes plus up to `extra_edges` further random edges.
    pub fn random_strongly_connected(
        n: usize,
        extra_edges: usize,
        seed: u64,
    ) -> Result<Self, TopologyError> {
        if n == 0 {
            return Err(TopologyError::EmptyGraph);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let mut edges = BTreeSet::new();
        if n >= 2 {
            for w in 0..n {
                let (a, b) = (order[w], order[(w + 1) % n]);
                if a != b {
                    edges.insert((a, b));
                }
            }
        }
        let capacity = n * (n - 1);
        let target = (edges.len() + extra_edges).min(capacity);
        while edges.len() < target {
            let from = rng.random_range(0..n);
            let to = rng.random_range(0..n);
            if from != to {
                edges.insert((from, to));
            }
        }
        Self::new(n, edges)
    }

    /// Seeded random digraph with each off-diagonal edge present with
    /// probability `p`. Not necessarily strongly connected.
    pub fn random_erdos_renyi(n: usize, p: f64, seed: u64) -> Result<Self, TopologyError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for from in 0..n {
            for to in 0..n {
                if from != to && rng.random::<f64>() < p {
                    edges.push((from, to));
                }
            }
        }
        Self::new(n, edges)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.edges.contains(&(from, to))
    }

    /// Nodes `j` with an edge `j -> i`.
    pub fn in_neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges
            .iter()
            .filter(move |&&(_, to)| to == i)
            .map(|&(from, _)| from)
    }

    /// Nodes `i` with an edge `j -> i`.
    pub fn out_neighbors(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges
            .range((j, 0)..(j + 1, 0))
            .map(|&(_, to)| to)
    }

    pub fn in_degree(&self, i: usize) -> usize {
        self.in_neighbors(i).count()
    }

    pub fn out_degree(&self, j: usize) -> usize {
        self.out_neighbors(j).count()
    }

    /// Graph with every node index shifted by `offset` inside a larger
    /// node set of size `node_count`.
    pub fn embed(&self, offset: usize, node_count: usize) -> Result<Self, TopologyError> {
        Self::new(
            node_count,
            self.edges.iter().map(|&(a, b)| (a + offset, b + offset)),
        )
    }

    /// Union of edge sets over the same node set.
    pub fn union(&self, other: &Digraph) -> Result<Self, TopologyError> {
        if self.node_count != other.node_count {
            return Err(TopologyError::SizeMismatch {
                expected: self.node_count,
                found: other.node_count,
            });
        }
        let mut edges = self.edges.clone();
        edges.extend(other.edges.iter().copied());
        Ok(Self {
            node_count: self.node_count,
            edges,
        })
    }

    /// Parses the edge-list text format: one `from to` pair per line with
    /// 0-based indices. Blank lines and `#` comments are skipped; a comment of
    /// the form `# nodes N` fixes the node count, otherwise it is
    /// `node_count` if given, else one past the largest index seen.
    pub fn parse_edge_list(text: &str, node_count: Option<usize>) -> Result<Self, TopologyError> {
        let mut declared = None;
        let mut edges = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                let mut words = comment.split_whitespace();
                if words.next() == Some("nodes") {
                    let value = words.next().ok_or_else(|| TopologyError::Parse {
                        line: line_no,
                        message: "missing node count after `nodes`".into(),
                    })?;
                    let n = value.parse::<usize>().map_err(|e| TopologyError::Parse {
                        line: line_no,
                        message: format!("bad node count `{value}`: {e}"),
                    })?;
                    declared = Some(n);
                }
                continue;
            }
            let mut fields = line.split_whitespace();
            let mut next_index = |what: &str| -> Result<usize, TopologyError> {
                let tok = fields.next().ok_or_else(|| TopologyError::Parse {
                    line: line_no,
                    message: format!("missing `{what}` index"),
                })?;
                tok.parse::<usize>().map_err(|e| TopologyError::Parse {
                    line: line_no,
                    message: format!("bad `{what}` index `{tok}`: {e}"),
                })
            };
            let from = next_index("from")?;
            let to = next_index("to")?;
            if fields.next().is_some() {
                return Err(TopologyError::Parse {
                    line: line_no,
                    message: "expected exactly two indices".into(),
                });
            }
            edges.push((from, to));
        }
        let n = match declared.or(node_count) {
            Some(n) => n,
            None => edges
                .iter()
                .map(|&(a, b)| a.max(b) + 1)
                .max()
                .ok_or(TopologyError::EmptyGraph)?,
        };
        Self::new(n, edges)
    }

    pub fn to_edge_list(&self) -> String {
        let mut out = format!("# nodes {}\n", self.node_count);
        for (a, b) in &self.edges {
            let _ = writeln!(out, "{a} {b}");
        }
        out
    }
}

/// True iff every node reaches every other node along directed edges.
/// One forward and one backward search from node 0 suffice.
pub fn is_strongly_connected(g: &Digraph) -> bool {
    let n = g.node_count();
    let mut forward = vec![Vec::new(); n];
    let mut backward = vec![Vec::new(); n];
    for (a, b) in g.edges() {
        forward[a].push(b);
        backward[b].push(a);
    }
    reaches_all(&forward) && reaches_all(&backward)
}

fn reaches_all(adjacency: &[Vec<usize>]) -> bool {
    let n = adjacency.len();
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut count = 1;
    while let Some(node) = queue.pop_front() {
        for &next in &adjacency[node] {
            if !seen[next] {
                seen[next] = true;
                count += 1;
                queue.push_back(next);
            }
        }
    }
    count == n
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Reachability closure by BFS from every node.
    fn closure_oracle(g: &Digraph) -> bool {
        let n = g.node_count();
        (0..n).all(|s| {
            let mut seen = vec![false; n];
            seen[s] = true;
            let mut stack = vec![s];
            while let Some(a) = stack.pop() {
                for b in g.out_neighbors(a) {
                    if !seen[b] {
                        seen[b] = true;
                        stack.push(b);
                    }
                }
            }
            seen.iter().all(|&x| x)
        })
    }

    #[test]
    fn ring_is_strongly_connected() {
        let g = Digraph::new(3, [(0, 1), (1, 2), (2, 0)]).unwrap();
        assert!(is_strongly_connected(&g));
    }

    #[test]
    fn single_edge_is_not() {
        let g = Digraph::new(2, [(0, 1)]).unwrap();
        assert!(!is_strongly_connected(&g));
    }

    #[test]
    fn single_node_is_trivially_connected() {
        assert!(is_strongly_connected(&Digraph::new(1, []).unwrap()));
    }

    #[test]
    fn agrees_with_closure_oracle_on_random_graphs() {
        for seed in 0..100u64 {
            let p = 0.08 + 0.02 * (seed % 10) as f64;
            let g = Digraph::random_erdos_renyi(10, p, seed).unwrap();
            assert_eq!(is_strongly_connected(&g), closure_oracle(&g), "seed {seed}");
        }
    }

    #[test]
    fn random_generator_is_strongly_connected_and_seeded() {
        for seed in 0..20 {
            let g = Digraph::random_strongly_connected(7, 4, seed).unwrap();
            assert!(closure_oracle(&g));
            assert_eq!(g, Digraph::random_strongly_connected(7, 4, seed).unwrap());
        }
        let full = Digraph::random_strongly_connected(4, 1000, 1).unwrap();
        assert_eq!(full.edge_count(), 12);
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(matches!(
            Digraph::new(2, [(0, 0)]),
            Err(TopologyError::SelfLoop(0))
        ));
        assert!(matches!(
            Digraph::new(2, [(0, 2)]),
            Err(TopologyError::NodeOutOfRange { .. })
        ));
        assert!(matches!(
            Digraph::new(2, [(0, 1), (0, 1)]),
            Err(TopologyError::DuplicateEdge { .. })
        ));
    }

    #[test]
    fn degrees() {
        let g = Digraph::new(3, [(0, 1), (2, 1), (1, 0)]).unwrap();
        assert_eq!(g.in_degree(1), 2);
        assert_eq!(g.out_degree(1), 1);
        assert_eq!(g.out_neighbors(0).collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn edge_list_round_trip_and_errors() {
        let g = Digraph::random_strongly_connected(6, 3, 9).unwrap();
        let text = g.to_edge_list();
        assert_eq!(Digraph::parse_edge_list(&text, None).unwrap(), g);

        let g = Digraph::parse_edge_list("0 1\n\n# comment\n1 0\n", None).unwrap();
        assert_eq!(g.node_count(), 2);
        let err = Digraph::parse_edge_list("0 1\n1 x\n", None).unwrap_err();
        assert!(matches!(err, TopologyError::Parse { line: 2, .. }));
        assert!(Digraph::parse_edge_list("0 1 2\n", None).is_err());
        assert!(Digraph::parse_edge_list("", None).is_err());
        assert_eq!(
            Digraph::parse_edge_list("0 1\n1 0\n", Some(3))
                .unwrap()
                .node_count(),
            3
        );
    }
}
