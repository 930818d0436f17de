//! Max-flow with exact capacities (Edmonds–Karp).

use std::collections::VecDeque;

use num_traits::{Signed, Zero};

use crate::dist::Rat;

/// Edge capacity; `None` is unbounded.
pub type Cap = Option<Rat>;

#[derive(Clone, Debug)]
struct Edge {
    to: usize,
    cap: Cap,
    flow: Rat,
}

impl Edge {
    fn residual_positive(&self) -> bool {
        match &self.cap {
            None => true,
            Some(c) => (c - &self.flow).is_positive(),
        }
    }

    fn residual(&self) -> Cap {
        self.cap.as_ref().map(|c| c - &self.flow)
    }
}

#[derive(Clone, Debug, Default)]
pub struct FlowNet {
    edges: Vec<Edge>,
    adj: Vec<Vec<usize>>,
}

impl FlowNet {
    pub fn new(nodes: usize) -> Self {
        FlowNet {
            edges: Vec::new(),
            adj: vec![Vec::new(); nodes],
        }
    }

    pub fn add_edge(&mut self, from: usize, to: usize, cap: Cap) {
        self.adj[from].push(self.edges.len());
        self.edges.push(Edge {
            to,
            cap,
            flow: Rat::zero(),
        });
        self.adj[to].push(self.edges.len());
        self.edges.push(Edge {
            to: from,
            cap: Some(Rat::zero()),
            flow: Rat::zero(),
        });
    }

    /// Maximum flow value, or `None` if an unbounded path exists.
    pub fn max_flow(&mut self, s: usize, t: usize) -> Option<Rat> {
        let mut total = Rat::zero();
        loop {
            let mut prev: Vec<Option<usize>> = vec![None; self.adj.len()];
            let mut seen = vec![false; self.adj.len()];
            seen[s] = true;
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for &e in &self.adj[u] {
                    let v = self.edges[e].to;
                    if !seen[v] && self.edges[e].residual_positive() {
                        seen[v] = true;
                        prev[v] = Some(e);
                        queue.push_back(v);
                    }
                }
            }
            if !seen[t] {
                return Some(total);
            }
            let mut path = Vec::new();
            let mut v = t;
            while v != s {
                let e = prev[v].expect("bfs tree reaches source");
                path.push(e);
                v = self.edges[e ^ 1].to;
            }
            let mut push: Cap = None;
            for &e in &path {
                push = match (push, self.edges[e].residual()) {
                    (None, r) => r,
                    (Some(p), None) => Some(p),
                    (Some(p), Some(r)) => Some(if r < p { r } else { p }),
                };
            }
            let amount = push?;
            for &e in &path {
                self.edges[e].flow += &amount;
                self.edges[e ^ 1].flow -= &amount;
            }
            total += amount;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{rat, rat_int};

    #[test]
    fn diamond() {
        let mut g = FlowNet::new(4);
        g.add_edge(0, 1, Some(rat_int(3)));
        g.add_edge(0, 2, Some(rat_int(2)));
        g.add_edge(1, 2, Some(rat_int(5)));
        g.add_edge(1, 3, Some(rat_int(2)));
        g.add_edge(2, 3, Some(rat_int(3)));
        assert_eq!(g.max_flow(0, 3), Some(rat_int(5)));
    }

    #[test]
    fn rational_caps_and_infinite_middle() {
        let mut g = FlowNet::new(4);
        g.add_edge(0, 1, Some(rat(1, 3)));
        g.add_edge(1, 2, None);
        g.add_edge(2, 3, Some(rat(1, 4)));
        assert_eq!(g.max_flow(0, 3), Some(rat(1, 4)));
    }

    #[test]
    fn unbounded_path() {
        let mut g = FlowNet::new(2);
        g.add_edge(0, 1, None);
        assert_eq!(g.max_flow(0, 1), None);
    }
}
