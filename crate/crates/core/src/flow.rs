//! Dinic max-flow over real capacities.

use std::collections::VecDeque;

use crate::scalar::Scalar;

#[derive(Debug, Clone)]
struct Edge<T> {
    to: usize,
    cap: T,
}

#[derive(Debug, Clone)]
pub(crate) struct FlowNetwork<T> {
    adj: Vec<Vec<usize>>,
    edges: Vec<Edge<T>>,
    eps: T,
}

impl<T: Scalar> FlowNetwork<T> {
    /// Residual capacities at or below `eps` count as saturated.
    pub fn new(nodes: usize, eps: T) -> Self {
        FlowNetwork { adj: vec![Vec::new(); nodes], edges: Vec::new(), eps }
    }

    pub fn add_edge(&mut self, from: usize, to: usize, cap: T) {
        self.adj[from].push(self.edges.len());
        self.edges.push(Edge { to, cap });
        self.adj[to].push(self.edges.len());
        self.edges.push(Edge { to: from, cap: T::zero() });
    }

    fn levels(&self, s: usize, t: usize) -> Option<Vec<usize>> {
        let mut level = vec![usize::MAX; self.adj.len()];
        level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &e in &self.adj[u] {
                let Edge { to, cap } = self.edges[e];
                if cap > self.eps && level[to] == usize::MAX {
                    level[to] = level[u] + 1;
                    queue.push_back(to);
                }
            }
        }
        (level[t] != usize::MAX).then_some(level)
    }

    fn push(&mut self, u: usize, t: usize, limit: T, level: &[usize], next: &mut [usize]) -> T {
        if u == t {
            return limit;
        }
        while next[u] < self.adj[u].len() {
            let e = self.adj[u][next[u]];
            let Edge { to, cap } = self.edges[e];
            if cap > self.eps && level[to] == level[u] + 1 {
                let pushed = self.push(to, t, limit.min(cap), level, next);
                if pushed > self.eps {
                    self.edges[e].cap -= pushed;
                    self.edges[e ^ 1].cap += pushed;
                    return pushed;
                }
            }
            next[u] += 1;
        }
        T::zero()
    }

    pub fn max_flow(&mut self, s: usize, t: usize) -> T {
        let mut total = T::zero();
        while let Some(level) = self.levels(s, t) {
            let mut next = vec![0; self.adj.len()];
            loop {
                let pushed = self.push(s, t, T::infinity(), &level, &mut next);
                if pushed <= self.eps {
                    break;
                }
                total += pushed;
            }
        }
        total
    }
}
