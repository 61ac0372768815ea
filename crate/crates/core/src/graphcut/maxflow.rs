//! Dinic max-flow on real-valued capacities.
//!
//! Deterministic: edges are explored in insertion order. Termination with
//! floating-point capacities holds because every augmentation saturates at
//! least one edge exactly (the bottleneck residual is subtracted from
//! itself).

#[derive(Debug, Clone)]
struct Edge {
    to: u32,
    cap: f64,
}

#[derive(Debug)]
pub struct Dinic {
    edges: Vec<Edge>,
    adj: Vec<Vec<u32>>,
    level: Vec<i32>,
    iter: Vec<usize>,
}

impl Dinic {
    pub fn new(n: usize) -> Self {
        Self { edges: Vec::new(), adj: vec![Vec::new(); n], level: vec![0; n], iter: vec![0; n] }
    }

    pub fn add_edge(&mut self, from: u32, to: u32, cap: f64) {
        debug_assert!(cap >= 0.0);
        let id = self.edges.len() as u32;
        self.edges.push(Edge { to, cap });
        self.edges.push(Edge { to: from, cap: 0.0 });
        self.adj[from as usize].push(id);
        self.adj[to as usize].push(id + 1);
    }

    fn bfs(&mut self, s: u32, t: u32) -> bool {
        self.level.iter_mut().for_each(|l| *l = -1);
        let mut queue = std::collections::VecDeque::new();
        self.level[s as usize] = 0;
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            for &eid in &self.adj[u as usize] {
                let e = &self.edges[eid as usize];
                if e.cap > 0.0 && self.level[e.to as usize] < 0 {
                    self.level[e.to as usize] = self.level[u as usize] + 1;
                    queue.push_back(e.to);
                }
            }
        }
        self.level[t as usize] >= 0
    }

    fn dfs(&mut self, u: u32, t: u32, pushed: f64) -> f64 {
        if u == t {
            return pushed;
        }
        while self.iter[u as usize] < self.adj[u as usize].len() {
            let eid = self.adj[u as usize][self.iter[u as usize]] as usize;
            let (to, cap) = (self.edges[eid].to, self.edges[eid].cap);
            if cap > 0.0 && self.level[to as usize] == self.level[u as usize] + 1 {
                let d = self.dfs(to, t, pushed.min(cap));
                if d > 0.0 {
                    self.edges[eid].cap -= d;
                    self.edges[eid ^ 1].cap += d;
                    return d;
                }
            }
            self.iter[u as usize] += 1;
        }
        0.0
    }

    pub fn max_flow(&mut self, s: u32, t: u32) -> f64 {
        let mut flow = 0.0;
        while self.bfs(s, t) {
            self.iter.iter_mut().for_each(|i| *i = 0);
            loop {
                let f = self.dfs(s, t, f64::INFINITY);
                if f <= 0.0 {
                    break;
                }
                flow += f;
            }
        }
        flow
    }

    /// Nodes reachable from `s` in the residual network (the source side
    /// of the minimum cut).
    pub fn residual_reachable(&self, s: u32) -> Vec<bool> {
        let mut seen = vec![false; self.adj.len()];
        let mut queue = std::collections::VecDeque::new();
        seen[s as usize] = true;
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            for &eid in &self.adj[u as usize] {
                let e = &self.edges[eid as usize];
                if e.cap > 0.0 && !seen[e.to as usize] {
                    seen[e.to as usize] = true;
                    queue.push_back(e.to);
                }
            }
        }
        seen
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_path_flow() {
        let mut d = Dinic::new(4);
        d.add_edge(0, 1, 3.0);
        d.add_edge(1, 2, 2.0);
        d.add_edge(2, 3, 5.0);
        assert_eq!(d.max_flow(0, 3), 2.0);
        let reach = d.residual_reachable(0);
        assert_eq!(reach, vec![true, true, false, false]);
    }

    #[test]
    fn parallel_and_back_edges() {
        let mut d = Dinic::new(4);
        d.add_edge(0, 1, 1.0);
        d.add_edge(0, 2, 1.0);
        d.add_edge(1, 3, 1.0);
        d.add_edge(2, 3, 1.0);
        d.add_edge(1, 2, 1.0);
        assert_eq!(d.max_flow(0, 3), 2.0);
    }
}
