//! Min-cost flow by successive shortest paths with node potentials.
//!
//! Costs must be non-negative on every arc. Capacities may be
//! `f64::INFINITY`. Each augmentation moves exactly the bottleneck amount,
//! so the limiting residual, excess or deficit drops to exactly zero.

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
struct Edge {
    to: usize,
    residual: f64,
    cost: f64,
}

/// Directed network with residual bookkeeping. Arc `a` is stored as edge
/// `2a` (forward) and `2a + 1` (reverse).
#[derive(Clone, Debug, Default)]
pub struct Network {
    edges: Vec<Edge>,
    adj: Vec<Vec<usize>>,
    tails: Vec<usize>,
}

impl Network {
    pub fn new(nodes: usize) -> Network {
        Network {
            edges: Vec::new(),
            adj: vec![Vec::new(); nodes],
            tails: Vec::new(),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.adj.len()
    }

    pub fn num_arcs(&self) -> usize {
        self.tails.len()
    }

    pub fn add_arc(&mut self, from: usize, to: usize, cap: f64, cost: f64) -> usize {
        debug_assert!(cap >= 0.0 && cost >= 0.0 && cost.is_finite());
        let id = self.tails.len();
        self.adj[from].push(self.edges.len());
        self.edges.push(Edge {
            to,
            residual: cap,
            cost,
        });
        self.adj[to].push(self.edges.len());
        self.edges.push(Edge {
            to: from,
            residual: 0.0,
            cost: -cost,
        });
        self.tails.push(from);
        id
    }

    pub fn flow(&self, arc: usize) -> f64 {
        self.edges[2 * arc + 1].residual
    }

    pub fn cost(&self, arc: usize) -> f64 {
        self.edges[2 * arc].cost
    }

    pub fn total_cost(&self) -> f64 {
        (0..self.num_arcs())
            .map(|a| self.flow(a) * self.cost(a))
            .sum()
    }

    /// Route `supply` (positive = source, negative = sink; must sum to
    /// zero within rounding) at minimum cost. Returns the total cost.
    pub fn solve(&mut self, supply: &[f64]) -> Result<f64> {
        let n = self.num_nodes();
        assert_eq!(supply.len(), n);
        let mut excess = supply.to_vec();
        let mut pot = vec![0.0; n];
        let mut dist = vec![f64::INFINITY; n];
        let mut parent = vec![usize::MAX; n];
        let mut done = vec![false; n];
        let cap = 100 * (self.edges.len() + n) + 10_000;

        for _ in 0..cap {
            if !excess.iter().any(|&e| e > 0.0) || !excess.iter().any(|&e| e < 0.0) {
                return Ok(self.total_cost());
            }
            dist.fill(f64::INFINITY);
            parent.fill(usize::MAX);
            done.fill(false);
            for v in 0..n {
                if excess[v] > 0.0 {
                    dist[v] = 0.0;
                }
            }
            // dense Dijkstra; networks here have at most a few hundred nodes
            let mut target = None;
            loop {
                let mut u = usize::MAX;
                let mut best = f64::INFINITY;
                for v in 0..n {
                    if !done[v] && dist[v] < best {
                        best = dist[v];
                        u = v;
                    }
                }
                if u == usize::MAX {
                    break;
                }
                done[u] = true;
                if excess[u] < 0.0 {
                    target = Some(u);
                    break;
                }
                for &e in &self.adj[u] {
                    let edge = &self.edges[e];
                    if edge.residual <= 0.0 || done[edge.to] {
                        continue;
                    }
                    let rc = (edge.cost + pot[u] - pot[edge.to]).max(0.0);
                    let nd = dist[u] + rc;
                    if nd < dist[edge.to] {
                        dist[edge.to] = nd;
                        parent[edge.to] = e;
                    }
                }
            }
            let Some(t) = target else {
                return Err(Error::Numerical("min-cost flow: demand unreachable".into()));
            };
            let dt = dist[t];
            for v in 0..n {
                pot[v] += dist[v].min(dt);
            }

            let mut delta = -excess[t];
            let mut v = t;
            while parent[v] != usize::MAX {
                let e = parent[v];
                delta = delta.min(self.edges[e].residual);
                v = self.edges[e ^ 1].to;
            }
            let s = v;
            delta = delta.min(excess[s]);
            let mut v = t;
            while parent[v] != usize::MAX {
                let e = parent[v];
                self.edges[e].residual -= delta;
                self.edges[e ^ 1].residual += delta;
                v = self.edges[e ^ 1].to;
            }
            excess[s] = if delta == excess[s] {
                0.0
            } else {
                excess[s] - delta
            };
            excess[t] = if delta == -excess[t] {
                0.0
            } else {
                excess[t] + delta
            };
        }
        Err(Error::Numerical(
            "min-cost flow: augmentation limit reached".into(),
        ))
    }

    /// Shortest-path distances from `root` in the residual network, with a
    /// virtual arc of cost `ceiling` from `root` to every node so that all
    /// nodes get a finite label. Relaxations smaller than a relative 1e-12
    /// are ignored to absorb rounding.
    pub fn residual_potentials(&self, root: usize, ceiling: f64) -> Result<Vec<f64>> {
        let n = self.num_nodes();
        let mut d = vec![ceiling; n];
        d[root] = 0.0;
        for _ in 0..=n {
            let mut changed = false;
            for (e, edge) in self.edges.iter().enumerate() {
                if edge.residual <= 0.0 {
                    continue;
                }
                let u = self.edges[e ^ 1].to;
                let nd = d[u] + edge.cost;
                if nd < d[edge.to] - 1e-12 * (1.0 + d[edge.to].abs()) {
                    d[edge.to] = nd;
                    changed = true;
                }
            }
            if !changed {
                return Ok(d);
            }
        }
        Err(Error::Numerical(
            "negative cycle in residual network".into(),
        ))
    }

    pub fn tail(&self, arc: usize) -> usize {
        self.tails[arc]
    }

    pub fn head(&self, arc: usize) -> usize {
        self.edges[2 * arc].to
    }
}
