// SPDX-License-Identifier: Apache-2.0

//! Shortest-path spanning tree over the hybrid wired/wireless graph and the
//! per-switch forwarding tables derived from it.
//!
//! The tree is grown by Dijkstra from a seeded random root. Wireless tree
//! edges that share a WI form a single broadcast domain on the shared
//! medium: a flit entering that domain is sent in one wireless hop straight
//! to the member WI where it leaves the domain, and a broadcast flit sent by
//! one member is heard by all the others.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::topology::{Direction, Topology};

/// Switch port. Index order is fixed: local, N, E, S, W, wireless.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Port {
    Local,
    Wired(Direction),
    Wireless,
}

impl Port {
    pub const COUNT: usize = 6;

    pub const ALL: [Port; 6] = [
        Port::Local,
        Port::Wired(Direction::North),
        Port::Wired(Direction::East),
        Port::Wired(Direction::South),
        Port::Wired(Direction::West),
        Port::Wireless,
    ];

    pub fn index(self) -> usize {
        match self {
            Port::Local => 0,
            Port::Wired(Direction::North) => 1,
            Port::Wired(Direction::East) => 2,
            Port::Wired(Direction::South) => 3,
            Port::Wired(Direction::West) => 4,
            Port::Wireless => 5,
        }
    }

    pub fn from_index(i: usize) -> Port {
        Port::ALL[i]
    }

    pub fn name(self) -> &'static str {
        match self {
            Port::Local => "local",
            Port::Wired(Direction::North) => "north",
            Port::Wired(Direction::East) => "east",
            Port::Wired(Direction::South) => "south",
            Port::Wired(Direction::West) => "west",
            Port::Wireless => "wireless",
        }
    }
}

/// Small bitset over the six switch ports.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PortSet(pub u8);

impl PortSet {
    pub fn insert(&mut self, p: Port) {
        self.0 |= 1 << p.index();
    }

    pub fn contains(self, p: Port) -> bool {
        self.0 & (1 << p.index()) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Port> {
        Port::ALL.into_iter().filter(move |p| self.contains(*p))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeKind {
    Wired(Direction),
    Wireless,
}

impl EdgeKind {
    fn port(self) -> Port {
        match self {
            EdgeKind::Wired(d) => Port::Wired(d),
            EdgeKind::Wireless => Port::Wireless,
        }
    }
}

/// Adjacency of the hybrid graph: cardinal mesh links plus a clique among WIs.
pub struct HybridGraph<'a> {
    topo: &'a Topology,
    wireless_weight: f64,
}

impl<'a> HybridGraph<'a> {
    pub fn new(topo: &'a Topology, wireless_weight: f64) -> Self {
        HybridGraph { topo, wireless_weight }
    }

    /// Neighbors in ascending switch-ID order.
    pub fn neighbors(&self, u: usize) -> Vec<(usize, f64, EdgeKind)> {
        let mut out: Vec<(usize, f64, EdgeKind)> = Direction::ALL
            .into_iter()
            .filter_map(|d| self.topo.neighbor(u, d).map(|v| (v, 1.0, EdgeKind::Wired(d))))
            .collect();
        if self.topo.wi_at(u).is_some() {
            for &w in &self.topo.wi_set {
                if w != u && !out.iter().any(|&(v, _, _)| v == w) {
                    out.push((w, self.wireless_weight, EdgeKind::Wireless));
                }
            }
        }
        out.sort_by_key(|&(v, _, _)| v);
        out
    }

    pub fn len(&self) -> usize {
        self.topo.num_switches()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Copy, PartialEq)]
struct HeapEntry {
    dist: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source Dijkstra. Equal-cost ties keep the lowest-ID parent.
pub fn dijkstra(graph: &HybridGraph<'_>, src: usize) -> (Vec<f64>, Vec<Option<(usize, EdgeKind)>>) {
    let n = graph.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut parent: Vec<Option<(usize, EdgeKind)>> = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[src] = 0.0;
    heap.push(HeapEntry { dist: 0.0, node: src });
    while let Some(HeapEntry { dist: d, node: u }) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        for (v, w, kind) in graph.neighbors(u) {
            if done[v] {
                continue;
            }
            let nd = d + w;
            let better = nd < dist[v] || (nd == dist[v] && parent[v].is_some_and(|(p, _)| u < p));
            if better {
                dist[v] = nd;
                // Store the edge as seen from the child looking up to its parent.
                let back = match kind {
                    EdgeKind::Wired(dir) => EdgeKind::Wired(dir.opposite()),
                    EdgeKind::Wireless => EdgeKind::Wireless,
                };
                parent[v] = Some((u, back));
                heap.push(HeapEntry { dist: nd, node: v });
            }
        }
    }
    (dist, parent)
}

/// Shortest-path spanning tree rooted at `root`.
#[derive(Clone, Debug)]
pub struct SpanningTree {
    pub root: usize,
    /// Parent of each switch and the edge from the switch up to it.
    pub parent: Vec<Option<(usize, EdgeKind)>>,
    pub children: Vec<Vec<(usize, EdgeKind)>>,
    /// Root distance of every switch.
    pub dist: Vec<f64>,
    /// Wireless broadcast domain of each switch (set only for WIs touching a wireless tree edge).
    pub domain: Vec<Option<usize>>,
    pub domains: Vec<Vec<usize>>,
    tin: Vec<usize>,
    tout: Vec<usize>,
}

impl SpanningTree {
    pub fn from_root(topo: &Topology, wireless_hop_weight: f64, root: usize) -> Result<Self> {
        let graph = HybridGraph::new(topo, wireless_hop_weight);
        let n = graph.len();
        let (dist, parent) = dijkstra(&graph, root);
        if let Some(v) = dist.iter().position(|d| !d.is_finite()) {
            return Err(Error::Disconnected(v));
        }
        let mut children = vec![Vec::new(); n];
        for v in 0..n {
            if let Some((p, up)) = parent[v] {
                let down = match up {
                    EdgeKind::Wired(d) => EdgeKind::Wired(d.opposite()),
                    EdgeKind::Wireless => EdgeKind::Wireless,
                };
                children[p].push((v, down));
            }
        }
        // Euler tour for O(1) subtree membership.
        let mut tin = vec![0; n];
        let mut tout = vec![0; n];
        let mut timer = 0;
        let mut stack = vec![(root, 0usize)];
        while let Some((u, i)) = stack.pop() {
            if i == 0 {
                tin[u] = timer;
                timer += 1;
            }
            if i < children[u].len() {
                stack.push((u, i + 1));
                stack.push((children[u][i].0, 0));
            } else {
                tout[u] = timer;
            }
        }
        // Group WIs joined by wireless tree edges into broadcast domains.
        let mut domain: Vec<Option<usize>> = vec![None; n];
        let mut domains: Vec<Vec<usize>> = Vec::new();
        for v in 0..n {
            if let Some((p, EdgeKind::Wireless)) = parent[v] {
                let d = match domain[p] {
                    Some(d) => d,
                    None => {
                        domains.push(vec![p]);
                        domain[p] = Some(domains.len() - 1);
                        domains.len() - 1
                    }
                };
                domain[v] = Some(d);
                domains[d].push(v);
            }
        }
        // Domains are stars: a WI with a wireless parent has no wireless
        // children, since the parent reaches them in one hop.
        for d in domains.iter_mut() {
            d.sort_unstable();
        }
        Ok(SpanningTree { root, parent, children, dist, domain, domains, tin, tout })
    }

    /// `v` lies in the subtree rooted at `u`.
    pub fn in_subtree(&self, u: usize, v: usize) -> bool {
        self.tin[u] <= self.tin[v] && self.tin[v] < self.tout[u]
    }

    /// Tree neighbor of `here` on the path toward `dest` (`dest != here`).
    pub fn step_toward(&self, here: usize, dest: usize) -> (usize, EdgeKind) {
        for &(c, kind) in &self.children[here] {
            if self.in_subtree(c, dest) {
                return (c, kind);
            }
        }
        self.parent[here].expect("non-root switch has a parent")
    }

    /// All tree edges incident to `u`, as (neighbor, edge from `u`).
    pub fn tree_neighbors(&self, u: usize) -> impl Iterator<Item = (usize, EdgeKind)> + '_ {
        self.parent[u].into_iter().chain(self.children[u].iter().copied())
    }

    /// Hop distance between two switches along the tree.
    pub fn tree_path(&self, src: usize, dest: usize) -> Vec<usize> {
        let mut path = vec![src];
        let mut here = src;
        while here != dest {
            here = self.step_toward(here, dest).0;
            path.push(here);
        }
        path
    }
}

/// Picks the root with a seeded draw and builds the tree.
pub fn build_spanning_tree(topo: &Topology, wireless_hop_weight: f64, seed: u64) -> Result<SpanningTree> {
    if !(wireless_hop_weight > 0.0 && wireless_hop_weight.is_finite()) {
        return Err(Error::Config(format!("wireless hop weight must be positive, got {wireless_hop_weight}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let root = rng.random_range(0..topo.num_switches());
    SpanningTree::from_root(topo, wireless_hop_weight, root)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NextHop {
    pub port: Port,
    /// Switch reached through `port` (the switch itself for the local port).
    pub next: usize,
}

/// Per-switch destination → next-hop tables.
#[derive(Clone, Debug)]
pub struct ForwardingTable {
    n: usize,
    table: Vec<NextHop>,
    pub tree: SpanningTree,
}

impl ForwardingTable {
    pub fn new(tree: SpanningTree) -> Self {
        let n = tree.parent.len();
        let mut table = Vec::with_capacity(n * n);
        for here in 0..n {
            for dest in 0..n {
                if here == dest {
                    table.push(NextHop { port: Port::Local, next: here });
                    continue;
                }
                let (mut next, kind) = tree.step_toward(here, dest);
                if kind == EdgeKind::Wireless {
                    // Stay inside the broadcast domain: one hop to the exit member.
                    while next != dest {
                        let (n2, k2) = tree.step_toward(next, dest);
                        if k2 != EdgeKind::Wireless {
                            break;
                        }
                        next = n2;
                    }
                }
                table.push(NextHop { port: kind.port(), next });
            }
        }
        ForwardingTable { n, table, tree }
    }

    pub fn build(topo: &Topology, wireless_hop_weight: f64, seed: u64) -> Result<Self> {
        Ok(Self::new(build_spanning_tree(topo, wireless_hop_weight, seed)?))
    }

    pub fn num_switches(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn next_hop(&self, here: usize, dest: usize) -> NextHop {
        self.table[here * self.n + dest]
    }

    /// Switch sequence from `src` to `dest` following the tables.
    pub fn route(&self, src: usize, dest: usize) -> Vec<(usize, Port)> {
        let mut hops = Vec::new();
        let mut here = src;
        loop {
            let nh = self.next_hop(here, dest);
            hops.push((here, nh.port));
            if nh.port == Port::Local {
                return hops;
            }
            here = nh.next;
            assert!(hops.len() <= self.n, "forwarding loop from {src} to {dest}");
        }
    }

    /// Output ports for a broadcast flit that entered `here` through `arrival`.
    /// The source switch injects through the local port and does not deliver to itself.
    pub fn broadcast_ports(&self, here: usize, arrival: Port) -> PortSet {
        let mut set = PortSet::default();
        if arrival != Port::Local {
            set.insert(Port::Local);
        }
        for (_, kind) in self.tree.tree_neighbors(here) {
            let p = kind.port();
            if p != arrival {
                set.insert(p);
            }
        }
        set
    }

    /// WIs (by switch ID) that accept a wireless broadcast sent by `sender`.
    pub fn broadcast_receivers(&self, sender: usize) -> &[usize] {
        match self.tree.domain[sender] {
            Some(d) => &self.tree.domains[d],
            None => &[],
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["switch", "dest", "port", "next"])?;
        for here in 0..self.n {
            for dest in 0..self.n {
                let nh = self.next_hop(here, dest);
                wr.write_record([here.to_string(), dest.to_string(), nh.port.name().to_string(), nh.next.to_string()])?;
            }
        }
        wr.flush()?;
        Ok(())
    }
}
