//! Multi-commodity flow: one customer per source vertex, shortest-path
//! oracles, and decoding of solver output into path and edge flows.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::{Customer, Instance};
use crate::norm::{LoadVector, WeightVector};
use crate::oracle::{check_price, LinearOracle, OracleAnswer, Witness};
use crate::solver::{binary_search_solve, Solution, SolveReport};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Edge {
    pub label: String,
    pub tail: usize,
    pub head: usize,
    pub capacity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Commodity {
    pub source: usize,
    pub sink: usize,
    pub demand: f64,
}

/// Directed capacitated graph with commodities. Edge `e` is resource `e`.
#[derive(Debug, Clone)]
pub struct FlowNetwork {
    nodes: Vec<String>,
    edges: Vec<Edge>,
    commodities: Vec<Commodity>,
    outgoing: Vec<Vec<usize>>,
}

impl FlowNetwork {
    pub fn new(nodes: Vec<String>, edges: Vec<Edge>, commodities: Vec<Commodity>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Empty("node list"));
        }
        if edges.is_empty() {
            return Err(Error::Empty("edge list"));
        }
        if commodities.is_empty() {
            return Err(Error::Empty("commodity list"));
        }
        let v = nodes.len();
        let mut outgoing = vec![Vec::new(); v];
        for (id, e) in edges.iter().enumerate() {
            if e.tail >= v || e.head >= v {
                return Err(Error::Network(format!(
                    "edge {id} has an endpoint outside the node list"
                )));
            }
            if !(e.capacity.is_finite() && e.capacity > 0.0) {
                return Err(Error::Network(format!(
                    "edge {id} has capacity {}",
                    e.capacity
                )));
            }
            outgoing[e.tail].push(id);
        }
        let net = Self {
            nodes,
            edges,
            commodities,
            outgoing,
        };
        for (k, c) in net.commodities.iter().enumerate() {
            if c.source >= v || c.sink >= v {
                return Err(Error::Network(format!(
                    "commodity {k} has an endpoint outside the node list"
                )));
            }
            if c.source == c.sink {
                return Err(Error::Network(format!(
                    "commodity {k} has identical source and sink"
                )));
            }
            if !(c.demand.is_finite() && c.demand > 0.0) {
                return Err(Error::Network(format!(
                    "commodity {k} has demand {}",
                    c.demand
                )));
            }
            if !net.reachable(c.source)[c.sink] {
                return Err(Error::Network(format!(
                    "sink `{}` of commodity {k} is unreachable from `{}`",
                    net.nodes[c.sink], net.nodes[c.source]
                )));
            }
        }
        Ok(net)
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn commodities(&self) -> &[Commodity] {
        &self.commodities
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n == name)
    }

    fn reachable(&self, from: usize) -> Vec<bool> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![from];
        seen[from] = true;
        while let Some(u) = stack.pop() {
            for &e in &self.outgoing[u] {
                let h = self.edges[e].head;
                if !seen[h] {
                    seen[h] = true;
                    stack.push(h);
                }
            }
        }
        seen
    }

    /// Shortest-path tree from `source` under edge lengths `lengths`. Among
    /// equally short ways into a node, the predecessor edge with the smallest
    /// id wins.
    fn shortest_paths(&self, source: usize, lengths: &[f64]) -> (Vec<f64>, Vec<Option<usize>>) {
        let v = self.nodes.len();
        let mut dist = vec![f64::INFINITY; v];
        let mut pred: Vec<Option<usize>> = vec![None; v];
        let mut settled = vec![false; v];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(Reverse(HeapEntry(0.0, source)));
        while let Some(Reverse(HeapEntry(d, u))) = heap.pop() {
            if settled[u] || d > dist[u] {
                continue;
            }
            settled[u] = true;
            for &e in &self.outgoing[u] {
                let h = self.edges[e].head;
                if settled[h] {
                    continue;
                }
                let nd = d + lengths[e];
                if nd < dist[h] {
                    dist[h] = nd;
                    pred[h] = Some(e);
                    heap.push(Reverse(HeapEntry(nd, h)));
                } else if nd == dist[h] && pred[h].is_some_and(|p| e < p) {
                    pred[h] = Some(e);
                }
            }
        }
        (dist, pred)
    }

    fn path_to(&self, source: usize, sink: usize, pred: &[Option<usize>]) -> Vec<usize> {
        let mut path = Vec::new();
        let mut node = sink;
        while node != source {
            let e = pred[node].expect("sink reachable");
            path.push(e);
            node = self.edges[e].tail;
        }
        path.reverse();
        path
    }

    /// Every simple path from `from` to `to`, as edge-id lists.
    pub fn simple_paths(&self, from: usize, to: usize) -> Vec<Vec<usize>> {
        fn walk(
            net: &FlowNetwork,
            u: usize,
            to: usize,
            on: &mut [bool],
            path: &mut Vec<usize>,
            out: &mut Vec<Vec<usize>>,
        ) {
            if u == to {
                out.push(path.clone());
                return;
            }
            for &e in &net.outgoing[u] {
                let h = net.edges[e].head;
                if !on[h] {
                    on[h] = true;
                    path.push(e);
                    walk(net, h, to, on, path, out);
                    path.pop();
                    on[h] = false;
                }
            }
        }
        let mut on = vec![false; self.nodes.len()];
        on[from] = true;
        let mut out = Vec::new();
        walk(self, from, to, &mut on, &mut Vec::new(), &mut out);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapEntry(f64, usize);

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

/// All commodities leaving one source vertex. Its feasible set is the
/// convex hull of one routing path per commodity, in congestion units.
#[derive(Debug, Clone)]
pub struct SourceCustomer {
    network: Arc<FlowNetwork>,
    source: usize,
    commodities: Vec<usize>,
}

impl SourceCustomer {
    pub fn new(network: Arc<FlowNetwork>, source: usize, commodities: Vec<usize>) -> Result<Self> {
        if commodities.is_empty() {
            return Err(Error::Empty("sink list"));
        }
        for &k in &commodities {
            match network.commodities.get(k) {
                Some(c) if c.source == source => {}
                _ => {
                    return Err(Error::Network(format!(
                        "commodity {k} does not leave node {source}"
                    )))
                }
            }
        }
        Ok(Self {
            network,
            source,
            commodities,
        })
    }

    pub fn source(&self) -> usize {
        self.source
    }

    /// Indices into the network's commodity list, in witness order.
    pub fn commodities(&self) -> &[usize] {
        &self.commodities
    }

    /// The load vector of routing commodity `k` of this customer along `paths[k]`.
    pub fn load_of(&self, paths: &[Vec<usize>]) -> Vec<f64> {
        let net = &self.network;
        let mut load = vec![0.0; net.edges.len()];
        for (&k, path) in self.commodities.iter().zip(paths) {
            let demand = net.commodities[k].demand;
            for &e in path {
                load[e] += demand / net.edges[e].capacity;
            }
        }
        load
    }
}

impl LinearOracle for SourceCustomer {
    fn dim(&self) -> usize {
        self.network.edges.len()
    }

    fn min_linear(&self, price: &[f64]) -> Result<OracleAnswer> {
        let net = &self.network;
        check_price(net.edges.len(), price)?;
        let lengths: Vec<f64> = price
            .iter()
            .zip(&net.edges)
            .map(|(p, e)| p / e.capacity)
            .collect();
        let (dist, pred) = net.shortest_paths(self.source, &lengths);
        let paths: Vec<Vec<usize>> = self
            .commodities
            .iter()
            .map(|&k| {
                let sink = net.commodities[k].sink;
                if dist[sink].is_finite() {
                    Ok(net.path_to(self.source, sink, &pred))
                } else {
                    Err(Error::Network(format!(
                        "sink `{}` unreachable",
                        net.nodes[sink]
                    )))
                }
            })
            .collect::<Result<_>>()?;
        let point = LoadVector::new(self.load_of(&paths))?;
        Ok(OracleAnswer::new(point, price, Witness::Paths(paths)))
    }
}

/// Groups commodities by source, in order of first appearance.
pub fn build_customers(network: &Arc<FlowNetwork>) -> Result<Vec<SourceCustomer>> {
    let mut order: Vec<usize> = Vec::new();
    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    for (k, c) in network.commodities.iter().enumerate() {
        groups
            .entry(c.source)
            .or_insert_with(|| {
                order.push(c.source);
                Vec::new()
            })
            .push(k);
    }
    order
        .into_iter()
        .map(|s| SourceCustomer::new(network.clone(), s, groups.remove(&s).unwrap_or_default()))
        .collect()
}

/// The solver instance of a network under weights `weights` (one per edge).
pub fn network_instance(
    network: &Arc<FlowNetwork>,
    weights: WeightVector,
) -> Result<(Instance, Vec<SourceCustomer>)> {
    let groups = build_customers(network)?;
    let customers = groups
        .iter()
        .map(|g| Customer::new(network.nodes[g.source].clone(), Arc::new(g.clone())))
        .collect::<Result<Vec<_>>>()?;
    Ok((Instance::new(weights, customers)?, groups))
}

/// Vertices of every customer's path polytope: one per combination of simple
/// paths for its commodities. Intended for exhaustive checks on small graphs.
pub fn path_polytope_vertices(
    network: &Arc<FlowNetwork>,
    limit: usize,
) -> Result<Vec<Vec<Vec<f64>>>> {
    let mut all = Vec::new();
    for g in build_customers(network)? {
        let options: Vec<Vec<Vec<usize>>> = g
            .commodities
            .iter()
            .map(|&k| {
                let c = &network.commodities[k];
                network.simple_paths(c.source, c.sink)
            })
            .collect();
        let count = options
            .iter()
            .try_fold(1usize, |acc, o| acc.checked_mul(o.len()));
        if count.is_none_or(|c| c > limit) {
            return Err(Error::TooLarge(format!(
                "customer at node {} has too many path combinations",
                g.source
            )));
        }
        let mut vertices = Vec::new();
        let mut choice = vec![0usize; options.len()];
        loop {
            let paths: Vec<Vec<usize>> = choice
                .iter()
                .zip(&options)
                .map(|(&i, o)| o[i].clone())
                .collect();
            vertices.push(g.load_of(&paths));
            let mut pos = 0;
            while pos < choice.len() {
                choice[pos] += 1;
                if choice[pos] < options[pos].len() {
                    break;
                }
                choice[pos] = 0;
                pos += 1;
            }
            if pos == choice.len() {
                break;
            }
        }
        all.push(vertices);
    }
    Ok(all)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathFlow {
    pub commodity: usize,
    pub source: String,
    pub sink: String,
    pub edges: Vec<usize>,
    pub flow: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeFlow {
    pub edge: String,
    pub flow: f64,
    pub capacity: f64,
    pub congestion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowReport {
    pub objective: f64,
    pub congestion: Vec<f64>,
    pub edges: Vec<EdgeFlow>,
    pub paths: Vec<PathFlow>,
    pub solve: SolveReport,
}

/// Turns per-customer path combinations into merged path flows and edge flows.
pub fn decode_flows(
    network: &FlowNetwork,
    groups: &[SourceCustomer],
    solution: &Solution,
) -> Result<(Vec<PathFlow>, Vec<EdgeFlow>)> {
    let mut paths: Vec<PathFlow> = Vec::new();
    let mut index: HashMap<(usize, Vec<usize>), usize> = HashMap::new();
    for (group, customer) in groups.iter().zip(&solution.customers) {
        for part in &customer.parts {
            let Witness::Paths(list) = &part.witness else {
                return Err(Error::Network(format!(
                    "customer `{}` has a non-path witness",
                    customer.id
                )));
            };
            for (&k, path) in group.commodities.iter().zip(list) {
                let c = &network.commodities[k];
                let flow = part.coefficient * c.demand;
                let slot = *index.entry((k, path.clone())).or_insert_with(|| {
                    paths.push(PathFlow {
                        commodity: k,
                        source: network.nodes[c.source].clone(),
                        sink: network.nodes[c.sink].clone(),
                        edges: path.clone(),
                        flow: 0.0,
                    });
                    paths.len() - 1
                });
                paths[slot].flow += flow;
            }
        }
    }
    paths.sort_by(|a, b| {
        a.commodity
            .cmp(&b.commodity)
            .then_with(|| a.edges.cmp(&b.edges))
    });
    let mut flow = vec![0.0; network.edges.len()];
    for p in &paths {
        for &e in &p.edges {
            flow[e] += p.flow;
        }
    }
    let edges = network
        .edges
        .iter()
        .zip(flow)
        .map(|(e, f)| EdgeFlow {
            edge: e.label.clone(),
            flow: f,
            capacity: e.capacity,
            congestion: f / e.capacity,
        })
        .collect();
    Ok((paths, edges))
}

/// `(1 + ε)`-approximate minimum-norm congestion routing.
pub fn solve_mcf(
    network: &Arc<FlowNetwork>,
    weights: WeightVector,
    epsilon: f64,
    seed: u64,
) -> Result<FlowReport> {
    let (instance, groups) = network_instance(network, weights)?;
    let solve = binary_search_solve(&instance, epsilon, seed, 1.0)?;
    let solution = solve
        .solution
        .as_ref()
        .ok_or_else(|| Error::NotConverged("binary search returned no solution".into()))?;
    let (paths, edges) = decode_flows(network, &groups, solution)?;
    let congestion: Vec<f64> = edges.iter().map(|e| e.congestion).collect();
    let objective = instance.weights().evaluate(&congestion)?;
    Ok(FlowReport {
        objective,
        congestion,
        edges,
        paths,
        solve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edge(tail: usize, head: usize, capacity: f64) -> Edge {
        Edge {
            label: format!("{tail}-{head}"),
            tail,
            head,
            capacity,
        }
    }

    fn commodity(source: usize, sink: usize, demand: f64) -> Commodity {
        Commodity {
            source,
            sink,
            demand,
        }
    }

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("v{i}")).collect()
    }

    fn parallel() -> Arc<FlowNetwork> {
        Arc::new(
            FlowNetwork::new(
                names(2),
                vec![edge(0, 1, 1.0), edge(0, 1, 1.0)],
                vec![commodity(0, 1, 1.0)],
            )
            .unwrap(),
        )
    }

    #[test]
    fn grouping_by_source() {
        let net = Arc::new(
            FlowNetwork::new(
                names(4),
                vec![edge(0, 2, 1.0), edge(0, 3, 1.0), edge(1, 2, 1.0)],
                vec![
                    commodity(0, 2, 1.0),
                    commodity(0, 3, 1.0),
                    commodity(1, 2, 1.0),
                ],
            )
            .unwrap(),
        );
        let groups = build_customers(&net).unwrap();
        assert_eq!(groups.len(), 2);
        assert_eq!(groups[0].commodities(), &[0, 1]);
        assert_eq!(groups[1].commodities(), &[2]);
        assert_eq!(build_customers(&parallel()).unwrap().len(), 1);
    }

    #[test]
    fn parallel_edges_and_tie_rule() {
        let c = &build_customers(&parallel()).unwrap()[0];
        let a = c.min_linear(&[0.3, 0.7]).unwrap();
        assert_eq!(a.point.to_vec(), vec![1.0, 0.0]);
        assert!((a.cost - 0.3).abs() < 1e-15);
        let a = c.min_linear(&[0.7, 0.3]).unwrap();
        assert_eq!(a.point.to_vec(), vec![0.0, 1.0]);
        let a = c.min_linear(&[0.5, 0.5]).unwrap();
        assert_eq!(a.witness, Witness::Paths(vec![vec![0]]));
    }

    #[test]
    fn path_graph_load() {
        let net = Arc::new(
            FlowNetwork::new(
                names(3),
                vec![edge(0, 1, 2.0), edge(1, 2, 4.0)],
                vec![commodity(0, 2, 1.0)],
            )
            .unwrap(),
        );
        let c = &build_customers(&net).unwrap()[0];
        let a = c.min_linear(&[0.3, 0.8]).unwrap();
        assert_eq!(a.point.to_vec(), vec![0.5, 0.25]);
        assert!((a.cost - (0.3 / 2.0 + 0.8 / 4.0)).abs() < 1e-15);
    }

    #[test]
    fn tie_prefers_smaller_predecessor_edge() {
        // two routes 0->1->3 (edges 0, 2) and 0->2->3 (edges 1, 3) of equal length;
        // node 3 is reached first through edge 3 but edge 2 is smaller
        let net = Arc::new(
            FlowNetwork::new(
                names(4),
                vec![
                    edge(0, 2, 1.0),
                    edge(0, 1, 1.0),
                    edge(2, 3, 1.0),
                    edge(1, 3, 1.0),
                ],
                vec![commodity(0, 3, 1.0)],
            )
            .unwrap(),
        );
        let c = &build_customers(&net).unwrap()[0];
        let a = c.min_linear(&[0.25; 4]).unwrap();
        assert_eq!(a.witness, Witness::Paths(vec![vec![0, 2]]));
    }

    #[test]
    fn load_validation() {
        assert!(
            FlowNetwork::new(names(2), vec![edge(0, 1, 0.0)], vec![commodity(0, 1, 1.0)]).is_err()
        );
        assert!(
            FlowNetwork::new(names(2), vec![edge(0, 1, 1.0)], vec![commodity(1, 0, 1.0)]).is_err()
        );
        assert!(
            FlowNetwork::new(names(2), vec![edge(0, 1, 1.0)], vec![commodity(0, 1, -1.0)]).is_err()
        );
        assert!(
            FlowNetwork::new(names(2), vec![edge(0, 5, 1.0)], vec![commodity(0, 1, 1.0)]).is_err()
        );
    }

    #[test]
    fn oracle_matches_path_enumeration() {
        let net = Arc::new(
            FlowNetwork::new(
                names(4),
                vec![
                    edge(0, 1, 1.0),
                    edge(0, 2, 2.0),
                    edge(1, 2, 1.0),
                    edge(1, 3, 3.0),
                    edge(2, 3, 1.0),
                    edge(2, 1, 1.5),
                ],
                vec![commodity(0, 3, 1.0), commodity(0, 2, 0.5)],
            )
            .unwrap(),
        );
        let vertices = path_polytope_vertices(&net, 1000).unwrap();
        let c = &build_customers(&net).unwrap()[0];
        for price in [
            [0.1, 0.2, 0.3, 0.1, 0.2, 0.1],
            [0.0, 0.5, 0.0, 0.5, 0.0, 0.0],
            [1.0; 6],
        ] {
            let best = vertices[0]
                .iter()
                .map(|v| v.iter().zip(&price).map(|(a, b)| a * b).sum::<f64>())
                .fold(f64::INFINITY, f64::min);
            let a = c.min_linear(&price).unwrap();
            assert!((a.cost - best).abs() < 1e-12, "{} vs {best}", a.cost);
        }
    }

    #[test]
    fn mcf_parallel_edges() {
        let r = solve_mcf(&parallel(), WeightVector::linf(2).unwrap(), 0.1, 0).unwrap();
        assert!(r.objective <= 0.55 + 1e-9, "{}", r.objective);
        let total: f64 = r.paths.iter().map(|p| p.flow).sum();
        assert!((total - 1.0).abs() < 1e-9);
        let r = solve_mcf(&parallel(), WeightVector::uniform(2).unwrap(), 0.1, 0).unwrap();
        assert!((r.objective - 0.5).abs() < 1e-6);
    }
}
