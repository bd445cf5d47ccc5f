//! Transport of `z0` treatment shares onto `z1` treatment shares.
//!
//! Node `x_l@0` receives `P[x_l | z0]` from the source, node `x_l@1` sends
//! `P[x_l | z1]` to the sink, and a cross edge `x_l@0 → x_m@1` exists for
//! every type `(x_l, x_m)` that is not ruled out. A type distribution is a
//! flow of value one.

use std::collections::VecDeque;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::obs::ObservedDistribution;
use crate::psi::PsiTable;
use crate::scalar::{sum, Scalar};
use crate::subset::Subset;
use crate::typespace::{RestrictionSpec, TypeDistribution, TypeSpace};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge<T> {
    pub from: usize,
    pub to: usize,
    pub capacity: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeRole {
    Source,
    /// Carries type `(x_a, x_b)`.
    Cross(usize, usize),
    Sink,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlowNetwork<T> {
    pub l: usize,
    pub edges: Vec<Edge<T>>,
    /// Negative entries are supplies; indexed by node, zero at source and sink.
    pub demands: Vec<T>,
}

impl<T: Scalar> FlowNetwork<T> {
    pub fn node_count(&self) -> usize {
        2 * self.l + 2
    }

    pub fn source(&self) -> usize {
        2 * self.l
    }

    pub fn sink(&self) -> usize {
        2 * self.l + 1
    }

    pub fn node_name(&self, v: usize) -> String {
        if v == self.source() {
            "SRC".into()
        } else if v == self.sink() {
            "SNK".into()
        } else if v < self.l {
            format!("x{v}@0")
        } else {
            format!("x{}@1", v - self.l)
        }
    }

    pub fn role(&self, e: usize) -> EdgeRole {
        let Edge { from, to, .. } = self.edges[e];
        if from == self.source() {
            EdgeRole::Source
        } else if to == self.sink() {
            EdgeRole::Sink
        } else {
            EdgeRole::Cross(from, to - self.l)
        }
    }

    pub fn cross_edges(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        (0..self.edges.len()).filter_map(|e| match self.role(e) {
            EdgeRole::Cross(a, b) => Some((e, a, b)),
            _ => None,
        })
    }

    /// One edge per line: `from to capacity`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for e in &self.edges {
            let _ = writeln!(out, "{} {} {}", self.node_name(e.from), self.node_name(e.to), e.capacity.to_fraction());
        }
        out
    }
}

pub fn build_network<T: Scalar>(
    d: &ObservedDistribution<T>,
    spec: &RestrictionSpec<T>,
    psi: &PsiTable<T>,
    use_exclusion_caps: bool,
) -> Result<FlowNetwork<T>> {
    if d.k() != 2 {
        return Err(Error::NeedsBinaryInstrument(d.k()));
    }
    if !spec.is_per_type() {
        return Err(Error::ExtraRowsInFlow);
    }
    let l = d.l();
    let ts = TypeSpace::new(l, 2, usize::MAX)?;
    let forbidden = spec.forbidden(&d.support, &ts)?;
    let (src, snk) = (2 * l, 2 * l + 1);
    let mut edges = Vec::new();
    for a in 0..l {
        edges.push(Edge { from: src, to: a, capacity: d.cond_treatment[0][a].clone() });
    }
    for j in (0..ts.len()).filter(|j| !forbidden.contains(j)) {
        let (a, b) = (ts.digit(j, 0), ts.digit(j, 1));
        let capacity = if a == b && use_exclusion_caps { psi.mass(a, Subset::full(2))?.clone() } else { T::one() };
        edges.push(Edge { from: a, to: l + b, capacity });
    }
    for b in 0..l {
        edges.push(Edge { from: l + b, to: snk, capacity: d.cond_treatment[1][b].clone() });
    }
    let mut demands = vec![T::zero(); 2 * l + 2];
    for a in 0..l {
        demands[a] = -d.cond_treatment[0][a].clone();
        demands[l + a] = d.cond_treatment[1][a].clone();
    }
    Ok(FlowNetwork { l, edges, demands })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaxFlow<T> {
    pub value: T,
    /// Flow on each edge of the network, in edge order.
    pub flow: Vec<T>,
}

/// Shortest augmenting paths (Edmonds–Karp).
pub fn max_flow<T: Scalar>(net: &FlowNetwork<T>) -> MaxFlow<T> {
    let nv = net.node_count();
    let (s, t) = (net.source(), net.sink());
    // Residual arcs: 2e is forward, 2e+1 is backward.
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nv];
    for (e, edge) in net.edges.iter().enumerate() {
        adj[edge.from].push(2 * e);
        adj[edge.to].push(2 * e + 1);
    }
    let mut flow = vec![T::zero(); net.edges.len()];
    let head = |arc: usize| if arc.is_multiple_of(2) { net.edges[arc / 2].to } else { net.edges[arc / 2].from };
    let residual = |arc: usize, flow: &[T]| {
        let e = arc / 2;
        if arc.is_multiple_of(2) {
            net.edges[e].capacity.clone() - flow[e].clone()
        } else {
            flow[e].clone()
        }
    };
    let mut value = T::zero();
    loop {
        let mut via: Vec<Option<usize>> = vec![None; nv];
        let mut seen = vec![false; nv];
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            if v == t {
                break;
            }
            for &arc in &adj[v] {
                let w = head(arc);
                if !seen[w] && residual(arc, &flow).is_positive() {
                    seen[w] = true;
                    via[w] = Some(arc);
                    queue.push_back(w);
                }
            }
        }
        if !seen[t] {
            break;
        }
        let mut path = Vec::new();
        let mut v = t;
        while let Some(arc) = via[v] {
            path.push(arc);
            v = if arc % 2 == 0 { net.edges[arc / 2].from } else { net.edges[arc / 2].to };
        }
        let bottleneck = path
            .iter()
            .map(|&a| residual(a, &flow))
            .min()
            .expect("augmenting path is nonempty");
        for &arc in &path {
            let e = arc / 2;
            flow[e] = if arc % 2 == 0 { flow[e].clone() + bottleneck.clone() } else { flow[e].clone() - bottleneck.clone() };
        }
        value = value + bottleneck;
    }
    MaxFlow { value, flow }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cut<T> {
    pub source_side: Vec<usize>,
    pub sink_side: Vec<usize>,
    /// Indices of edges from the source side to the sink side.
    pub cut_set: Vec<usize>,
    pub capacity: T,
}

/// Capacity of the cut whose source side is `side` (a node bitmask containing the source).
pub fn cut_capacity<T: Scalar>(net: &FlowNetwork<T>, side: Subset) -> (Vec<usize>, T) {
    let set: Vec<usize> = (0..net.edges.len())
        .filter(|&e| side.contains(net.edges[e].from) && !side.contains(net.edges[e].to))
        .collect();
    let cap = sum(set.iter().map(|&e| &net.edges[e].capacity));
    (set, cap)
}

/// Source side = nodes reachable in the residual graph of a maximum flow.
pub fn min_cut<T: Scalar>(net: &FlowNetwork<T>) -> Cut<T> {
    let mf = max_flow(net);
    let nv = net.node_count();
    let mut reach = Subset::singleton(net.source());
    let mut stack = vec![net.source()];
    while let Some(v) = stack.pop() {
        for (e, edge) in net.edges.iter().enumerate() {
            let next = if edge.from == v && mf.flow[e] < edge.capacity {
                Some(edge.to)
            } else if edge.to == v && mf.flow[e].is_positive() {
                Some(edge.from)
            } else {
                None
            };
            if let Some(w) = next.filter(|&w| !reach.contains(w)) {
                reach.insert(w);
                stack.push(w);
            }
        }
    }
    let (cut_set, capacity) = cut_capacity(net, reach);
    Cut {
        source_side: reach.iter().collect(),
        sink_side: (0..nv).filter(|&v| !reach.contains(v)).collect(),
        cut_set,
        capacity,
    }
}

/// Reads `p(x_a, x_b)` off the cross edges of a unit flow.
pub fn flow_to_distribution<T: Scalar>(net: &FlowNetwork<T>, mf: &MaxFlow<T>) -> Result<TypeDistribution<T>> {
    if !mf.value.is_one() {
        return Err(Error::FlowDeficit(mf.value.to_fraction()));
    }
    let ts = TypeSpace::new(net.l, 2, usize::MAX)?;
    let mut probs = vec![T::zero(); ts.len()];
    for (e, a, b) in net.cross_edges() {
        probs[ts.index(&[a, b])?] = mf.flow[e].clone();
    }
    TypeDistribution::new(probs)
}
