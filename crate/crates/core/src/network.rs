//! Discrete Bayesian networks: structure, conditional probability tables,
//! validation, chain-rule probabilities and ancestral sampling.
//!
//! CPTs are stored flat, one row per parent configuration. Parent
//! configurations are enumerated in mixed-radix order with the last declared
//! parent varying fastest; the network file format relies on this order.

use std::collections::HashMap;
use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};

/// One state index per node, in the network's node order.
pub type FullAssignment = Vec<usize>;

/// Tolerance for CPT row sums accepted by [`Network::validate`].
pub const ROW_SUM_TOL: f64 = 1e-9;

/// Declarative description of a node, parents given by name.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeSpec {
    pub name: String,
    pub states: Vec<String>,
    pub parents: Vec<String>,
}

impl NodeSpec {
    pub fn new(name: &str, states: &[&str], parents: &[&str]) -> Self {
        NodeSpec {
            name: name.to_string(),
            states: states.iter().map(|s| s.to_string()).collect(),
            parents: parents.iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub name: String,
    pub states: Vec<String>,
    pub parents: Vec<usize>,
}

impl Node {
    pub fn card(&self) -> usize {
        self.states.len()
    }

    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.states.iter().position(|s| s == label)
    }
}

/// A violated network invariant, with the place it was found.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub location: String,
    pub message: String,
}

impl Diagnostic {
    fn new(location: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic {
            location: location.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

#[derive(Clone, Debug)]
pub struct Network {
    name: String,
    nodes: Vec<Node>,
    cpts: Vec<Vec<f64>>,
    index: HashMap<String, usize>,
    topo: Option<Vec<usize>>,
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.nodes == other.nodes && self.cpts == other.cpts
    }
}

impl Network {
    /// Builds a network and rejects it unless [`Network::validate`] is clean.
    pub fn new(name: &str, specs: Vec<NodeSpec>, cpts: Vec<Vec<f64>>) -> Result<Self> {
        let net = Self::from_parts(name, specs, cpts)?;
        let diags = net.validate();
        if diags.is_empty() {
            Ok(net)
        } else {
            Err(Error::InvalidNetwork(diags))
        }
    }

    /// Builds a network without checking CPT or graph invariants.
    ///
    /// Only parent names are resolved; everything else is left for
    /// [`Network::validate`] to report.
    pub fn from_parts(name: &str, specs: Vec<NodeSpec>, cpts: Vec<Vec<f64>>) -> Result<Self> {
        if cpts.len() != specs.len() {
            return Err(Error::DimensionMismatch {
                expected: specs.len(),
                got: cpts.len(),
            });
        }
        let mut index = HashMap::new();
        for (i, s) in specs.iter().enumerate() {
            index.entry(s.name.clone()).or_insert(i);
        }
        let mut nodes = Vec::with_capacity(specs.len());
        for s in specs {
            let parents = s
                .parents
                .iter()
                .map(|p| {
                    index
                        .get(p)
                        .copied()
                        .ok_or_else(|| Error::UnknownVariable(p.clone()))
                })
                .collect::<Result<Vec<_>>>()?;
            nodes.push(Node {
                name: s.name,
                states: s.states,
                parents,
            });
        }
        let topo = topological_order(&nodes);
        Ok(Network {
            name: name.to_string(),
            nodes,
            cpts,
            index,
            topo,
        })
    }

    /// Every violated invariant; empty when the network is usable.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let mut seen = HashMap::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if let Some(j) = seen.insert(node.name.as_str(), i) {
                out.push(Diagnostic::new(
                    format!("node {}", node.name),
                    format!("duplicate node name (also node #{j})"),
                ));
            }
            if node.states.len() < 2 {
                out.push(Diagnostic::new(
                    format!("node {}", node.name),
                    "fewer than 2 states",
                ));
            }
            for (a, s) in node.states.iter().enumerate() {
                if node.states[..a].contains(s) {
                    out.push(Diagnostic::new(
                        format!("node {}", node.name),
                        format!("duplicate state label `{s}`"),
                    ));
                }
            }
            for (a, &p) in node.parents.iter().enumerate() {
                if p == i {
                    out.push(Diagnostic::new(
                        format!("node {}", node.name),
                        "node is its own parent",
                    ));
                }
                if node.parents[..a].contains(&p) {
                    out.push(Diagnostic::new(
                        format!("node {}", node.name),
                        format!("duplicate parent `{}`", self.nodes[p].name),
                    ));
                }
            }
        }
        if self.topo.is_none() {
            let cyclic: Vec<_> = cyclic_nodes(&self.nodes)
                .into_iter()
                .map(|i| self.nodes[i].name.as_str())
                .collect();
            out.push(Diagnostic::new(
                "graph",
                format!("parent relation is cyclic (involving {})", cyclic.join(", ")),
            ));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            let card = node.card();
            let rows = self.num_rows(i);
            let cpt = &self.cpts[i];
            if card == 0 || cpt.len() != rows * card {
                out.push(Diagnostic::new(
                    format!("cpt {}", node.name),
                    format!(
                        "expected {rows} rows of {card} entries, got {} entries",
                        cpt.len()
                    ),
                ));
                continue;
            }
            for (r, row) in cpt.chunks(card).enumerate() {
                let loc = format!("cpt {} row {}", node.name, self.row_label(i, r));
                if let Some(v) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                    out.push(Diagnostic::new(&loc, format!("entry {v} outside [0,1]")));
                }
                let sum: f64 = row.iter().sum();
                if !((sum - 1.0).abs() <= ROW_SUM_TOL) {
                    let shown = (sum * 1e12).round() / 1e12;
                    out.push(Diagnostic::new(&loc, format!("row sum {shown} ≠ 1")));
                }
            }
        }
        out
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &Node {
        &self.nodes[i]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn cards(&self) -> Vec<usize> {
        self.nodes.iter().map(Node::card).collect()
    }

    pub fn cpt(&self, node: usize) -> &[f64] {
        &self.cpts[node]
    }

    pub fn cpts(&self) -> &[Vec<f64>] {
        &self.cpts
    }

    /// Number of parent configurations of `node`.
    pub fn num_rows(&self, node: usize) -> usize {
        self.nodes[node]
            .parents
            .iter()
            .map(|&p| self.nodes[p].card())
            .product()
    }

    pub fn row(&self, node: usize, config: usize) -> &[f64] {
        let card = self.nodes[node].card();
        &self.cpts[node][config * card..(config + 1) * card]
    }

    /// Mixed-radix index of the parent configuration selected by `x`.
    pub fn parent_config(&self, node: usize, x: &[usize]) -> usize {
        self.nodes[node]
            .parents
            .iter()
            .fold(0, |acc, &p| acc * self.nodes[p].card() + x[p])
    }

    /// Parent states of row `config`, in parent declaration order.
    pub fn decode_config(&self, node: usize, mut config: usize) -> Vec<usize> {
        let parents = &self.nodes[node].parents;
        let mut states = vec![0; parents.len()];
        for (k, &p) in parents.iter().enumerate().rev() {
            let c = self.nodes[p].card();
            states[k] = config % c;
            config /= c;
        }
        states
    }

    fn row_label(&self, node: usize, config: usize) -> String {
        let parents = &self.nodes[node].parents;
        if parents.is_empty() {
            return "(root)".to_string();
        }
        let states = self.decode_config(node, config);
        parents
            .iter()
            .zip(states)
            .map(|(&p, s)| {
                let n = &self.nodes[p];
                format!("{}={}", n.name, n.states.get(s).map_or("?", |s| s.as_str()))
            })
            .collect::<Vec<_>>()
            .join(",")
    }

    /// A topological order of the nodes; `None` for cyclic graphs.
    pub fn topological_order(&self) -> Option<&[usize]> {
        self.topo.as_deref()
    }

    /// |W| as a float (it overflows integers for large networks).
    pub fn state_space_size(&self) -> f64 {
        self.nodes.iter().map(|n| n.card() as f64).product()
    }

    pub fn check_assignment(&self, x: &[usize]) -> Result<()> {
        if x.len() != self.nodes.len() {
            return Err(Error::DimensionMismatch {
                expected: self.nodes.len(),
                got: x.len(),
            });
        }
        for (node, &s) in self.nodes.iter().zip(x) {
            if s >= node.card() {
                return Err(Error::UnknownState {
                    variable: node.name.clone(),
                    state: s.to_string(),
                });
            }
        }
        Ok(())
    }

    /// P(x) by the chain rule.
    pub fn joint_probability(&self, x: &[usize]) -> Result<f64> {
        self.check_assignment(x)?;
        Ok(self.joint_unchecked(x))
    }

    pub(crate) fn joint_unchecked(&self, x: &[usize]) -> f64 {
        (0..self.nodes.len())
            .map(|i| self.row(i, self.parent_config(i, x))[x[i]])
            .product()
    }

    /// ln P(x), summing logs so long products cannot underflow.
    pub(crate) fn log_joint_unchecked(&self, x: &[usize]) -> f64 {
        (0..self.nodes.len())
            .map(|i| self.row(i, self.parent_config(i, x))[x[i]].ln())
            .sum()
    }

    /// Same structure (names, states, parents) as `other`.
    pub fn same_structure(&self, other: &Network) -> bool {
        self.nodes == other.nodes
    }

    /// Same node names and state labels in the same order.
    pub fn same_domains(&self, other: &Network) -> bool {
        self.nodes.len() == other.nodes.len()
            && self
                .nodes
                .iter()
                .zip(&other.nodes)
                .all(|(a, b)| a.name == b.name && a.states == b.states)
    }

    /// Copy of this structure with new CPTs; the result is validated.
    pub fn with_cpts(&self, cpts: Vec<Vec<f64>>) -> Result<Network> {
        let net = Network {
            name: self.name.clone(),
            nodes: self.nodes.clone(),
            cpts,
            index: self.index.clone(),
            topo: self.topo.clone(),
        };
        let diags = net.validate();
        if diags.is_empty() {
            Ok(net)
        } else {
            Err(Error::InvalidNetwork(diags))
        }
    }

    pub(crate) fn with_cpts_unchecked(&self, cpts: Vec<Vec<f64>>) -> Network {
        Network {
            name: self.name.clone(),
            nodes: self.nodes.clone(),
            cpts,
            index: self.index.clone(),
            topo: self.topo.clone(),
        }
    }

    pub fn renamed(mut self, name: &str) -> Network {
        self.name = name.to_string();
        self
    }

    /// Same structure with every CPT row uniform.
    pub fn uniform(&self) -> Network {
        let cpts = (0..self.len())
            .map(|i| {
                let card = self.nodes[i].card();
                vec![1.0 / card as f64; card * self.num_rows(i)]
            })
            .collect();
        self.with_cpts_unchecked(cpts)
    }

    /// Same structure with every row replaced by normalized uniform(0,1) draws.
    pub fn randomize_parameters<R: Rng + ?Sized>(&self, rng: &mut R) -> Network {
        let cpts = self
            .cpts
            .iter()
            .enumerate()
            .map(|(i, cpt)| {
                let card = self.nodes[i].card();
                let mut out = Vec::with_capacity(cpt.len());
                for _ in 0..cpt.len() / card {
                    let row: Vec<f64> = (0..card).map(|_| rng.gen::<f64>()).collect();
                    let sum: f64 = row.iter().sum();
                    out.extend(row.into_iter().map(|v| v / sum));
                }
                out
            })
            .collect();
        self.with_cpts_unchecked(cpts)
    }

    /// Ancestral sampling in topological order.
    ///
    /// Panics if the network is cyclic.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<FullAssignment> {
        let order = self
            .topological_order()
            .expect("sampling requires an acyclic network");
        (0..n)
            .map(|_| {
                let mut x = vec![0; self.nodes.len()];
                for &i in order {
                    let row = self.row(i, self.parent_config(i, &x));
                    x[i] = sample_index(row, rng);
                }
                x
            })
            .collect()
    }

    /// Largest absolute difference between corresponding CPT entries.
    pub fn max_param_diff(&self, other: &Network) -> f64 {
        self.cpts
            .iter()
            .flatten()
            .zip(other.cpts.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Every full assignment, first node varying slowest.
    pub fn assignments(&self) -> Odometer {
        Odometer::new(self.cards())
    }
}

/// Draws an index from an (unnormalized) categorical row.
pub(crate) fn sample_index<R: Rng + ?Sized>(row: &[f64], rng: &mut R) -> usize {
    let total: f64 = row.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    let mut last = 0;
    for (k, &p) in row.iter().enumerate() {
        if p > 0.0 {
            last = k;
            if u < p {
                return k;
            }
            u -= p;
        }
    }
    last
}

fn topological_order(nodes: &[Node]) -> Option<Vec<usize>> {
    let n = nodes.len();
    let mut indegree: Vec<usize> = nodes.iter().map(|nd| nd.parents.len()).collect();
    let mut children = vec![Vec::new(); n];
    for (i, nd) in nodes.iter().enumerate() {
        for &p in &nd.parents {
            children[p].push(i);
        }
    }
    // Smallest ready index first, so the order is stable.
    let mut ready: std::collections::BTreeSet<usize> =
        (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(i) = ready.pop_first() {
        order.push(i);
        for &c in &children[i] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.insert(c);
            }
        }
    }
    (order.len() == n).then_some(order)
}

fn cyclic_nodes(nodes: &[Node]) -> Vec<usize> {
    let n = nodes.len();
    let mut indegree: Vec<usize> = nodes.iter().map(|nd| nd.parents.len()).collect();
    let mut children = vec![Vec::new(); n];
    for (i, nd) in nodes.iter().enumerate() {
        for &p in &nd.parents {
            children[p].push(i);
        }
    }
    let mut stack: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut done = vec![false; n];
    while let Some(i) = stack.pop() {
        done[i] = true;
        for &c in &children[i] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                stack.push(c);
            }
        }
    }
    (0..n).filter(|&i| !done[i]).collect()
}

/// Mixed-radix counter over a product of finite domains, last position
/// varying fastest.
#[derive(Clone, Debug)]
pub struct Odometer {
    cards: Vec<usize>,
    current: Option<Vec<usize>>,
}

impl Odometer {
    pub fn new(cards: Vec<usize>) -> Self {
        let current = if cards.iter().all(|&c| c > 0) {
            Some(vec![0; cards.len()])
        } else {
            None
        };
        Odometer { cards, current }
    }
}

impl Iterator for Odometer {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let cur = self.current.as_mut()?;
        let out = cur.clone();
        let mut k = cur.len();
        loop {
            if k == 0 {
                self.current = None;
                break;
            }
            k -= 1;
            cur[k] += 1;
            if cur[k] < self.cards[k] {
                break;
            }
            cur[k] = 0;
        }
        Some(out)
    }
}
