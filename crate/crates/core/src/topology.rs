//! Network graph: every element sits on an edge, nodes are connection points.
//!
//! Users and queues each contribute an input node (`-`) and an output node
//! (`+`). Channels connect `u+ -> b-`, `b+ -> u-` and `b+ -> b-` between
//! distinct buffers. Cross-traffic attachments add a source `x+` feeding a
//! queue and a sink `x-` behind it. Routes are static and given per user, so
//! a user's circuit is the unique path `u+, b1-, b1+, ..., bN+, u-`.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("duplicate element name `{0}`")]
    DuplicateName(String),
    #[error("channel references undeclared node `{0}`")]
    DanglingNode(String),
    #[error("duplicate channel {from} -> {to}")]
    DuplicateEdge { from: String, to: String },
    #[error("channel {from} -> {to} does not connect u+ -> b-, b+ -> u- or b+ -> b- (distinct buffers)")]
    InvalidChannel { from: String, to: String },
    #[error("user `{user}` has an empty route")]
    EmptyRoute { user: String },
    #[error("user `{user}` routes through unknown queue `{queue}`")]
    UnknownRouteQueue { user: String, queue: String },
    #[error("user `{user}` traverses queue `{queue}` more than once")]
    RepeatedBuffer { user: String, queue: String },
    #[error("user `{user}` needs a channel {from} -> {to} that is not declared")]
    MissingChannel { user: String, from: String, to: String },
    #[error("queue `{queue}` has non-positive capacity {capacity}")]
    BadCapacity { queue: String, capacity: f64 },
    #[error("channel {from} -> {to} has invalid delay {delay}")]
    BadDelay { from: String, to: String, delay: f64 },
    #[error("circuit of user `{user}` has zero total propagation delay")]
    ZeroDelayCircuit { user: String },
    #[error("cross-traffic `{cross}` attaches to unknown queue `{queue}`")]
    UnknownCrossQueue { cross: String, queue: String },
    #[error("same-tick algebraic loop through {0:?}")]
    AlgebraicLoop(Vec<String>),
    #[error("unknown user `{0}`")]
    UnknownUser(String),
}

pub type Result<T> = std::result::Result<T, TopologyError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    UserInput,
    UserOutput,
    BufferInput,
    BufferOutput,
    CrossInput,
    CrossOutput,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub name: String,
    pub kind: NodeKind,
    /// Index of the user, queue or cross attachment owning the node.
    pub element: usize,
    /// Number of flows in parallel through the node.
    pub multiplicity: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EdgeKind {
    User,
    Queue,
    Channel { delay: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub kind: EdgeKind,
    pub from: NodeId,
    pub to: NodeId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserDecl {
    pub name: String,
    pub route: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueueDecl {
    pub name: String,
    /// Packets per second.
    pub capacity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDecl {
    pub from: String,
    pub to: String,
    /// Seconds.
    pub delay: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossDecl {
    pub name: String,
    pub queue: String,
}

/// Declarative input of [`build_network`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NetworkSpec {
    pub users: Vec<UserDecl>,
    pub queues: Vec<QueueDecl>,
    pub channels: Vec<ChannelDecl>,
    pub cross: Vec<CrossDecl>,
}

/// One input flow of a queue.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowRef {
    User(usize),
    Cross(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserInfo {
    pub name: String,
    pub output: NodeId,
    pub input: NodeId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueueInfo {
    pub name: String,
    pub capacity: f64,
    pub input: NodeId,
    pub output: NodeId,
    /// Input flows in deterministic order: users by index, then cross traffic.
    pub flows: Vec<FlowRef>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossInfo {
    pub name: String,
    pub queue: usize,
}

/// Closed path of one user, from `u+` back to `u-`.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    pub user: usize,
    pub nodes: Vec<NodeId>,
    pub edges: Vec<usize>,
    /// Queues in traversal order.
    pub queues: Vec<usize>,
    /// Channel delays: `delays[h]` precedes `queues[h]`, the last one is the
    /// return channel into `u-`. Always `queues.len() + 1` entries.
    pub delays: Vec<f64>,
    /// Cumulative propagation delay from `u+` to the input of each queue.
    pub forward_offsets: Vec<f64>,
}

impl Circuit {
    pub fn total_delay(&self) -> f64 {
        self.delays.iter().sum()
    }

    /// Propagation delay from `u+` to the output of the last queue.
    pub fn forward_delay(&self) -> f64 {
        self.delays[..self.delays.len() - 1].iter().sum()
    }

    /// Propagation delay of the return channel into `u-`.
    pub fn backward_delay(&self) -> f64 {
        *self.delays.last().expect("circuit has a return channel")
    }

    /// Position of `queue` along the circuit.
    pub fn hop_of(&self, queue: usize) -> Option<usize> {
        self.queues.iter().position(|&q| q == queue)
    }
}

/// One unit of work inside an engine tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TickNode {
    Ack(usize),
    Send(usize),
    Queue(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    users: Vec<UserInfo>,
    queues: Vec<QueueInfo>,
    cross: Vec<CrossInfo>,
    circuits: Vec<Circuit>,
    zero_delay_order: Vec<TickNode>,
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            NodeKind::UserInput => "u-",
            NodeKind::UserOutput => "u+",
            NodeKind::BufferInput => "b-",
            NodeKind::BufferOutput => "b+",
            NodeKind::CrossInput => "x-",
            NodeKind::CrossOutput => "x+",
        };
        f.write_str(s)
    }
}

/// Validates `spec` and derives every user's circuit.
pub fn build_network(spec: &NetworkSpec) -> Result<Network> {
    let mut nodes: Vec<Node> = Vec::new();
    let mut by_name: HashMap<String, NodeId> = HashMap::new();
    let mut element_names: BTreeSet<String> = BTreeSet::new();

    let mut add_node = |nodes: &mut Vec<Node>, name: String, kind: NodeKind, element: usize| {
        let id = NodeId(nodes.len());
        by_name.insert(name.clone(), id);
        nodes.push(Node {
            name,
            kind,
            element,
            multiplicity: 0,
        });
        id
    };

    let mut check_name = |name: &str| -> Result<()> {
        let valid = !name.is_empty() && !name.ends_with(['+', '-']);
        if !valid || !element_names.insert(name.to_string()) {
            return Err(TopologyError::DuplicateName(name.to_string()));
        }
        Ok(())
    };
    for u in &spec.users {
        check_name(&u.name)?;
    }
    for q in &spec.queues {
        check_name(&q.name)?;
    }
    for x in &spec.cross {
        check_name(&x.name)?;
    }

    let mut edges: Vec<Edge> = Vec::new();
    let mut users = Vec::with_capacity(spec.users.len());
    for (i, u) in spec.users.iter().enumerate() {
        let input = add_node(&mut nodes, format!("{}-", u.name), NodeKind::UserInput, i);
        let output = add_node(&mut nodes, format!("{}+", u.name), NodeKind::UserOutput, i);
        edges.push(Edge {
            kind: EdgeKind::User,
            from: input,
            to: output,
        });
        users.push(UserInfo {
            name: u.name.clone(),
            output,
            input,
        });
    }
    let mut queues = Vec::with_capacity(spec.queues.len());
    let mut queue_edge = Vec::with_capacity(spec.queues.len());
    for (j, q) in spec.queues.iter().enumerate() {
        if !(q.capacity.is_finite() && q.capacity > 0.0) {
            return Err(TopologyError::BadCapacity {
                queue: q.name.clone(),
                capacity: q.capacity,
            });
        }
        let input = add_node(&mut nodes, format!("{}-", q.name), NodeKind::BufferInput, j);
        let output = add_node(&mut nodes, format!("{}+", q.name), NodeKind::BufferOutput, j);
        queue_edge.push(edges.len());
        edges.push(Edge {
            kind: EdgeKind::Queue,
            from: input,
            to: output,
        });
        queues.push(QueueInfo {
            name: q.name.clone(),
            capacity: q.capacity,
            input,
            output,
            flows: Vec::new(),
        });
    }
    let queue_index: HashMap<&str, usize> = spec
        .queues
        .iter()
        .enumerate()
        .map(|(j, q)| (q.name.as_str(), j))
        .collect();

    let mut cross = Vec::with_capacity(spec.cross.len());
    for (k, x) in spec.cross.iter().enumerate() {
        let &j = queue_index
            .get(x.queue.as_str())
            .ok_or_else(|| TopologyError::UnknownCrossQueue {
                cross: x.name.clone(),
                queue: x.queue.clone(),
            })?;
        let source = add_node(&mut nodes, format!("{}+", x.name), NodeKind::CrossOutput, k);
        let sink = add_node(&mut nodes, format!("{}-", x.name), NodeKind::CrossInput, k);
        edges.push(Edge {
            kind: EdgeKind::Channel { delay: 0.0 },
            from: source,
            to: queues[j].input,
        });
        edges.push(Edge {
            kind: EdgeKind::Channel { delay: 0.0 },
            from: queues[j].output,
            to: sink,
        });
        cross.push(CrossInfo {
            name: x.name.clone(),
            queue: j,
        });
    }

    let mut channel_index: HashMap<(NodeId, NodeId), usize> = HashMap::new();
    for c in &spec.channels {
        let from = *by_name
            .get(&c.from)
            .ok_or_else(|| TopologyError::DanglingNode(c.from.clone()))?;
        let to = *by_name
            .get(&c.to)
            .ok_or_else(|| TopologyError::DanglingNode(c.to.clone()))?;
        let (fk, tk) = (nodes[from.0].kind, nodes[to.0].kind);
        let valid = matches!(
            (fk, tk),
            (NodeKind::UserOutput, NodeKind::BufferInput) | (NodeKind::BufferOutput, NodeKind::UserInput)
        ) || (fk == NodeKind::BufferOutput
            && tk == NodeKind::BufferInput
            && nodes[from.0].element != nodes[to.0].element);
        if !valid {
            return Err(TopologyError::InvalidChannel {
                from: c.from.clone(),
                to: c.to.clone(),
            });
        }
        if !(c.delay.is_finite() && c.delay >= 0.0) {
            return Err(TopologyError::BadDelay {
                from: c.from.clone(),
                to: c.to.clone(),
                delay: c.delay,
            });
        }
        if channel_index.contains_key(&(from, to)) {
            return Err(TopologyError::DuplicateEdge {
                from: c.from.clone(),
                to: c.to.clone(),
            });
        }
        channel_index.insert((from, to), edges.len());
        edges.push(Edge {
            kind: EdgeKind::Channel { delay: c.delay },
            from,
            to,
        });
    }

    let mut circuits = Vec::with_capacity(spec.users.len());
    for (i, u) in spec.users.iter().enumerate() {
        if u.route.is_empty() {
            return Err(TopologyError::EmptyRoute { user: u.name.clone() });
        }
        let mut route = Vec::with_capacity(u.route.len());
        for qname in &u.route {
            let &j = queue_index
                .get(qname.as_str())
                .ok_or_else(|| TopologyError::UnknownRouteQueue {
                    user: u.name.clone(),
                    queue: qname.clone(),
                })?;
            if route.contains(&j) {
                return Err(TopologyError::RepeatedBuffer {
                    user: u.name.clone(),
                    queue: qname.clone(),
                });
            }
            route.push(j);
        }

        let mut circuit_nodes = vec![users[i].output];
        let mut circuit_edges = Vec::new();
        let mut delays = Vec::with_capacity(route.len() + 1);
        let mut forward_offsets = Vec::with_capacity(route.len());
        let mut offset = 0.0;
        let mut at = users[i].output;
        let hop = |at: NodeId, to: NodeId, circuit_edges: &mut Vec<usize>| -> Result<f64> {
            let &e = channel_index
                .get(&(at, to))
                .ok_or_else(|| TopologyError::MissingChannel {
                    user: u.name.clone(),
                    from: nodes[at.0].name.clone(),
                    to: nodes[to.0].name.clone(),
                })?;
            circuit_edges.push(e);
            match edges[e].kind {
                EdgeKind::Channel { delay } => Ok(delay),
                _ => unreachable!("channel index only holds channels"),
            }
        };
        for &j in &route {
            let d = hop(at, queues[j].input, &mut circuit_edges)?;
            delays.push(d);
            offset += d;
            forward_offsets.push(offset);
            circuit_edges.push(queue_edge[j]);
            circuit_nodes.push(queues[j].input);
            circuit_nodes.push(queues[j].output);
            at = queues[j].output;
        }
        let d = hop(at, users[i].input, &mut circuit_edges)?;
        delays.push(d);
        circuit_nodes.push(users[i].input);
        if delays.iter().sum::<f64>() <= 0.0 {
            return Err(TopologyError::ZeroDelayCircuit { user: u.name.clone() });
        }
        circuits.push(Circuit {
            user: i,
            nodes: circuit_nodes,
            edges: circuit_edges,
            queues: route,
            delays,
            forward_offsets,
        });
    }

    for c in &circuits {
        nodes[users[c.user].output.0].multiplicity += 1;
        nodes[users[c.user].input.0].multiplicity += 1;
        for &j in &c.queues {
            queues[j].flows.push(FlowRef::User(c.user));
            nodes[queues[j].input.0].multiplicity += 1;
            nodes[queues[j].output.0].multiplicity += 1;
        }
    }
    for (k, x) in cross.iter().enumerate() {
        queues[x.queue].flows.push(FlowRef::Cross(k));
        nodes[queues[x.queue].input.0].multiplicity += 1;
        nodes[queues[x.queue].output.0].multiplicity += 1;
    }
    for node in nodes.iter_mut() {
        if matches!(node.kind, NodeKind::CrossInput | NodeKind::CrossOutput) {
            node.multiplicity = 1;
        }
    }

    let mut network = Network {
        nodes,
        edges,
        users,
        queues,
        cross,
        circuits,
        zero_delay_order: Vec::new(),
    };
    network.zero_delay_order = network.tick_order(f64::MIN_POSITIVE)?;
    Ok(network)
}

impl Network {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn users(&self) -> &[UserInfo] {
        &self.users
    }

    pub fn queues(&self) -> &[QueueInfo] {
        &self.queues
    }

    pub fn cross(&self) -> &[CrossInfo] {
        &self.cross
    }

    pub fn circuits(&self) -> &[Circuit] {
        &self.circuits
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn node_by_name(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().position(|n| n.name == name).map(NodeId)
    }

    pub fn user_index(&self, name: &str) -> Option<usize> {
        self.users.iter().position(|u| u.name == name)
    }

    pub fn queue_index(&self, name: &str) -> Option<usize> {
        self.queues.iter().position(|q| q.name == name)
    }

    /// `β(E)` of an edge.
    pub fn source(&self, edge: usize) -> NodeId {
        self.edges[edge].from
    }

    /// `ε(E)` of an edge.
    pub fn target(&self, edge: usize) -> NodeId {
        self.edges[edge].to
    }

    /// Number of flows in parallel through a node.
    pub fn multiplicity(&self, id: NodeId) -> usize {
        self.nodes[id.0].multiplicity
    }

    pub fn circuit_of(&self, user: usize) -> Result<&Circuit> {
        self.circuits
            .get(user)
            .ok_or_else(|| TopologyError::UnknownUser(user.to_string()))
    }

    pub fn circuit_by_name(&self, user: &str) -> Result<&Circuit> {
        let i = self
            .user_index(user)
            .ok_or_else(|| TopologyError::UnknownUser(user.to_string()))?;
        Ok(&self.circuits[i])
    }

    /// Order of work inside a tick when zero-delay channels are the only
    /// same-tick couplings.
    pub fn zero_delay_order(&self) -> &[TickNode] {
        &self.zero_delay_order
    }

    /// Evaluation order inside one engine tick of length `lag`: a channel
    /// shorter than `lag` couples its endpoints within the same tick.
    /// Sends depend on their user's ACKs, queues on every input flow read
    /// through a short channel, ACKs on the last queue when the return
    /// channel is short.
    pub fn tick_order(&self, lag: f64) -> Result<Vec<TickNode>> {
        let nu = self.users.len();
        let nq = self.queues.len();
        let index = |n: TickNode| match n {
            TickNode::Ack(i) => i,
            TickNode::Send(i) => nu + i,
            TickNode::Queue(j) => 2 * nu + j,
        };
        let all: Vec<TickNode> = (0..nu)
            .map(TickNode::Ack)
            .chain((0..nu).map(TickNode::Send))
            .chain((0..nq).map(TickNode::Queue))
            .collect();
        let mut deps: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); all.len()];
        for c in &self.circuits {
            deps[index(TickNode::Send(c.user))].insert(index(TickNode::Ack(c.user)));
            for (h, &j) in c.queues.iter().enumerate() {
                if c.delays[h] < lag {
                    let upstream = if h == 0 {
                        TickNode::Send(c.user)
                    } else {
                        TickNode::Queue(c.queues[h - 1])
                    };
                    deps[index(TickNode::Queue(j))].insert(index(upstream));
                }
            }
            if c.backward_delay() < lag {
                let last = *c.queues.last().expect("non-empty route");
                deps[index(TickNode::Ack(c.user))].insert(index(TickNode::Queue(last)));
            }
        }
        let mut remaining: Vec<usize> = deps.iter().map(BTreeSet::len).collect();
        let mut ready: BTreeSet<usize> = (0..all.len()).filter(|&k| remaining[k] == 0).collect();
        let mut order = Vec::with_capacity(all.len());
        while let Some(k) = ready.pop_first() {
            order.push(all[k]);
            for (m, d) in deps.iter().enumerate() {
                if d.contains(&k) {
                    remaining[m] -= 1;
                    if remaining[m] == 0 {
                        ready.insert(m);
                    }
                }
            }
        }
        if order.len() != all.len() {
            let stuck = (0..all.len())
                .filter(|&k| remaining[k] > 0)
                .map(|k| self.tick_node_name(all[k]))
                .collect();
            return Err(TopologyError::AlgebraicLoop(stuck));
        }
        Ok(order)
    }

    fn tick_node_name(&self, n: TickNode) -> String {
        match n {
            TickNode::Ack(i) => format!("ack({})", self.users[i].name),
            TickNode::Send(i) => format!("send({})", self.users[i].name),
            TickNode::Queue(j) => format!("queue({})", self.queues[j].name),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn user(name: &str, route: &[&str]) -> UserDecl {
        UserDecl {
            name: name.into(),
            route: route.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn chan(from: &str, to: &str, delay: f64) -> ChannelDecl {
        ChannelDecl {
            from: from.into(),
            to: to.into(),
            delay,
        }
    }

    fn queue(name: &str, capacity: f64) -> QueueDecl {
        QueueDecl {
            name: name.into(),
            capacity,
        }
    }

    fn single_buffer() -> NetworkSpec {
        NetworkSpec {
            users: vec![user("u", &["b"])],
            queues: vec![queue("b", 100.0)],
            channels: vec![chan("u+", "b-", 0.05), chan("b+", "u-", 0.05)],
            cross: vec![],
        }
    }

    fn node_names(net: &Network, c: &Circuit) -> Vec<String> {
        c.nodes.iter().map(|&n| net.node(n).name.clone()).collect()
    }

    #[test]
    fn single_buffer_circuit() {
        let net = build_network(&single_buffer()).unwrap();
        let c = net.circuit_of(0).unwrap();
        assert_eq!(node_names(&net, c), ["u+", "b-", "b+", "u-"]);
        assert_eq!(c.edges.len(), 3);
        assert!((c.total_delay() - 0.1).abs() < 1e-15);
        assert_eq!(c.forward_offsets, vec![0.05]);
        assert!(matches!(net.circuit_of(3), Err(TopologyError::UnknownUser(_))));
        // Graph accessors agree with the circuit.
        assert_eq!(net.source(c.edges[0]), c.nodes[0]);
        assert_eq!(net.target(c.edges[2]), *c.nodes.last().unwrap());
    }

    #[test]
    fn two_users_share_queue_edge() {
        let spec = NetworkSpec {
            users: vec![user("u1", &["b"]), user("u2", &["b"])],
            queues: vec![queue("b", 100.0)],
            channels: vec![
                chan("u1+", "b-", 0.0016),
                chan("b+", "u1-", 0.0016),
                chan("u2+", "b-", 0.0585),
                chan("b+", "u2-", 0.0585),
            ],
            cross: vec![],
        };
        let net = build_network(&spec).unwrap();
        let (c1, c2) = (net.circuit_of(0).unwrap(), net.circuit_of(1).unwrap());
        assert_eq!(c1.edges[1], c2.edges[1]);
        assert_eq!(net.edges()[c1.edges[1]].kind, EdgeKind::Queue);
        let b_in = net.node_by_name("b-").unwrap();
        assert_eq!(net.multiplicity(b_in), 2);
    }

    #[test]
    fn series_circuits_follow_route_order() {
        let spec = NetworkSpec {
            users: vec![user("u1", &["b1", "b2"]), user("u2", &["b2"]), user("u3", &["b1"])],
            queues: vec![queue("b1", 6000.0), queue("b2", 15000.0)],
            channels: vec![
                chan("u1+", "b1-", 0.0),
                chan("b1+", "b2-", 0.02),
                chan("b2+", "u1-", 0.1),
                chan("u2+", "b2-", 0.0),
                chan("b2+", "u2-", 0.08),
                chan("u3+", "b1-", 0.0),
                chan("b1+", "u3-", 0.04),
            ],
            cross: vec![CrossDecl {
                name: "x1".into(),
                queue: "b1".into(),
            }],
        };
        let net = build_network(&spec).unwrap();
        let c1 = net.circuit_by_name("u1").unwrap();
        assert_eq!(node_names(&net, c1), ["u1+", "b1-", "b1+", "b2-", "b2+", "u1-"]);
        assert_eq!(c1.forward_offsets, vec![0.0, 0.02]);
        assert!((c1.total_delay() - 0.12).abs() < 1e-15);
        let c3 = net.circuit_by_name("u3").unwrap();
        assert_eq!(c3.queues, vec![0]);
        assert!((c3.total_delay() - 0.04).abs() < 1e-15);
        assert_eq!(
            net.queues()[0].flows,
            vec![FlowRef::User(0), FlowRef::User(2), FlowRef::Cross(0)]
        );
        // Zero-delay access channels: sends come before the queues they feed.
        let order = net.tick_order(1e-4).unwrap();
        let pos = |n| order.iter().position(|&m| m == n).unwrap();
        assert!(pos(TickNode::Send(0)) < pos(TickNode::Queue(0)));
        assert!(pos(TickNode::Ack(0)) < pos(TickNode::Send(0)));
    }

    #[test]
    fn rejects_bad_specs() {
        let mut spec = single_buffer();
        spec.channels.push(chan("u+", "b-", 0.01));
        assert!(matches!(build_network(&spec), Err(TopologyError::DuplicateEdge { .. })));

        let mut spec = single_buffer();
        spec.channels[0].to = "nowhere-".into();
        assert!(matches!(build_network(&spec), Err(TopologyError::DanglingNode(n)) if n == "nowhere-"));

        let mut spec = single_buffer();
        spec.channels.pop();
        assert!(matches!(build_network(&spec), Err(TopologyError::MissingChannel { .. })));

        let mut spec = single_buffer();
        spec.channels.push(chan("u+", "u-", 0.01));
        assert!(matches!(build_network(&spec), Err(TopologyError::InvalidChannel { .. })));

        let mut spec = single_buffer();
        spec.users[0].route = vec!["b".into(), "b".into()];
        assert!(matches!(build_network(&spec), Err(TopologyError::RepeatedBuffer { .. })));

        let mut spec = single_buffer();
        spec.queues[0].capacity = 0.0;
        assert!(matches!(build_network(&spec), Err(TopologyError::BadCapacity { .. })));

        let mut spec = single_buffer();
        spec.channels[0].delay = 0.0;
        spec.channels[1].delay = 0.0;
        assert!(matches!(build_network(&spec), Err(TopologyError::ZeroDelayCircuit { .. })));

        let mut spec = single_buffer();
        spec.queues.push(queue("u", 1.0));
        assert!(matches!(build_network(&spec), Err(TopologyError::DuplicateName(_))));

        let mut spec = single_buffer();
        spec.users[0].route.clear();
        assert!(matches!(build_network(&spec), Err(TopologyError::EmptyRoute { .. })));
    }

    #[test]
    fn short_channels_coupling_users_form_loop() {
        // Flow 1: u1+ -(0)-> A -(0)-> B -(0.1)-> u1-.
        // Flow 2: u2+ -(0)-> B -(0.1)-> A -(0)-> u2-.
        // A tick shorter than 0.1 s makes A -> B -> u2 -> A a same-tick loop.
        let spec = NetworkSpec {
            users: vec![user("u1", &["A", "B"]), user("u2", &["B", "A"])],
            queues: vec![queue("A", 10.0), queue("B", 10.0)],
            channels: vec![
                chan("u1+", "A-", 0.0),
                chan("A+", "B-", 0.0),
                chan("B+", "u1-", 0.1),
                chan("u2+", "B-", 0.0),
                chan("B+", "A-", 0.1),
                chan("A+", "u2-", 0.0),
            ],
            cross: vec![],
        };
        let net = build_network(&spec).unwrap();
        assert!(net.tick_order(1e-3).is_ok());
        assert!(matches!(net.tick_order(0.2), Err(TopologyError::AlgebraicLoop(_))));
    }
}
