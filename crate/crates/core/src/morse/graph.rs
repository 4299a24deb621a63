//! Strongly connected components, condensation and Morse graph of a digraph
//! given as adjacency lists.

use fixedbitset::FixedBitSet;

/// SCC decomposition. Component ids come out of Tarjan's algorithm in
/// reverse topological order: every condensation edge goes from a higher id
/// to a lower one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Condensation {
    /// Component id of every vertex.
    pub component: Vec<usize>,
    /// Vertices of every component, ascending.
    pub members: Vec<Vec<usize>>,
    /// Condensation DAG successors, sorted, without self-loops.
    pub successors: Vec<Vec<usize>>,
    /// Component contains at least one edge (a self-loop counts).
    pub recurrent: Vec<bool>,
}

/// Iterative Tarjan. Returns the component id of each vertex and the number
/// of components.
pub fn strongly_connected_components(adj: &[Vec<usize>]) -> (Vec<usize>, usize) {
    const NONE: usize = usize::MAX;
    let n = adj.len();
    let mut index = vec![NONE; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut component = vec![NONE; n];
    let mut next = 0;
    let mut count = 0;
    let mut calls: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != NONE {
            continue;
        }
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        calls.push((root, 0));
        while let Some(&(v, pos)) = calls.last() {
            if pos < adj[v].len() {
                calls.last_mut().unwrap().1 += 1;
                let w = adj[v][pos];
                if index[w] == NONE {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    calls.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                calls.pop();
                if let Some(&(u, _)) = calls.last() {
                    low[u] = low[u].min(low[v]);
                }
                if low[v] == index[v] {
                    loop {
                        let w = stack.pop().expect("tarjan stack");
                        on_stack[w] = false;
                        component[w] = count;
                        if w == v {
                            break;
                        }
                    }
                    count += 1;
                }
            }
        }
    }
    (component, count)
}

impl Condensation {
    pub fn new(adj: &[Vec<usize>]) -> Self {
        let (component, count) = strongly_connected_components(adj);
        let mut members = vec![Vec::new(); count];
        for (v, &c) in component.iter().enumerate() {
            members[c].push(v);
        }
        let mut successors = vec![Vec::new(); count];
        let mut recurrent = vec![false; count];
        for (v, out) in adj.iter().enumerate() {
            let cv = component[v];
            for &w in out {
                let cw = component[w];
                if cw == cv {
                    recurrent[cv] = true;
                } else {
                    successors[cv].push(cw);
                }
            }
        }
        for s in &mut successors {
            s.sort_unstable();
            s.dedup();
        }
        Self {
            component,
            members,
            successors,
            recurrent,
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Condensation edges `(src, dst)` in ascending order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.successors
            .iter()
            .enumerate()
            .flat_map(|(c, s)| s.iter().map(move |&d| (c, d)))
            .collect()
    }
}

/// Recurrent components ordered by reachability.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MorseGraph {
    /// Component id of every Morse node, ascending.
    pub nodes: Vec<usize>,
    /// Morse node index of every component, if recurrent.
    pub node_of_component: Vec<Option<usize>>,
    /// `below[a]` holds the Morse nodes reachable from `a` by a nonempty path.
    pub below: Vec<FixedBitSet>,
    /// Transitive reduction of `below`, as `(a, b)` with `b` below `a`.
    pub edges: Vec<(usize, usize)>,
    /// Morse nodes with nothing below them.
    pub minimal: Vec<usize>,
}

impl MorseGraph {
    pub fn new(cg: &Condensation) -> Self {
        let mut node_of_component = vec![None; cg.len()];
        let mut nodes = Vec::new();
        for c in 0..cg.len() {
            if cg.recurrent[c] {
                node_of_component[c] = Some(nodes.len());
                nodes.push(c);
            }
        }
        let k = nodes.len();
        // Successors always carry smaller ids, so an ascending sweep sees them first.
        let mut reach: Vec<FixedBitSet> = Vec::with_capacity(cg.len());
        for c in 0..cg.len() {
            let mut set = FixedBitSet::with_capacity(k);
            for &d in &cg.successors[c] {
                set.union_with(&reach[d]);
                if let Some(m) = node_of_component[d] {
                    set.insert(m);
                }
            }
            reach.push(set);
        }
        let below: Vec<FixedBitSet> = nodes.iter().map(|&c| reach[c].clone()).collect();
        let mut edges = Vec::new();
        for a in 0..k {
            let mut covered = FixedBitSet::with_capacity(k);
            for b in below[a].ones() {
                covered.union_with(&below[b]);
            }
            for b in below[a].difference(&covered) {
                edges.push((a, b));
            }
        }
        let minimal = (0..k).filter(|&a| below[a].is_clear()).collect();
        Self {
            nodes,
            node_of_component,
            below,
            edges,
            minimal,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn is_minimal(&self, node: usize) -> bool {
        self.below[node].is_clear()
    }
}

/// Region-of-attraction label of a vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RoaLabel {
    /// Vertex lies in the minimal Morse node with this index.
    Attractor(usize),
    /// Every minimal Morse node reachable from the vertex is this one.
    Basin(usize),
    /// Zero or several minimal Morse nodes are reachable.
    Undecided,
}

impl RoaLabel {
    /// The minimal Morse node whose region contains the vertex.
    pub fn region(self) -> Option<usize> {
        match self {
            RoaLabel::Attractor(a) | RoaLabel::Basin(a) => Some(a),
            RoaLabel::Undecided => None,
        }
    }
}

/// Labels every vertex by the set of minimal Morse nodes reachable from its
/// component, using one sweep over the condensation.
pub fn regions_of_attraction(cg: &Condensation, mg: &MorseGraph) -> Vec<RoaLabel> {
    let k = mg.len();
    let mut reach: Vec<FixedBitSet> = Vec::with_capacity(cg.len());
    let mut comp_label = Vec::with_capacity(cg.len());
    for c in 0..cg.len() {
        let mut set = FixedBitSet::with_capacity(k);
        for &d in &cg.successors[c] {
            set.union_with(&reach[d]);
        }
        let own = mg.node_of_component[c].filter(|&m| mg.is_minimal(m));
        if let Some(m) = own {
            set.insert(m);
        }
        let label = match (own, set.count_ones(..)) {
            (Some(m), 1) => RoaLabel::Attractor(m),
            (None, 1) => RoaLabel::Basin(set.ones().next().unwrap()),
            _ => RoaLabel::Undecided,
        };
        comp_label.push(label);
        reach.push(set);
    }
    cg.component.iter().map(|&c| comp_label[c]).collect()
}

/// Condensation, Morse graph and RoA labels of one digraph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MorseDecomposition {
    pub condensation: Condensation,
    pub morse_graph: MorseGraph,
    pub roa: Vec<RoaLabel>,
}

impl MorseDecomposition {
    pub fn new(adj: &[Vec<usize>]) -> Self {
        let condensation = Condensation::new(adj);
        let morse_graph = MorseGraph::new(&condensation);
        let roa = regions_of_attraction(&condensation, &morse_graph);
        Self {
            condensation,
            morse_graph,
            roa,
        }
    }

    /// Morse node containing `vertex`, if its component is recurrent.
    pub fn morse_node_of(&self, vertex: usize) -> Option<usize> {
        self.morse_graph.node_of_component[self.condensation.component[vertex]]
    }

    /// Vertices making up a Morse node.
    pub fn vertices_of(&self, node: usize) -> &[usize] {
        &self.condensation.members[self.morse_graph.nodes[node]]
    }
}
