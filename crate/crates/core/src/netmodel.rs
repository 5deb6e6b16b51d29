//! Linear network representations shared by the day-ahead market and the FTR
//! auction: topology, PTDF construction, contingency stacking and extended
//! two-sided flow limits.
//!
//! Rows of a [`NetworkModel`] are indexed by `(contingency, line)` pairs in a
//! fixed order: contingency blocks in `contingency_order`, lines in topology
//! order within each block. Outaged lines keep their row (all zeros, absent
//! limits) so that two models built over the same contingency list always
//! share row indices.

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::fmt;

use nalgebra::DMatrix;
use thiserror::Error;

/// Absolute tolerance used when comparing flows and PTDF entries.
pub const FLOW_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetError {
    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),
    #[error("duplicate line id `{0}`")]
    DuplicateLine(String),
    #[error("duplicate contingency id `{0}`")]
    DuplicateContingency(String),
    #[error("line `{line}` references unknown node `{node}`")]
    UnknownNode { line: String, node: String },
    #[error("slack node `{0}` is not a declared node")]
    UnknownSlack(String),
    #[error("unknown line `{0}`")]
    UnknownLine(String),
    #[error("unknown contingency `{0}`")]
    UnknownContingency(String),
    #[error("line `{0}` connects a node to itself")]
    SelfLoop(String),
    #[error("line `{0}` has non-positive or non-finite reactance {1}")]
    BadReactance(String, f64),
    #[error("topology is disconnected; unreachable from slack: {0:?}")]
    DisconnectedTopology(Vec<String>),
    #[error("contingency `{contingency}` islands nodes {nodes:?}")]
    Islanding {
        contingency: String,
        nodes: Vec<String>,
    },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("limits on {row} exclude zero flow (lower {lower}, upper {upper})")]
    ZeroInfeasible {
        row: String,
        lower: Bound,
        upper: Bound,
    },
    #[error("lower limit exceeds upper limit on {row} ({lower} > {upper})")]
    InvertedLimits { row: String, lower: f64, upper: f64 },
    #[error("derate factor {0} is outside (0, 1]")]
    BadFactor(f64),
    #[error("non-finite limit value on {0}")]
    NonFiniteLimit(String),
}

/// One side of a flow limit. `Absent` means the inequality is not enforced
/// (an infinite bound); it is never encoded as a large number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    Finite(f64),
    Absent,
}

impl Bound {
    pub fn value(self) -> Option<f64> {
        match self {
            Bound::Finite(v) => Some(v),
            Bound::Absent => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Bound::Finite(_))
    }

    fn scale(self, factor: f64) -> Bound {
        match self {
            Bound::Finite(v) => Bound::Finite(v * factor),
            Bound::Absent => Bound::Absent,
        }
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::Finite(v) => write!(f, "{v}"),
            Bound::Absent => write!(f, "absent"),
        }
    }
}

/// Two-sided limit on one `(contingency, line)` row, in MW.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Limit {
    pub lower: Bound,
    pub upper: Bound,
}

impl Limit {
    pub const ABSENT: Limit = Limit {
        lower: Bound::Absent,
        upper: Bound::Absent,
    };

    pub fn new(lower: f64, upper: f64) -> Self {
        Limit {
            lower: Bound::Finite(lower),
            upper: Bound::Finite(upper),
        }
    }

    pub fn symmetric(rating: f64) -> Self {
        Limit::new(-rating, rating)
    }

    pub fn is_absent(&self) -> bool {
        !self.lower.is_finite() && !self.upper.is_finite()
    }
}

/// Extended limit vector aligned with the stacked PTDF rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitVector {
    entries: Vec<Limit>,
}

impl LimitVector {
    pub fn new(entries: Vec<Limit>) -> Self {
        LimitVector { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, row: usize) -> Limit {
        self.entries[row]
    }

    pub fn set(&mut self, row: usize, limit: Limit) {
        self.entries[row] = limit;
    }

    pub fn entries(&self) -> &[Limit] {
        &self.entries
    }

    /// Rows with a finite upper limit.
    pub fn upper_active(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.entries[i].upper.is_finite())
            .collect()
    }

    /// Rows with a finite lower limit.
    pub fn lower_active(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.entries[i].lower.is_finite())
            .collect()
    }

    pub fn scaled(&self, factor: f64) -> LimitVector {
        LimitVector {
            entries: self
                .entries
                .iter()
                .map(|l| Limit {
                    lower: l.lower.scale(factor),
                    upper: l.upper.scale(factor),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub id: String,
    pub from: String,
    pub to: String,
    /// Series reactance in per unit.
    pub reactance: f64,
}

impl Line {
    pub fn new(id: &str, from: &str, to: &str, reactance: f64) -> Self {
        Line {
            id: id.to_string(),
            from: from.to_string(),
            to: to.to_string(),
            reactance,
        }
    }
}

/// Nodes, lines and the reference (slack) node of a network.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    nodes: Vec<String>,
    lines: Vec<Line>,
    slack: String,
}

impl Topology {
    /// Checks identifiers, endpoints and reactances. Connectivity is checked
    /// when PTDFs are built, so a reduced (post-outage) topology can be
    /// represented before it is rejected.
    pub fn new(nodes: Vec<String>, lines: Vec<Line>, slack: &str) -> Result<Self, NetError> {
        let mut seen = HashSet::new();
        for n in &nodes {
            if !seen.insert(n.as_str()) {
                return Err(NetError::DuplicateNode(n.clone()));
            }
        }
        if !seen.contains(slack) {
            return Err(NetError::UnknownSlack(slack.to_string()));
        }
        let mut line_ids = HashSet::new();
        for l in &lines {
            if !line_ids.insert(l.id.as_str()) {
                return Err(NetError::DuplicateLine(l.id.clone()));
            }
            for end in [&l.from, &l.to] {
                if !seen.contains(end.as_str()) {
                    return Err(NetError::UnknownNode {
                        line: l.id.clone(),
                        node: end.clone(),
                    });
                }
            }
            if l.from == l.to {
                return Err(NetError::SelfLoop(l.id.clone()));
            }
            if !(l.reactance.is_finite() && l.reactance > 0.0) {
                return Err(NetError::BadReactance(l.id.clone(), l.reactance));
            }
        }
        Ok(Topology {
            nodes,
            lines,
            slack: slack.to_string(),
        })
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    pub fn slack(&self) -> &str {
        &self.slack
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_lines(&self) -> usize {
        self.lines.len()
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n == id)
    }

    pub fn line_index(&self, id: &str) -> Option<usize> {
        self.lines.iter().position(|l| l.id == id)
    }

    /// Same network with a different reference node.
    pub fn with_slack(&self, slack: &str) -> Result<Topology, NetError> {
        Topology::new(self.nodes.clone(), self.lines.clone(), slack)
    }

    /// Nodes not reachable from the slack node.
    pub fn unreachable_nodes(&self) -> Vec<String> {
        let n = self.nodes.len();
        let mut adj = vec![Vec::new(); n];
        for l in &self.lines {
            let a = self.node_index(&l.from).expect("validated endpoint");
            let b = self.node_index(&l.to).expect("validated endpoint");
            adj[a].push(b);
            adj[b].push(a);
        }
        let start = self.node_index(&self.slack).expect("validated slack");
        let mut seen = vec![false; n];
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        (0..n)
            .filter(|&i| !seen[i])
            .map(|i| self.nodes[i].clone())
            .collect()
    }

    pub fn is_connected(&self) -> bool {
        self.unreachable_nodes().is_empty()
    }
}

/// An indexed network state: the base case (no outages) or an outage set.
#[derive(Debug, Clone, PartialEq)]
pub struct Contingency {
    pub id: String,
    pub outaged: BTreeSet<String>,
}

impl Contingency {
    pub fn base(id: &str) -> Self {
        Contingency {
            id: id.to_string(),
            outaged: BTreeSet::new(),
        }
    }

    pub fn outage(id: &str, lines: &[&str]) -> Self {
        Contingency {
            id: id.to_string(),
            outaged: lines.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Injection shift factors of `topology` with respect to its slack node.
///
/// Returns an `ℓ × n` matrix whose slack column is zero. Uses a
/// susceptance-weighted reduced Laplacian solve.
pub fn build_ptdf(topology: &Topology) -> Result<DMatrix<f64>, NetError> {
    let unreachable = topology.unreachable_nodes();
    if !unreachable.is_empty() {
        return Err(NetError::DisconnectedTopology(unreachable));
    }
    let n = topology.num_nodes();
    let l = topology.num_lines();
    let slack = topology.node_index(topology.slack()).expect("validated slack");

    // Map non-slack nodes to reduced indices.
    let reduced: Vec<Option<usize>> = {
        let mut next = 0;
        (0..n)
            .map(|i| {
                if i == slack {
                    None
                } else {
                    next += 1;
                    Some(next - 1)
                }
            })
            .collect()
    };

    let mut laplacian = DMatrix::<f64>::zeros(n - 1, n - 1);
    let ends: Vec<(usize, usize)> = topology
        .lines()
        .iter()
        .map(|ln| {
            (
                topology.node_index(&ln.from).unwrap(),
                topology.node_index(&ln.to).unwrap(),
            )
        })
        .collect();
    for (ln, &(a, b)) in topology.lines().iter().zip(&ends) {
        let susceptance = 1.0 / ln.reactance;
        if let Some(ra) = reduced[a] {
            laplacian[(ra, ra)] += susceptance;
        }
        if let Some(rb) = reduced[b] {
            laplacian[(rb, rb)] += susceptance;
        }
        if let (Some(ra), Some(rb)) = (reduced[a], reduced[b]) {
            laplacian[(ra, rb)] -= susceptance;
            laplacian[(rb, ra)] -= susceptance;
        }
    }

    let mut ptdf = DMatrix::<f64>::zeros(l, n);
    if n == 1 {
        return Ok(ptdf);
    }
    // Angles per unit injection at each non-slack node.
    let angles = laplacian
        .lu()
        .solve(&DMatrix::<f64>::identity(n - 1, n - 1))
        .ok_or_else(|| NetError::DisconnectedTopology(Vec::new()))?;
    for (k, (ln, &(a, b))) in topology.lines().iter().zip(&ends).enumerate() {
        let susceptance = 1.0 / ln.reactance;
        for j in 0..n {
            let Some(rj) = reduced[j] else { continue };
            let theta_a = reduced[a].map_or(0.0, |ra| angles[(ra, rj)]);
            let theta_b = reduced[b].map_or(0.0, |rb| angles[(rb, rj)]);
            ptdf[(k, j)] = susceptance * (theta_a - theta_b);
        }
    }
    Ok(ptdf)
}

/// Removes the outaged lines of `contingency` from `topology`.
pub fn apply_contingency(
    topology: &Topology,
    contingency: &Contingency,
) -> Result<Topology, NetError> {
    for id in &contingency.outaged {
        if topology.line_index(id).is_none() {
            return Err(NetError::UnknownLine(id.clone()));
        }
    }
    let lines = topology
        .lines()
        .iter()
        .filter(|l| !contingency.outaged.contains(&l.id))
        .cloned()
        .collect();
    let reduced = Topology::new(topology.nodes.clone(), lines, topology.slack())?;
    let islanded = reduced.unreachable_nodes();
    if !islanded.is_empty() {
        return Err(NetError::Islanding {
            contingency: contingency.id.clone(),
            nodes: islanded,
        });
    }
    Ok(reduced)
}

/// PTDF of `topology` under `contingency`, with zero rows for outaged lines.
pub fn contingency_ptdf(
    topology: &Topology,
    contingency: &Contingency,
) -> Result<DMatrix<f64>, NetError> {
    let reduced = apply_contingency(topology, contingency)?;
    let partial = build_ptdf(&reduced)?;
    let mut full = DMatrix::<f64>::zeros(topology.num_lines(), topology.num_nodes());
    for (r, line) in reduced.lines().iter().enumerate() {
        let k = topology.line_index(&line.id).expect("subset of topology lines");
        full.set_row(k, &partial.row(r));
    }
    Ok(full)
}

/// Per-contingency PTDF blocks stacked in contingency order.
#[derive(Debug, Clone, PartialEq)]
pub struct PtdfStack {
    contingencies: Vec<Contingency>,
    blocks: Vec<DMatrix<f64>>,
    stacked: DMatrix<f64>,
}

impl PtdfStack {
    pub fn build(topology: &Topology, contingencies: &[Contingency]) -> Result<Self, NetError> {
        if contingencies.is_empty() {
            return Err(NetError::DimensionMismatch(
                "contingency list is empty".into(),
            ));
        }
        let mut ids = HashSet::new();
        for c in contingencies {
            if !ids.insert(c.id.as_str()) {
                return Err(NetError::DuplicateContingency(c.id.clone()));
            }
        }
        let blocks = contingencies
            .iter()
            .map(|c| contingency_ptdf(topology, c))
            .collect::<Result<Vec<_>, _>>()?;
        let l = topology.num_lines();
        let n = topology.num_nodes();
        let mut stacked = DMatrix::<f64>::zeros(l * blocks.len(), n);
        for (b, block) in blocks.iter().enumerate() {
            stacked.view_mut((b * l, 0), (l, n)).copy_from(block);
        }
        Ok(PtdfStack {
            contingencies: contingencies.to_vec(),
            blocks,
            stacked,
        })
    }

    pub fn contingencies(&self) -> &[Contingency] {
        &self.contingencies
    }

    pub fn block(&self, c: usize) -> &DMatrix<f64> {
        &self.blocks[c]
    }

    /// The stacked `mℓ × n` matrix.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.stacked
    }

    pub fn rows(&self) -> usize {
        self.stacked.nrows()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Market {
    Dam,
    Ftr,
    Other(String),
}

impl Market {
    pub fn parse(label: &str) -> Market {
        match label.to_ascii_uppercase().as_str() {
            "DAM" => Market::Dam,
            "FTR" => Market::Ftr,
            _ => Market::Other(label.to_string()),
        }
    }

    pub fn label(&self) -> &str {
        match self {
            Market::Dam => "DAM",
            Market::Ftr => "FTR",
            Market::Other(s) => s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Upper,
    Lower,
}

impl Side {
    pub fn sign(self) -> &'static str {
        match self {
            Side::Upper => "+",
            Side::Lower => "-",
        }
    }
}

/// One inequality of the stacked form `A q <= b` with `A = [K; -K]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Constraint {
    pub row: usize,
    pub side: Side,
}

impl Constraint {
    pub fn upper(row: usize) -> Self {
        Constraint {
            row,
            side: Side::Upper,
        }
    }

    pub fn lower(row: usize) -> Self {
        Constraint {
            row,
            side: Side::Lower,
        }
    }

    /// Position in the `2mℓ` stacking `[upper sides; lower sides]`.
    pub fn stacked_index(&self, rows: usize) -> usize {
        match self.side {
            Side::Upper => self.row,
            Side::Lower => rows + self.row,
        }
    }

    pub fn from_stacked_index(index: usize, rows: usize) -> Self {
        if index < rows {
            Constraint::upper(index)
        } else {
            Constraint::lower(index - rows)
        }
    }
}

/// Network-feasible injection polytope of one market.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    topology: Topology,
    ptdf: PtdfStack,
    limits: LimitVector,
    market: Market,
}

/// Builds a model over `contingencies` and checks the limit invariants.
///
/// Limits on outaged rows are replaced by absent limits.
pub fn stack_model(
    topology: &Topology,
    contingencies: &[Contingency],
    limits: LimitVector,
    market: Market,
) -> Result<NetworkModel, NetError> {
    let ptdf = PtdfStack::build(topology, contingencies)?;
    let mut model = NetworkModel::from_parts(topology.clone(), ptdf, limits, market)?;
    for (c, cont) in contingencies.iter().enumerate() {
        for id in &cont.outaged {
            let k = topology.line_index(id).expect("checked by PtdfStack");
            model.limits.set(c * topology.num_lines() + k, Limit::ABSENT);
        }
    }
    for (i, lim) in model.limits.entries().iter().enumerate() {
        for b in [lim.lower, lim.upper] {
            if let Bound::Finite(v) = b {
                if !v.is_finite() {
                    return Err(NetError::NonFiniteLimit(model.row_label(i)));
                }
            }
        }
        if let (Bound::Finite(lo), Bound::Finite(hi)) = (lim.lower, lim.upper) {
            if lo > hi {
                return Err(NetError::InvertedLimits {
                    row: model.row_label(i),
                    lower: lo,
                    upper: hi,
                });
            }
        }
        let excludes_zero = lim.lower.value().is_some_and(|v| v > 0.0)
            || lim.upper.value().is_some_and(|v| v < 0.0);
        if excludes_zero {
            return Err(NetError::ZeroInfeasible {
                row: model.row_label(i),
                lower: lim.lower,
                upper: lim.upper,
            });
        }
    }
    Ok(model)
}

/// Scales every finite limit by `alpha`; absent limits stay absent.
pub fn derate(model: &NetworkModel, alpha: f64) -> Result<NetworkModel, NetError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(NetError::BadFactor(alpha));
    }
    let mut out = model.clone();
    out.limits = model.limits.scaled(alpha);
    Ok(out)
}

/// Result of [`validate`]. Findings are reported, not raised.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics {
    pub zero_infeasible: Vec<String>,
    pub inverted: Vec<String>,
    /// Rows that are identically zero although their line is in service.
    pub zero_rows_in_service: Vec<String>,
    pub upper_active: usize,
    pub lower_active: usize,
}

impl Diagnostics {
    pub fn passed(&self) -> bool {
        self.zero_infeasible.is_empty()
            && self.inverted.is_empty()
            && self.zero_rows_in_service.is_empty()
    }
}

pub fn validate(model: &NetworkModel) -> Diagnostics {
    let mut d = Diagnostics {
        upper_active: model.limits.upper_active().len(),
        lower_active: model.limits.lower_active().len(),
        ..Default::default()
    };
    let l = model.topology.num_lines();
    for (i, lim) in model.limits.entries().iter().enumerate() {
        let label = model.row_label(i);
        if let (Bound::Finite(lo), Bound::Finite(hi)) = (lim.lower, lim.upper) {
            if lo > hi {
                d.inverted.push(label.clone());
            }
        }
        if lim.lower.value().is_some_and(|v| v > 0.0) || lim.upper.value().is_some_and(|v| v < 0.0)
        {
            d.zero_infeasible.push(label.clone());
        }
        let cont = &model.ptdf.contingencies[i / l];
        let line = &model.topology.lines()[i % l].id;
        let zero_row = model.ptdf.stacked.row(i).iter().all(|v| v.abs() <= FLOW_TOL);
        if zero_row && !cont.outaged.contains(line) {
            d.zero_rows_in_service.push(label);
        }
    }
    d
}

impl NetworkModel {
    /// Assembles a model checking dimensions only. Use [`stack_model`] for
    /// validated construction.
    pub fn from_parts(
        topology: Topology,
        ptdf: PtdfStack,
        limits: LimitVector,
        market: Market,
    ) -> Result<Self, NetError> {
        if ptdf.stacked.ncols() != topology.num_nodes() {
            return Err(NetError::DimensionMismatch(format!(
                "PTDF has {} columns, topology has {} nodes",
                ptdf.stacked.ncols(),
                topology.num_nodes()
            )));
        }
        if limits.len() != ptdf.rows() {
            return Err(NetError::DimensionMismatch(format!(
                "{} limits for {} stacked rows",
                limits.len(),
                ptdf.rows()
            )));
        }
        Ok(NetworkModel {
            topology,
            ptdf,
            limits,
            market,
        })
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn ptdf(&self) -> &PtdfStack {
        &self.ptdf
    }

    pub fn k(&self) -> &DMatrix<f64> {
        &self.ptdf.stacked
    }

    pub fn limits(&self) -> &LimitVector {
        &self.limits
    }

    pub fn market(&self) -> &Market {
        &self.market
    }

    pub fn with_market(mut self, market: Market) -> Self {
        self.market = market;
        self
    }

    pub fn contingencies(&self) -> &[Contingency] {
        &self.ptdf.contingencies
    }

    pub fn num_nodes(&self) -> usize {
        self.topology.num_nodes()
    }

    /// Number of stacked rows, `mℓ`.
    pub fn rows(&self) -> usize {
        self.ptdf.rows()
    }

    pub fn row_index(&self, contingency: &str, line: &str) -> Option<usize> {
        let c = self
            .ptdf
            .contingencies
            .iter()
            .position(|c| c.id == contingency)?;
        let k = self.topology.line_index(line)?;
        Some(c * self.topology.num_lines() + k)
    }

    /// `(contingency id, line id)` of a stacked row.
    pub fn row_ids(&self, row: usize) -> (&str, &str) {
        let l = self.topology.num_lines();
        (
            &self.ptdf.contingencies[row / l].id,
            &self.topology.lines()[row % l].id,
        )
    }

    pub fn row_label(&self, row: usize) -> String {
        let (c, l) = self.row_ids(row);
        format!("{c}:{l}")
    }

    pub fn constraint_label(&self, c: Constraint) -> String {
        format!("{}{}", self.row_label(c.row), c.side.sign())
    }

    /// Entry `b_i` of the stacked limit vector `[upper; -lower]`, or `None`
    /// when the constraint is absent.
    pub fn stacked_limit(&self, c: Constraint) -> Option<f64> {
        let lim = self.limits.get(c.row);
        match c.side {
            Side::Upper => lim.upper.value(),
            Side::Lower => lim.lower.value().map(|v| -v),
        }
    }

    /// All enforced constraints in stacked order (upper sides, then lower).
    pub fn finite_constraints(&self) -> Vec<Constraint> {
        let rows = self.rows();
        (0..2 * rows)
            .map(|i| Constraint::from_stacked_index(i, rows))
            .filter(|c| self.stacked_limit(*c).is_some())
            .collect()
    }

    /// Copy with stacked entry `b_c` replaced, without re-validating limits.
    pub fn with_stacked_limit(&self, c: Constraint, value: f64) -> NetworkModel {
        let mut out = self.clone();
        let mut lim = out.limits.get(c.row);
        match c.side {
            Side::Upper => lim.upper = Bound::Finite(value),
            Side::Lower => lim.lower = Bound::Finite(-value),
        }
        out.limits.set(c.row, lim);
        out
    }

    /// Copy with replaced limits, without re-validating them.
    pub fn with_limits(&self, limits: LimitVector) -> Result<NetworkModel, NetError> {
        NetworkModel::from_parts(
            self.topology.clone(),
            self.ptdf.clone(),
            limits,
            self.market.clone(),
        )
    }

    /// Flows `K q` for an injection vector.
    pub fn flows(&self, q: &[f64]) -> Vec<f64> {
        let k = &self.ptdf.stacked;
        (0..k.nrows())
            .map(|i| (0..k.ncols()).map(|j| k[(i, j)] * q[j]).sum())
            .collect()
    }

    /// `Kᵀ y`.
    pub fn price_direction(&self, y: &[f64]) -> Vec<f64> {
        let k = &self.ptdf.stacked;
        (0..k.ncols())
            .map(|j| (0..k.nrows()).map(|i| k[(i, j)] * y[i]).sum())
            .collect()
    }

    /// Whether `q` is balanced and respects every enforced limit within `tol`.
    pub fn is_feasible(&self, q: &[f64], tol: f64) -> bool {
        if q.iter().sum::<f64>().abs() > tol {
            return false;
        }
        let f = self.flows(q);
        self.limits.entries().iter().zip(&f).all(|(lim, &fi)| {
            lim.lower.value().is_none_or(|lo| fi >= lo - tol)
                && lim.upper.value().is_none_or(|hi| fi <= hi + tol)
        })
    }

    /// Re-indexes this model over `universal`, a superset of its
    /// contingencies. New blocks get absent limits.
    pub fn extend_to(&self, universal: &[Contingency]) -> Result<NetworkModel, NetError> {
        for c in self.contingencies() {
            match universal.iter().find(|u| u.id == c.id) {
                Some(u) if u.outaged == c.outaged => {}
                Some(_) => {
                    return Err(NetError::DimensionMismatch(format!(
                        "contingency `{}` has different outages in the universal set",
                        c.id
                    )))
                }
                None => return Err(NetError::UnknownContingency(c.id.clone())),
            }
        }
        let l = self.topology.num_lines();
        let mut entries = Vec::with_capacity(universal.len() * l);
        for u in universal {
            match self.contingencies().iter().position(|c| c.id == u.id) {
                Some(c) => entries.extend_from_slice(&self.limits.entries()[c * l..(c + 1) * l]),
                None => entries.extend(std::iter::repeat_n(Limit::ABSENT, l)),
            }
        }
        let ptdf = PtdfStack::build(&self.topology, universal)?;
        NetworkModel::from_parts(
            self.topology.clone(),
            ptdf,
            LimitVector::new(entries),
            self.market.clone(),
        )
    }

    /// Same topology, contingency order and PTDF matrix (common network
    /// representation), so limits are the only difference.
    pub fn same_geometry(&self, other: &NetworkModel) -> bool {
        self.topology == other.topology
            && self.contingencies() == other.contingencies()
            && self.k().shape() == other.k().shape()
            && self
                .k()
                .iter()
                .zip(other.k().iter())
                .all(|(a, b)| (a - b).abs() <= FLOW_TOL)
    }

    /// Whether every limit of the contingency block is absent.
    pub fn block_absent(&self, c: usize) -> bool {
        let l = self.topology.num_lines();
        self.limits.entries()[c * l..(c + 1) * l]
            .iter()
            .all(Limit::is_absent)
    }
}
