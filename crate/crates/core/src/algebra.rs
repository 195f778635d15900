//! Allen interval algebra: the 13 base relations, composition over
//! disjunctive relation sets, label-scheme semantics, path-consistency
//! checking of temporal graphs, and a brute-force realizability oracle.

use crate::corpus::{CoarseRelation, NormRelation, RelationLabel, Scheme};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AlgebraError {
    #[error("unsupported scheme {0}: normalize to norm6 or coarse3 first")]
    UnsupportedScheme(Scheme),
    #[error("graph has {nodes} nodes; the realizability oracle refuses above {max}")]
    TooManyNodes { nodes: usize, max: usize },
    #[error("edge ({0}, {1}) already present")]
    DuplicateEdge(String, String),
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("posterior does not sum to 1 (got {0})")]
    BadPosterior(f64),
    #[error("operation requires crisp labels on every edge")]
    CrispRequired,
}

/// One of the 13 Allen base relations between two intervals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BaseRelation {
    Before,
    After,
    Meets,
    MetBy,
    Overlaps,
    OverlappedBy,
    Starts,
    StartedBy,
    During,
    Contains,
    Finishes,
    FinishedBy,
    Equals,
}

impl BaseRelation {
    pub const ALL: [BaseRelation; 13] = [
        BaseRelation::Before,
        BaseRelation::After,
        BaseRelation::Meets,
        BaseRelation::MetBy,
        BaseRelation::Overlaps,
        BaseRelation::OverlappedBy,
        BaseRelation::Starts,
        BaseRelation::StartedBy,
        BaseRelation::During,
        BaseRelation::Contains,
        BaseRelation::Finishes,
        BaseRelation::FinishedBy,
        BaseRelation::Equals,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            BaseRelation::Before => "before",
            BaseRelation::After => "after",
            BaseRelation::Meets => "meets",
            BaseRelation::MetBy => "met_by",
            BaseRelation::Overlaps => "overlaps",
            BaseRelation::OverlappedBy => "overlapped_by",
            BaseRelation::Starts => "starts",
            BaseRelation::StartedBy => "started_by",
            BaseRelation::During => "during",
            BaseRelation::Contains => "contains",
            BaseRelation::Finishes => "finishes",
            BaseRelation::FinishedBy => "finished_by",
            BaseRelation::Equals => "equals",
        }
    }

    pub fn index(&self) -> usize {
        *self as usize
    }

    pub fn converse(&self) -> BaseRelation {
        match self {
            BaseRelation::Before => BaseRelation::After,
            BaseRelation::After => BaseRelation::Before,
            BaseRelation::Meets => BaseRelation::MetBy,
            BaseRelation::MetBy => BaseRelation::Meets,
            BaseRelation::Overlaps => BaseRelation::OverlappedBy,
            BaseRelation::OverlappedBy => BaseRelation::Overlaps,
            BaseRelation::Starts => BaseRelation::StartedBy,
            BaseRelation::StartedBy => BaseRelation::Starts,
            BaseRelation::During => BaseRelation::Contains,
            BaseRelation::Contains => BaseRelation::During,
            BaseRelation::Finishes => BaseRelation::FinishedBy,
            BaseRelation::FinishedBy => BaseRelation::Finishes,
            BaseRelation::Equals => BaseRelation::Equals,
        }
    }

    /// Whether the relation holds between concrete intervals
    /// [x1, x2) and [y1, y2) with x1 < x2 and y1 < y2.
    pub fn holds(&self, x: (i64, i64), y: (i64, i64)) -> bool {
        let (x1, x2) = x;
        let (y1, y2) = y;
        match self {
            BaseRelation::Before => x2 < y1,
            BaseRelation::After => y2 < x1,
            BaseRelation::Meets => x2 == y1,
            BaseRelation::MetBy => y2 == x1,
            BaseRelation::Overlaps => x1 < y1 && y1 < x2 && x2 < y2,
            BaseRelation::OverlappedBy => y1 < x1 && x1 < y2 && y2 < x2,
            BaseRelation::Starts => x1 == y1 && x2 < y2,
            BaseRelation::StartedBy => x1 == y1 && y2 < x2,
            BaseRelation::During => y1 < x1 && x2 < y2,
            BaseRelation::Contains => x1 < y1 && y2 < x2,
            BaseRelation::Finishes => x2 == y2 && y1 < x1,
            BaseRelation::FinishedBy => x2 == y2 && x1 < y1,
            BaseRelation::Equals => x1 == y1 && x2 == y2,
        }
    }

    /// The unique base relation between two concrete intervals.
    pub fn between(x: (i64, i64), y: (i64, i64)) -> BaseRelation {
        BaseRelation::ALL
            .iter()
            .copied()
            .find(|r| r.holds(x, y))
            .expect("the 13 base relations are jointly exhaustive")
    }
}

/// A (possibly disjunctive) set of Allen base relations, as a bitmask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AllenSet(pub u16);

pub const FULL_MASK: u16 = 0x1fff;

impl AllenSet {
    pub const EMPTY: AllenSet = AllenSet(0);
    pub const FULL: AllenSet = AllenSet(FULL_MASK);

    pub fn singleton(rel: BaseRelation) -> AllenSet {
        AllenSet(1 << rel.index())
    }

    pub fn from_relations(rels: &[BaseRelation]) -> AllenSet {
        AllenSet(rels.iter().fold(0, |m, r| m | (1 << r.index())))
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn contains(&self, rel: BaseRelation) -> bool {
        self.0 & (1 << rel.index()) != 0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn union(&self, other: AllenSet) -> AllenSet {
        AllenSet(self.0 | other.0)
    }

    pub fn intersect(&self, other: AllenSet) -> AllenSet {
        AllenSet(self.0 & other.0)
    }

    pub fn is_subset_of(&self, other: AllenSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn relations(&self) -> impl Iterator<Item = BaseRelation> + '_ {
        BaseRelation::ALL.iter().copied().filter(|r| self.contains(*r))
    }

    pub fn converse(&self) -> AllenSet {
        let mut out = 0u16;
        for rel in self.relations() {
            out |= 1 << rel.converse().index();
        }
        AllenSet(out)
    }
}

impl fmt::Display for AllenSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.relations().map(|r| r.name()).collect();
        write!(f, "{{{}}}", names.join(","))
    }
}

/// The 13x13 composition table over base relations, row = first
/// relation, column = second, cell = union of possible relations
/// between the outer pair. Derived from interval endpoint semantics;
/// the enumeration test below recomputes it from scratch.
const COMPOSITION_BITS: [[u16; 13]; 13] = [
    // before
    [0x0001, 0x1fff, 0x0001, 0x0155, 0x0001, 0x0155, 0x0001, 0x0001, 0x0155, 0x0001, 0x0155, 0x0001, 0x0001],
    // after
    [0x1fff, 0x0002, 0x052a, 0x0002, 0x052a, 0x0002, 0x052a, 0x0002, 0x052a, 0x0002, 0x0002, 0x0002, 0x0002],
    // meets
    [0x0001, 0x02aa, 0x0001, 0x1c00, 0x0001, 0x0150, 0x0004, 0x0004, 0x0150, 0x0001, 0x0150, 0x0001, 0x0004],
    // met_by
    [0x0a15, 0x0002, 0x10c0, 0x0002, 0x0520, 0x0002, 0x0520, 0x0002, 0x0520, 0x0002, 0x0008, 0x0008, 0x0008],
    // overlaps
    [0x0001, 0x02aa, 0x0001, 0x02a0, 0x0015, 0x1ff0, 0x0010, 0x0a10, 0x0150, 0x0a15, 0x0150, 0x0015, 0x0010],
    // overlapped_by
    [0x0a15, 0x0002, 0x0a10, 0x0002, 0x1ff0, 0x002a, 0x0520, 0x002a, 0x0520, 0x02aa, 0x0020, 0x02a0, 0x0020],
    // starts
    [0x0001, 0x0002, 0x0001, 0x0008, 0x0015, 0x0520, 0x0040, 0x10c0, 0x0100, 0x0a15, 0x0100, 0x0015, 0x0040],
    // started_by
    [0x0a15, 0x0002, 0x0a10, 0x0008, 0x0a10, 0x0020, 0x10c0, 0x0080, 0x0520, 0x0200, 0x0020, 0x0200, 0x0080],
    // during
    [0x0001, 0x0002, 0x0001, 0x0002, 0x0155, 0x052a, 0x0100, 0x052a, 0x0100, 0x1fff, 0x0100, 0x0155, 0x0100],
    // contains
    [0x0a15, 0x02aa, 0x0a10, 0x02a0, 0x0a10, 0x02a0, 0x0a10, 0x0200, 0x1ff0, 0x0200, 0x02a0, 0x0200, 0x0200],
    // finishes
    [0x0001, 0x0002, 0x0004, 0x0002, 0x0150, 0x002a, 0x0100, 0x002a, 0x0100, 0x02aa, 0x0400, 0x1c00, 0x0400],
    // finished_by
    [0x0001, 0x02aa, 0x0004, 0x02a0, 0x0010, 0x02a0, 0x0010, 0x0200, 0x0150, 0x0200, 0x1c00, 0x0800, 0x0800],
    // equals
    [0x0001, 0x0002, 0x0004, 0x0008, 0x0010, 0x0020, 0x0040, 0x0080, 0x0100, 0x0200, 0x0400, 0x0800, 0x1000],
];

/// Composes two relation sets: the union over base-pair compositions.
pub fn allen_compose(a: AllenSet, b: AllenSet) -> AllenSet {
    let mut out = 0u16;
    for ra in a.relations() {
        for rb in b.relations() {
            out |= COMPOSITION_BITS[ra.index()][rb.index()];
        }
    }
    AllenSet(out)
}

/// Human-readable dump of the composition table for auditing.
pub fn composition_table_dump() -> String {
    let mut out = String::new();
    for ra in BaseRelation::ALL {
        for rb in BaseRelation::ALL {
            let cell = AllenSet(COMPOSITION_BITS[ra.index()][rb.index()]);
            out.push_str(&format!("{} o {} = {}\n", ra.name(), rb.name(), cell));
        }
    }
    out
}

/// Interval semantics of a scheme label read from source to target.
pub fn label_to_allen(label: RelationLabel) -> Result<AllenSet, AlgebraError> {
    use BaseRelation as B;
    match label {
        RelationLabel::Norm(n) => Ok(AllenSet::singleton(match n {
            NormRelation::Simultaneous => B::Equals,
            NormRelation::Before => B::Before,
            NormRelation::IBefore => B::Meets,
            NormRelation::Includes => B::Contains,
            NormRelation::Begins => B::Starts,
            NormRelation::Ends => B::Finishes,
        })),
        RelationLabel::Coarse(c) => Ok(match c {
            CoarseRelation::Before => AllenSet::from_relations(&[B::Before, B::Meets]),
            CoarseRelation::After => AllenSet::from_relations(&[B::After, B::MetBy]),
            CoarseRelation::Overlap => AllenSet::from_relations(&[
                B::Overlaps,
                B::OverlappedBy,
                B::Starts,
                B::StartedBy,
                B::During,
                B::Contains,
                B::Finishes,
                B::FinishedBy,
                B::Equals,
            ]),
        }),
        RelationLabel::Raw(_) => Err(AlgebraError::UnsupportedScheme(Scheme::Raw14)),
    }
}

/// Labels M3 compatible with composing m1 (i to j) and m2 (j to k),
/// read from i to k.
pub fn entailed_labels(
    m1: RelationLabel,
    m2: RelationLabel,
    scheme: Scheme,
) -> Result<Vec<RelationLabel>, AlgebraError> {
    let comp = allen_compose(label_to_allen(m1)?, label_to_allen(m2)?);
    let mut out = Vec::new();
    for label in scheme.labels() {
        if !label_to_allen(label)?.intersect(comp).is_empty() {
            out.push(label);
        }
    }
    Ok(out)
}

/// A weighted posterior over the labels of one scheme, in the
/// scheme's fixed label order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Posterior {
    pub scheme: Scheme,
    pub probs: Vec<f64>,
}

impl Posterior {
    pub fn new(scheme: Scheme, probs: Vec<f64>) -> Result<Self, AlgebraError> {
        let sum: f64 = probs.iter().sum();
        if probs.len() != scheme.label_count() || (sum - 1.0).abs() > 1e-9 {
            return Err(AlgebraError::BadPosterior(sum));
        }
        Ok(Posterior { scheme, probs })
    }

    pub fn one_hot(label: RelationLabel) -> Self {
        let scheme = label.scheme();
        let mut probs = vec![0.0; scheme.label_count()];
        probs[label.index()] = 1.0;
        Posterior { scheme, probs }
    }

    pub fn prob(&self, label: RelationLabel) -> f64 {
        self.probs[label.index()]
    }

    /// Highest-probability label, ties broken by scheme order.
    pub fn argmax(&self) -> RelationLabel {
        let labels = self.scheme.labels();
        let mut best = 0usize;
        for (i, p) in self.probs.iter().enumerate() {
            if *p > self.probs[best] {
                best = i;
            }
        }
        labels[best]
    }

    /// Labels sorted by probability descending, ties by scheme order.
    pub fn ranked(&self) -> Vec<RelationLabel> {
        let labels = self.scheme.labels();
        let mut idx: Vec<usize> = (0..labels.len()).collect();
        idx.sort_by(|a, b| self.probs[*b].partial_cmp(&self.probs[*a]).unwrap().then(a.cmp(b)));
        idx.into_iter().map(|i| labels[i]).collect()
    }
}

/// Edge payload: a crisp label or a posterior, read source to target.
#[derive(Debug, Clone, PartialEq)]
pub enum EdgeValue {
    Crisp(RelationLabel),
    Posterior(Posterior),
}

/// One edge of a temporal graph, stored under its unordered node pair
/// with an explicit reading direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub source: String,
    pub target: String,
    pub value: EdgeValue,
}

/// An event graph whose edges carry crisp labels or posteriors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TemporalGraph {
    nodes: Vec<String>,
    edges: BTreeMap<(String, String), Edge>,
}

fn unordered(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

impl TemporalGraph {
    pub fn new() -> Self {
        TemporalGraph::default()
    }

    pub fn add_node(&mut self, id: &str) {
        if !self.nodes.iter().any(|n| n == id) {
            self.nodes.push(id.to_string());
        }
    }

    pub fn add_edge(
        &mut self,
        source: &str,
        target: &str,
        value: EdgeValue,
    ) -> Result<(), AlgebraError> {
        self.add_node(source);
        self.add_node(target);
        let key = unordered(source, target);
        if self.edges.contains_key(&key) {
            return Err(AlgebraError::DuplicateEdge(source.to_string(), target.to_string()));
        }
        self.edges.insert(
            key,
            Edge { source: source.to_string(), target: target.to_string(), value },
        );
        Ok(())
    }

    pub fn crisp(source: &str, target: &str, label: RelationLabel) -> Edge {
        Edge {
            source: source.to_string(),
            target: target.to_string(),
            value: EdgeValue::Crisp(label),
        }
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.values()
    }

    pub fn edge(&self, a: &str, b: &str) -> Option<&Edge> {
        self.edges.get(&unordered(a, b))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Crisp label of every edge, keyed (source, target) as stored.
    pub fn crisp_labels(&self) -> Option<Vec<(String, String, RelationLabel)>> {
        let mut out = Vec::new();
        for edge in self.edges.values() {
            match &edge.value {
                EdgeValue::Crisp(l) => {
                    out.push((edge.source.clone(), edge.target.clone(), *l))
                }
                EdgeValue::Posterior(_) => return None,
            }
        }
        Some(out)
    }

    /// Allen constraint matrix in node-index space; None when any edge
    /// carries a posterior instead of a crisp label.
    fn constraint_matrix(&self) -> Result<Vec<Vec<AllenSet>>, AlgebraError> {
        let n = self.nodes.len();
        let index: BTreeMap<&str, usize> =
            self.nodes.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let mut m = vec![vec![AllenSet::FULL; n]; n];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = AllenSet::singleton(BaseRelation::Equals);
        }
        for edge in self.edges.values() {
            let label = match &edge.value {
                EdgeValue::Crisp(l) => *l,
                EdgeValue::Posterior(_) => return Err(AlgebraError::CrispRequired),
            };
            let set = label_to_allen(label)?;
            let si = index[edge.source.as_str()];
            let ti = index[edge.target.as_str()];
            m[si][ti] = set;
            m[ti][si] = set.converse();
        }
        Ok(m)
    }
}

/// Outcome of a path-consistency check.
#[derive(Debug, Clone, PartialEq)]
pub enum Consistency {
    Consistent,
    /// First triple (i, j, k) whose refinement emptied the (i, k) set.
    Inconsistent { witness: (String, String, String) },
}

impl Consistency {
    pub fn is_consistent(&self) -> bool {
        matches!(self, Consistency::Consistent)
    }
}

/// Path consistency: iterated refinement of every pair set with the
/// composition through every intermediate node, to fixpoint. Sets only
/// shrink; an emptied set witnesses a contradiction.
pub fn check_consistency(graph: &TemporalGraph) -> Result<Consistency, AlgebraError> {
    let mut m = graph.constraint_matrix()?;
    let n = m.len();
    if n < 3 {
        return Ok(Consistency::Consistent);
    }
    loop {
        let mut changed = false;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                for k in 0..n {
                    if k == i || k == j {
                        continue;
                    }
                    let refined = m[i][k].intersect(allen_compose(m[i][j], m[j][k]));
                    if refined != m[i][k] {
                        if refined.is_empty() {
                            return Ok(Consistency::Inconsistent {
                                witness: (
                                    graph.nodes[i].clone(),
                                    graph.nodes[j].clone(),
                                    graph.nodes[k].clone(),
                                ),
                            });
                        }
                        m[i][k] = refined;
                        m[k][i] = refined.converse();
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            return Ok(Consistency::Consistent);
        }
    }
}

pub const DEFAULT_ORACLE_MAX_NODES: usize = 6;

/// Decides whether concrete start/end points satisfying every edge
/// exist, by depth-first search over weak orderings of the 2n interval
/// endpoints. Exact but exponential; refuses above `max_nodes`.
pub fn realizable(graph: &TemporalGraph, max_nodes: usize) -> Result<bool, AlgebraError> {
    let n = graph.node_count();
    if n > max_nodes {
        return Err(AlgebraError::TooManyNodes { nodes: n, max: max_nodes });
    }
    if n == 0 {
        return Ok(true);
    }
    let constraints = graph.constraint_matrix()?;

    // Endpoint 2i is the start of interval i, endpoint 2i+1 its end.
    // `levels` is the current weak ordering under construction.
    let mut levels: Vec<Vec<usize>> = Vec::new();
    Ok(place_endpoint(0, 2 * n, &mut levels, &constraints))
}

fn place_endpoint(
    next: usize,
    total: usize,
    levels: &mut Vec<Vec<usize>>,
    constraints: &[Vec<AllenSet>],
) -> bool {
    if next == total {
        return true;
    }
    // Try inserting into each existing level and each gap, low to high.
    for pos in 0..=(2 * levels.len()) {
        if pos % 2 == 0 {
            levels.insert(pos / 2, vec![next]);
        } else {
            levels[pos / 2].push(next);
        }
        if partial_ok(next, levels, constraints)
            && place_endpoint(next + 1, total, levels, constraints)
        {
            return true;
        }
        if pos % 2 == 0 {
            levels.remove(pos / 2);
        } else {
            levels[pos / 2].pop();
        }
    }
    false
}

/// Checks all constraints among the endpoints placed so far, using the
/// level ranks as concrete values on an integer grid.
fn partial_ok(placed_up_to: usize, levels: &[Vec<usize>], constraints: &[Vec<AllenSet>]) -> bool {
    let mut rank = vec![usize::MAX; placed_up_to + 1];
    for (level_idx, level) in levels.iter().enumerate() {
        for &ep in level {
            rank[ep] = level_idx;
        }
    }
    let interval = placed_up_to / 2;
    let value = |ep: usize| rank[ep] as i64;
    // start < end within the interval, once both ends are placed
    if placed_up_to % 2 == 1 && rank[2 * interval] >= rank[2 * interval + 1] {
        return false;
    }
    if placed_up_to % 2 == 0 {
        return true; // no new fully placed interval yet
    }
    let x = (value(2 * interval), value(2 * interval + 1));
    for other in 0..interval {
        let set = constraints[other][interval];
        if set == AllenSet::FULL {
            continue;
        }
        let y = (value(2 * other), value(2 * other + 1));
        if !set.contains(BaseRelation::between(y, x)) {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{CoarseRelation as C, NormRelation as N};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Recomputes a base-relation composition by exhaustive enumeration
    /// of interval triples on a small integer grid. Six grid values
    /// cover every weak ordering of six endpoints.
    fn compose_by_enumeration(ra: BaseRelation, rb: BaseRelation) -> AllenSet {
        let mut out = AllenSet::EMPTY;
        let grid = 0i64..6;
        for x1 in grid.clone() {
            for x2 in x1 + 1..6 {
                for y1 in grid.clone() {
                    for y2 in y1 + 1..6 {
                        if !ra.holds((x1, x2), (y1, y2)) {
                            continue;
                        }
                        for z1 in grid.clone() {
                            for z2 in z1 + 1..6 {
                                if rb.holds((y1, y2), (z1, z2)) {
                                    out = out.union(AllenSet::singleton(
                                        BaseRelation::between((x1, x2), (z1, z2)),
                                    ));
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    #[test]
    fn composition_table_matches_enumeration_oracle() {
        for ra in BaseRelation::ALL {
            for rb in BaseRelation::ALL {
                let expected = compose_by_enumeration(ra, rb);
                let actual = allen_compose(AllenSet::singleton(ra), AllenSet::singleton(rb));
                assert_eq!(actual, expected, "{} o {}", ra.name(), rb.name());
            }
        }
    }

    #[test]
    fn shipped_table_dump_matches_the_constant() {
        let shipped = include_str!("../data/allen_composition.txt");
        assert_eq!(shipped, composition_table_dump());
    }

    #[test]
    fn sample_rules_hold() {
        let before = AllenSet::singleton(BaseRelation::Before);
        let after = AllenSet::singleton(BaseRelation::After);
        let contains = AllenSet::singleton(BaseRelation::Contains);
        assert_eq!(allen_compose(before, before), before);
        assert_eq!(allen_compose(after, contains), after);
        assert_eq!(allen_compose(after, after), after);
        let equals = AllenSet::singleton(BaseRelation::Equals);
        for bits in 0..=FULL_MASK {
            let s = AllenSet(bits);
            assert_eq!(allen_compose(equals, s), s);
            assert_eq!(allen_compose(s, equals), s);
        }
    }

    #[test]
    fn composition_converse_law() {
        // converse(a o b) = converse(b) o converse(a), over base pairs
        for ra in BaseRelation::ALL {
            for rb in BaseRelation::ALL {
                let a = AllenSet::singleton(ra);
                let b = AllenSet::singleton(rb);
                assert_eq!(
                    allen_compose(a, b).converse(),
                    allen_compose(b.converse(), a.converse()),
                    "{} o {}",
                    ra.name(),
                    rb.name()
                );
            }
        }
    }

    #[test]
    fn empty_set_annihilates_composition() {
        for bits in [0x0001u16, 0x0155, FULL_MASK] {
            assert!(allen_compose(AllenSet(bits), AllenSet::EMPTY).is_empty());
            assert!(allen_compose(AllenSet::EMPTY, AllenSet(bits)).is_empty());
        }
    }

    #[test]
    fn converse_is_involutive() {
        for bits in 0..=FULL_MASK {
            let s = AllenSet(bits);
            assert_eq!(s.converse().converse(), s);
        }
    }

    #[test]
    fn norm6_and_coarse3_label_semantics() {
        let includes = label_to_allen(RelationLabel::Norm(N::Includes)).unwrap();
        assert_eq!(includes, AllenSet::singleton(BaseRelation::Contains));
        let before = label_to_allen(RelationLabel::Coarse(C::Before)).unwrap();
        assert_eq!(
            before,
            AllenSet::from_relations(&[BaseRelation::Before, BaseRelation::Meets])
        );
        // the coarse images partition the 13 base relations
        let mut union = AllenSet::EMPTY;
        let mut total = 0;
        for label in Scheme::Coarse3.labels() {
            let set = label_to_allen(label).unwrap();
            total += set.len();
            union = union.union(set);
        }
        assert_eq!(union, AllenSet::FULL);
        assert_eq!(total, 13);
        assert!(label_to_allen(RelationLabel::Raw(crate::corpus::RawRelation::Before)).is_err());
    }

    #[test]
    fn entailment_of_coarse_pairs() {
        let after = RelationLabel::Coarse(C::After);
        let before = RelationLabel::Coarse(C::Before);
        let overlap = RelationLabel::Coarse(C::Overlap);
        assert_eq!(entailed_labels(after, after, Scheme::Coarse3).unwrap(), vec![after]);
        assert_eq!(entailed_labels(before, before, Scheme::Coarse3).unwrap(), vec![before]);
        let all = entailed_labels(overlap, overlap, Scheme::Coarse3).unwrap();
        assert_eq!(all, Scheme::Coarse3.labels());
    }

    fn triangle(labels: [RelationLabel; 3]) -> TemporalGraph {
        let mut g = TemporalGraph::new();
        g.add_edge("A", "B", EdgeValue::Crisp(labels[0])).unwrap();
        g.add_edge("B", "C", EdgeValue::Crisp(labels[1])).unwrap();
        g.add_edge("C", "A", EdgeValue::Crisp(labels[2])).unwrap();
        g
    }

    #[test]
    fn contradiction_triangle_is_inconsistent() {
        let after = RelationLabel::Coarse(C::After);
        let g = triangle([after, after, after]);
        assert!(!check_consistency(&g).unwrap().is_consistent());
        assert!(!realizable(&g, 6).unwrap());
    }

    #[test]
    fn chained_before_is_consistent() {
        let before = RelationLabel::Coarse(C::Before);
        let mut g = TemporalGraph::new();
        g.add_edge("A", "B", EdgeValue::Crisp(before)).unwrap();
        g.add_edge("B", "C", EdgeValue::Crisp(before)).unwrap();
        g.add_edge("A", "C", EdgeValue::Crisp(before)).unwrap();
        assert!(check_consistency(&g).unwrap().is_consistent());
        assert!(realizable(&g, 6).unwrap());
    }

    #[test]
    fn single_edge_graph_is_consistent() {
        let mut g = TemporalGraph::new();
        g.add_edge("A", "B", EdgeValue::Crisp(RelationLabel::Coarse(C::Before))).unwrap();
        assert!(check_consistency(&g).unwrap().is_consistent());
    }

    #[test]
    fn oracle_refuses_large_graphs() {
        let mut g = TemporalGraph::new();
        for i in 0..7 {
            g.add_node(&format!("n{i}"));
        }
        assert!(matches!(realizable(&g, 6), Err(AlgebraError::TooManyNodes { .. })));
    }

    #[test]
    fn labels_from_concrete_intervals_are_realizable() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = rng.gen_range(2..=5);
            let intervals: Vec<(i64, i64)> = (0..n)
                .map(|_| {
                    let a = rng.gen_range(0..20);
                    let b = rng.gen_range(a + 1..22);
                    (a, b)
                })
                .collect();
            let mut g = TemporalGraph::new();
            for i in 0..n {
                for j in i + 1..n {
                    let base = BaseRelation::between(intervals[i], intervals[j]);
                    let label = Scheme::Coarse3
                        .labels()
                        .into_iter()
                        .find(|l| label_to_allen(*l).unwrap().contains(base))
                        .unwrap();
                    g.add_edge(&format!("e{i}"), &format!("e{j}"), EdgeValue::Crisp(label))
                        .unwrap();
                }
            }
            assert!(realizable(&g, 6).unwrap());
            assert!(check_consistency(&g).unwrap().is_consistent());
        }
    }

    fn random_crisp_graph(rng: &mut ChaCha8Rng, scheme: Scheme, max_nodes: usize) -> TemporalGraph {
        let n = rng.gen_range(3..=max_nodes);
        let labels = scheme.labels();
        let mut g = TemporalGraph::new();
        for i in 0..n {
            g.add_node(&format!("e{i}"));
        }
        for i in 0..n {
            for j in i + 1..n {
                if rng.gen_bool(0.7) {
                    let label = labels[rng.gen_range(0..labels.len())];
                    g.add_edge(&format!("e{i}"), &format!("e{j}"), EdgeValue::Crisp(label))
                        .unwrap();
                }
            }
        }
        g
    }

    #[test]
    fn path_consistency_agrees_with_realizability_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for scheme in [Scheme::Coarse3, Scheme::Norm6] {
            for _ in 0..300 {
                let g = random_crisp_graph(&mut rng, scheme, 5);
                let pc = check_consistency(&g).unwrap().is_consistent();
                let real = realizable(&g, 6).unwrap();
                assert_eq!(pc, real, "scheme {scheme} graph {g:?}");
            }
        }
    }
}
