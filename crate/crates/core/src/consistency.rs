//! Repair of per-document predicted relation sets into globally
//! consistent labelings: greedy best-first replacement and an exact
//! integer-program formulation solved by branch and bound.

use crate::algebra::{
    allen_compose, check_consistency, label_to_allen, AlgebraError, AllenSet, EdgeValue,
    Posterior, TemporalGraph,
};
use crate::corpus::{RelationLabel, Scheme};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConsistencyError {
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error("edge ({0}, {1}) carries no posterior")]
    MissingPosterior(String, String),
    #[error("integer program is infeasible")]
    Infeasible,
    #[error("pinned edge ({0}, {1}) not present in the graph")]
    UnknownPin(String, String),
}

/// An event graph whose every edge carries a posterior over the labels
/// of one scheme. Pinned edges are forced to their argmax label by
/// both repair strategies.
#[derive(Debug, Clone)]
pub struct WeightedGraph {
    pub scheme: Scheme,
    pub graph: TemporalGraph,
    pinned: BTreeSet<(String, String)>,
}

fn unordered(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

impl WeightedGraph {
    pub fn new(scheme: Scheme) -> Self {
        WeightedGraph { scheme, graph: TemporalGraph::new(), pinned: BTreeSet::new() }
    }

    pub fn add_edge(
        &mut self,
        source: &str,
        target: &str,
        posterior: Posterior,
    ) -> Result<(), ConsistencyError> {
        self.graph.add_edge(source, target, EdgeValue::Posterior(posterior))?;
        Ok(())
    }

    /// Marks an edge as fixed to its argmax label.
    pub fn pin(&mut self, a: &str, b: &str) -> Result<(), ConsistencyError> {
        if self.graph.edge(a, b).is_none() {
            return Err(ConsistencyError::UnknownPin(a.to_string(), b.to_string()));
        }
        self.pinned.insert(unordered(a, b));
        Ok(())
    }

    pub fn is_pinned(&self, a: &str, b: &str) -> bool {
        self.pinned.contains(&unordered(a, b))
    }

    fn edges(&self) -> Result<Vec<(String, String, Posterior, bool)>, ConsistencyError> {
        let mut out = Vec::new();
        for edge in self.graph.edges() {
            match &edge.value {
                EdgeValue::Posterior(p) => out.push((
                    edge.source.clone(),
                    edge.target.clone(),
                    p.clone(),
                    self.is_pinned(&edge.source, &edge.target),
                )),
                EdgeValue::Crisp(_) => {
                    return Err(ConsistencyError::MissingPosterior(
                        edge.source.clone(),
                        edge.target.clone(),
                    ))
                }
            }
        }
        Ok(out)
    }
}

/// Result of a repair pass.
#[derive(Debug, Clone)]
pub struct RepairOutcome {
    /// Crisp labeling, one edge per input edge, directions preserved.
    pub graph: TemporalGraph,
    /// Sum over edges of the posterior of the chosen label.
    pub objective: f64,
    /// Edges for which no label was consistent with the accepted set;
    /// they carry the least-conflicting label instead.
    pub flagged: Vec<(String, String)>,
}

/// Greedy best-first repair: edges enter a sorted list by confidence
/// (max posterior), are accepted most-confident first, and an edge
/// whose label contradicts the accepted set is demoted to its
/// next-most-probable label until the set stays consistent.
pub fn greedy_repair(weighted: &WeightedGraph) -> Result<RepairOutcome, ConsistencyError> {
    let mut sl = weighted.edges()?;
    // pinned edges first, then confidence descending, ties by pair id
    sl.sort_by(|a, b| {
        let conf_a = a.2.probs.iter().cloned().fold(f64::MIN, f64::max);
        let conf_b = b.2.probs.iter().cloned().fold(f64::MIN, f64::max);
        b.3.cmp(&a.3)
            .then(conf_b.partial_cmp(&conf_a).unwrap())
            .then_with(|| unordered(&a.0, &a.1).cmp(&unordered(&b.0, &b.1)))
    });

    let mut accepted = TemporalGraph::new();
    for node in weighted.graph.nodes() {
        accepted.add_node(node);
    }
    let mut objective = 0.0;
    let mut flagged = Vec::new();
    let mut deferred: Vec<(String, String, RelationLabel, f64)> = Vec::new();

    for (source, target, posterior, pinned) in sl {
        let candidates = if pinned {
            vec![posterior.argmax()]
        } else {
            posterior.ranked()
        };
        let mut chosen = None;
        for label in &candidates {
            let mut trial = accepted.clone();
            trial.add_edge(&source, &target, EdgeValue::Crisp(*label))?;
            if check_consistency(&trial)?.is_consistent() {
                accepted = trial;
                chosen = Some(*label);
                break;
            }
        }
        match chosen {
            Some(label) => objective += posterior.prob(label),
            None => {
                // no label fits the accepted set: keep the one with the
                // fewest violated triangles, quarantined from FL
                let label = least_conflicting_label(&accepted, &source, &target, &posterior)?;
                objective += posterior.prob(label);
                flagged.push((source.clone(), target.clone()));
                deferred.push((source, target, label, 0.0));
            }
        }
    }
    for (source, target, label, _) in deferred {
        accepted.add_edge(&source, &target, EdgeValue::Crisp(label))?;
    }
    Ok(RepairOutcome { graph: accepted, objective, flagged })
}

/// Relation set from a toward b given the stored direction of a label.
fn directed_set(
    label: RelationLabel,
    stored: (&str, &str),
    wanted: (&str, &str),
) -> Result<AllenSet, AlgebraError> {
    let set = label_to_allen(label)?;
    if stored.0 == wanted.0 {
        Ok(set)
    } else {
        Ok(set.converse())
    }
}

fn least_conflicting_label(
    accepted: &TemporalGraph,
    source: &str,
    target: &str,
    posterior: &Posterior,
) -> Result<RelationLabel, ConsistencyError> {
    let mut best: Option<(usize, RelationLabel)> = None;
    for label in posterior.ranked() {
        let mut violations = 0usize;
        for mid in accepted.nodes() {
            let (Some(e1), Some(e2)) = (accepted.edge(source, mid), accepted.edge(mid, target))
            else {
                continue;
            };
            let (EdgeValue::Crisp(l1), EdgeValue::Crisp(l2)) = (&e1.value, &e2.value) else {
                continue;
            };
            let r1 = directed_set(*l1, (&e1.source, &e1.target), (source, mid))?;
            let r2 = directed_set(*l2, (&e2.source, &e2.target), (mid, target))?;
            let direct = label_to_allen(label)?;
            if direct.intersect(allen_compose(r1, r2)).is_empty() {
                violations += 1;
            }
        }
        if best.map_or(true, |(v, _)| violations < v) {
            best = Some((violations, label));
        }
    }
    Ok(best.expect("schemes are never empty").1)
}

/// One transitivity restriction: if both premises hold, some entailed
/// assignment of the conclusion pair must hold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriConstraint {
    /// (pair index, label index) in stored direction.
    pub premise1: (usize, usize),
    pub premise2: (usize, usize),
    /// Allowed (conclusion pair index, label index) assignments; all on
    /// one pair. Empty means the two premises are jointly forbidden.
    pub entailed: Vec<(usize, usize)>,
}

/// Binary program over (pair, label) indicator variables: exactly one
/// label per pair, transitivity constraints per connected triangle,
/// objective = sum of chosen posteriors.
#[derive(Debug, Clone)]
pub struct IlpInstance {
    pub scheme: Scheme,
    /// Pairs in stored direction, sorted by unordered key.
    pub pairs: Vec<(String, String)>,
    /// Per pair, per label (scheme order): objective coefficient.
    pub objective: Vec<Vec<f64>>,
    pub transitivity: Vec<TriConstraint>,
    /// Per pair: label index the solution must take, when pinned.
    pub fixed: Vec<Option<usize>>,
}

impl IlpInstance {
    pub fn variable_count(&self) -> usize {
        self.pairs.len() * self.scheme.label_count()
    }

    pub fn exactly_one_count(&self) -> usize {
        self.pairs.len()
    }

    /// Standard LP-format text export for cross-checking with external
    /// solvers.
    pub fn to_lp_format(&self) -> String {
        let labels = self.scheme.labels();
        let var = |p: usize, l: usize| format!("x{}_{}", p, labels[l].name());
        let mut out = String::from("Maximize\n obj:");
        let mut first = true;
        for (p, coeffs) in self.objective.iter().enumerate() {
            for (l, c) in coeffs.iter().enumerate() {
                if first {
                    out.push_str(&format!(" {c} {}", var(p, l)));
                    first = false;
                } else {
                    out.push_str(&format!(" + {c} {}", var(p, l)));
                }
            }
        }
        out.push_str("\nSubject To\n");
        for p in 0..self.pairs.len() {
            let terms: Vec<String> = (0..labels.len()).map(|l| var(p, l)).collect();
            out.push_str(&format!(" one{p}: {} = 1\n", terms.join(" + ")));
        }
        for (i, t) in self.transitivity.iter().enumerate() {
            let mut line = format!(
                " t{i}: {} + {}",
                var(t.premise1.0, t.premise1.1),
                var(t.premise2.0, t.premise2.1)
            );
            for (p, l) in &t.entailed {
                line.push_str(&format!(" - {}", var(*p, *l)));
            }
            line.push_str(" <= 1\n");
            out.push_str(&line);
        }
        for (p, f) in self.fixed.iter().enumerate() {
            if let Some(l) = f {
                out.push_str(&format!(" pin{p}: {} = 1\n", var(p, *l)));
            }
        }
        out.push_str("Binaries\n");
        for p in 0..self.pairs.len() {
            for l in 0..labels.len() {
                out.push(' ');
                out.push_str(&var(p, l));
            }
        }
        out.push_str("\nEnd\n");
        out
    }
}

/// Builds the integer program for a weighted graph: one variable per
/// (pair, label) in the pair's stored direction, and a transitivity
/// constraint for every connected triangle and premise label pair
/// whose entailment is a proper subset of the scheme.
pub fn build_ilp(weighted: &WeightedGraph) -> Result<IlpInstance, ConsistencyError> {
    let labels = weighted.scheme.labels();
    let edges = weighted.edges()?;
    let pairs: Vec<(String, String)> = edges.iter().map(|(s, t, _, _)| (s.clone(), t.clone())).collect();
    let objective: Vec<Vec<f64>> = edges.iter().map(|(_, _, p, _)| p.probs.clone()).collect();
    let fixed: Vec<Option<usize>> = edges
        .iter()
        .map(|(_, _, p, pinned)| if *pinned { Some(p.argmax().index()) } else { None })
        .collect();
    let pair_index: BTreeMap<(String, String), usize> = pairs
        .iter()
        .enumerate()
        .map(|(i, (s, t))| (unordered(s, t), i))
        .collect();

    // allen image of each label read along the stored direction or
    // against it
    let mut directed: Vec<Vec<(AllenSet, AllenSet)>> = Vec::with_capacity(pairs.len());
    for _ in &pairs {
        let sets: Vec<(AllenSet, AllenSet)> = labels
            .iter()
            .map(|l| {
                let s = label_to_allen(*l).expect("scheme checked");
                (s, s.converse())
            })
            .collect();
        directed.push(sets);
    }

    let nodes = weighted.graph.nodes().to_vec();
    let mut transitivity = Vec::new();
    for a in 0..nodes.len() {
        for b in a + 1..nodes.len() {
            for c in b + 1..nodes.len() {
                let tri = [&nodes[a], &nodes[b], &nodes[c]];
                let key = |x: &str, y: &str| pair_index.get(&unordered(x, y)).copied();
                let (Some(_), Some(_), Some(_)) =
                    (key(tri[0], tri[1]), key(tri[1], tri[2]), key(tri[0], tri[2]))
                else {
                    continue;
                };
                // one constraint family per choice of conclusion pair
                for (ci, cj, mid) in [
                    (tri[0], tri[1], tri[2]),
                    (tri[1], tri[2], tri[0]),
                    (tri[0], tri[2], tri[1]),
                ] {
                    let conc = key(ci, cj).unwrap();
                    let (i, k) = (pairs[conc].0.clone(), pairs[conc].1.clone());
                    let p1 = key(&i, mid).unwrap();
                    let p2 = key(mid, &k).unwrap();
                    for (l1, _) in labels.iter().enumerate() {
                        let r1 = if pairs[p1].0 == i {
                            directed[p1][l1].0
                        } else {
                            directed[p1][l1].1
                        };
                        for (l2, _) in labels.iter().enumerate() {
                            let r2 = if pairs[p2].0 == *mid {
                                directed[p2][l2].0
                            } else {
                                directed[p2][l2].1
                            };
                            let comp = allen_compose(r1, r2);
                            let entailed: Vec<(usize, usize)> = labels
                                .iter()
                                .enumerate()
                                .filter(|(l3, _)| !directed[conc][*l3].0.intersect(comp).is_empty())
                                .map(|(l3, _)| (conc, l3))
                                .collect();
                            if entailed.len() < labels.len() {
                                transitivity.push(TriConstraint {
                                    premise1: (p1, l1),
                                    premise2: (p2, l2),
                                    entailed,
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(IlpInstance { scheme: weighted.scheme, pairs, objective, transitivity, fixed })
}

/// Exact solution of the integer program.
#[derive(Debug, Clone)]
pub struct IlpSolution {
    /// Chosen label index per pair, in instance pair order.
    pub labels: Vec<usize>,
    pub objective: f64,
}

/// Branch and bound over per-pair label choices with per-pair
/// best-label upper bounds. Exact and deterministic.
///
/// The linear transitivity constraints prune the search; a complete
/// assignment is accepted only when the induced crisp graph passes the
/// full path-consistency closure, which the triangle constraints alone
/// do not guarantee on graphs with four or more nodes.
pub fn solve_ilp(inst: &IlpInstance) -> Result<IlpSolution, ConsistencyError> {
    let n = inst.pairs.len();
    if n == 0 {
        return Ok(IlpSolution { labels: Vec::new(), objective: 0.0 });
    }
    let label_count = inst.scheme.label_count();

    // labels per pair ordered by coefficient descending (fixed pairs
    // collapse to their single allowed label)
    let mut choice_order: Vec<Vec<usize>> = Vec::with_capacity(n);
    for p in 0..n {
        match inst.fixed[p] {
            Some(l) => choice_order.push(vec![l]),
            None => {
                let mut order: Vec<usize> = (0..label_count).collect();
                order.sort_by(|a, b| {
                    inst.objective[p][*b].partial_cmp(&inst.objective[p][*a]).unwrap().then(a.cmp(b))
                });
                choice_order.push(order);
            }
        }
    }
    let mut suffix_best = vec![0.0f64; n + 1];
    for p in (0..n).rev() {
        let best = choice_order[p]
            .iter()
            .map(|l| inst.objective[p][*l])
            .fold(f64::MIN, f64::max);
        suffix_best[p] = suffix_best[p + 1] + best;
    }

    // constraints become checkable once their last pair is assigned
    let mut ready_at: Vec<Vec<&TriConstraint>> = vec![Vec::new(); n];
    for t in &inst.transitivity {
        let conc = t.entailed.first().map(|(p, _)| *p);
        let mut last = t.premise1.0.max(t.premise2.0);
        if let Some(c) = conc {
            last = last.max(c);
        }
        ready_at[last].push(t);
    }

    struct Search<'a> {
        inst: &'a IlpInstance,
        choice_order: &'a [Vec<usize>],
        suffix_best: &'a [f64],
        ready_at: &'a [Vec<&'a TriConstraint>],
        assignment: Vec<usize>,
        best: Option<(Vec<usize>, f64)>,
    }

    impl Search<'_> {
        fn violates(&self, depth: usize) -> bool {
            for t in &self.ready_at[depth] {
                if self.assignment[t.premise1.0] != t.premise1.1
                    || self.assignment[t.premise2.0] != t.premise2.1
                {
                    continue;
                }
                let satisfied =
                    t.entailed.iter().any(|(p, l)| self.assignment[*p] == *l);
                if !satisfied {
                    return true;
                }
            }
            false
        }

        fn consistent(&self) -> bool {
            let labels = self.inst.scheme.labels();
            let mut graph = TemporalGraph::new();
            for (p, (source, target)) in self.inst.pairs.iter().enumerate() {
                graph
                    .add_edge(source, target, EdgeValue::Crisp(labels[self.assignment[p]]))
                    .expect("instance pairs are distinct");
            }
            matches!(check_consistency(&graph), Ok(c) if c.is_consistent())
        }

        fn dfs(&mut self, depth: usize, sum: f64) {
            if depth == self.inst.pairs.len() {
                let better = self.best.as_ref().map_or(true, |(_, b)| sum > *b);
                if better && self.consistent() {
                    self.best = Some((self.assignment.clone(), sum));
                }
                return;
            }
            for &label in &self.choice_order[depth] {
                let value = sum + self.inst.objective[depth][label];
                if let Some((_, best)) = &self.best {
                    if value + self.suffix_best[depth + 1] <= *best + 1e-12 {
                        continue;
                    }
                }
                self.assignment[depth] = label;
                if !self.violates(depth) {
                    self.dfs(depth + 1, value);
                }
            }
            self.assignment[depth] = usize::MAX;
        }
    }

    let mut search = Search {
        inst,
        choice_order: &choice_order,
        suffix_best: &suffix_best,
        ready_at: &ready_at,
        assignment: vec![usize::MAX; n],
        best: None,
    };
    search.dfs(0, 0.0);
    let (labels, objective) = search.best.ok_or(ConsistencyError::Infeasible)?;
    Ok(IlpSolution { labels, objective })
}

/// Repairs a weighted graph by solving its integer program.
pub fn ilp_repair(weighted: &WeightedGraph) -> Result<RepairOutcome, ConsistencyError> {
    let inst = build_ilp(weighted)?;
    let solution = solve_ilp(&inst)?;
    let labels = weighted.scheme.labels();
    let mut graph = TemporalGraph::new();
    for node in weighted.graph.nodes() {
        graph.add_node(node);
    }
    for (p, (source, target)) in inst.pairs.iter().enumerate() {
        graph.add_edge(source, target, EdgeValue::Crisp(labels[solution.labels[p]]))?;
    }
    Ok(RepairOutcome { graph, objective: solution.objective, flagged: Vec::new() })
}

/// Argmax labeling without any repair, for comparisons.
pub fn argmax_labeling(weighted: &WeightedGraph) -> Result<(TemporalGraph, f64), ConsistencyError> {
    let mut graph = TemporalGraph::new();
    for node in weighted.graph.nodes() {
        graph.add_node(node);
    }
    let mut objective = 0.0;
    for (source, target, posterior, _) in weighted.edges()? {
        let label = posterior.argmax();
        objective += posterior.prob(label);
        graph.add_edge(&source, &target, EdgeValue::Crisp(label))?;
    }
    Ok((graph, objective))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::realizable;
    use crate::corpus::CoarseRelation as C;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn coarse(c: C) -> RelationLabel {
        RelationLabel::Coarse(c)
    }

    fn posterior(before: f64, after: f64, overlap: f64) -> Posterior {
        Posterior::new(Scheme::Coarse3, vec![before, after, overlap]).unwrap()
    }

    /// The contradictory triangle: every edge prefers AFTER.
    fn contradiction_triangle(last_confidence: f64) -> WeightedGraph {
        let mut g = WeightedGraph::new(Scheme::Coarse3);
        g.add_edge("A", "B", posterior(0.3, 0.6, 0.1)).unwrap();
        g.add_edge("B", "C", posterior(0.3, 0.6, 0.1)).unwrap();
        let rest = (1.0 - last_confidence) / 2.0;
        g.add_edge("C", "A", posterior(rest, last_confidence, rest)).unwrap();
        g
    }

    #[test]
    fn greedy_relabels_the_least_confident_edge() {
        let g = contradiction_triangle(0.58);
        let out = greedy_repair(&g).unwrap();
        assert!(check_consistency(&out.graph).unwrap().is_consistent());
        assert!(out.flagged.is_empty());
        let label = |s: &str, t: &str| match &out.graph.edge(s, t).unwrap().value {
            EdgeValue::Crisp(l) => *l,
            _ => unreachable!(),
        };
        // the two most confident edges keep their argmax labels
        assert_eq!(label("A", "B"), coarse(C::After));
        assert_eq!(label("B", "C"), coarse(C::After));
        assert_ne!(label("C", "A"), coarse(C::After));
    }

    #[test]
    fn repairs_are_noops_on_consistent_argmax_labelings() {
        let mut g = WeightedGraph::new(Scheme::Coarse3);
        g.add_edge("A", "B", posterior(0.8, 0.1, 0.1)).unwrap();
        g.add_edge("B", "C", posterior(0.7, 0.2, 0.1)).unwrap();
        g.add_edge("A", "C", posterior(0.6, 0.2, 0.2)).unwrap();
        let (argmax, obj) = argmax_labeling(&g).unwrap();
        assert!(check_consistency(&argmax).unwrap().is_consistent());

        let greedy = greedy_repair(&g).unwrap();
        assert_eq!(greedy.graph, argmax);
        assert!((greedy.objective - obj).abs() < 1e-12);

        let ilp = ilp_repair(&g).unwrap();
        assert_eq!(ilp.graph, argmax);
        assert!((ilp.objective - obj).abs() < 1e-12);
    }

    #[test]
    fn ilp_flips_exactly_one_edge_of_the_contradiction_triangle() {
        let g = contradiction_triangle(0.6);
        let out = ilp_repair(&g).unwrap();
        assert!((out.objective - 1.5).abs() < 1e-12);
        assert!(check_consistency(&out.graph).unwrap().is_consistent());
        // cross-check against exhaustive enumeration over 27 labelings
        let brute = enumeration_max(&g);
        assert!((out.objective - brute).abs() < 1e-12);
    }

    #[test]
    fn instance_shape_for_a_complete_coarse_triangle() {
        let g = contradiction_triangle(0.6);
        let inst = build_ilp(&g).unwrap();
        assert_eq!(inst.variable_count(), 9);
        assert_eq!(inst.exactly_one_count(), 3);
        assert!(!inst.transitivity.is_empty());
        let lp = inst.to_lp_format();
        assert!(lp.contains("Maximize"));
        assert!(lp.contains("Binaries"));
        assert!(lp.contains("one0:"));
    }

    #[test]
    fn disconnected_pairs_join_no_transitivity_constraint() {
        let mut g = contradiction_triangle(0.6);
        g.add_edge("X", "Y", posterior(0.5, 0.3, 0.2)).unwrap();
        let inst = build_ilp(&g).unwrap();
        let lonely = inst.pairs.iter().position(|(s, _)| s == "X").unwrap();
        for t in &inst.transitivity {
            assert_ne!(t.premise1.0, lonely);
            assert_ne!(t.premise2.0, lonely);
            assert!(t.entailed.iter().all(|(p, _)| *p != lonely));
        }
    }

    #[test]
    fn before_before_constraint_forces_the_conclusion() {
        let mut g = WeightedGraph::new(Scheme::Coarse3);
        // premises strongly BEFORE; conclusion mildly prefers AFTER, so
        // the unique optimum keeps both premises and flips the conclusion
        g.add_edge("A", "B", posterior(0.98, 0.01, 0.01)).unwrap();
        g.add_edge("B", "C", posterior(0.98, 0.01, 0.01)).unwrap();
        g.add_edge("A", "C", posterior(0.4, 0.5, 0.1)).unwrap();
        let out = ilp_repair(&g).unwrap();
        let label = |s: &str, t: &str| match &out.graph.edge(s, t).unwrap().value {
            EdgeValue::Crisp(l) => *l,
            _ => unreachable!(),
        };
        assert_eq!(label("A", "B"), coarse(C::Before));
        assert_eq!(label("B", "C"), coarse(C::Before));
        assert_eq!(label("A", "C"), coarse(C::Before));
    }

    fn crisp_graph_from(
        weighted: &WeightedGraph,
        labels: &[RelationLabel],
    ) -> TemporalGraph {
        let mut g = TemporalGraph::new();
        for node in weighted.graph.nodes() {
            g.add_node(node);
        }
        for (edge, label) in weighted.graph.edges().zip(labels) {
            g.add_edge(&edge.source, &edge.target, EdgeValue::Crisp(*label)).unwrap();
        }
        g
    }

    /// Max objective over all path-consistent labelings, by exhaustive
    /// enumeration. Test oracle only.
    fn enumeration_max(weighted: &WeightedGraph) -> f64 {
        let labels = weighted.scheme.labels();
        let edges: Vec<_> = weighted.graph.edges().cloned().collect();
        let mut best = f64::MIN;
        let mut assignment = vec![0usize; edges.len()];
        loop {
            let chosen: Vec<RelationLabel> =
                assignment.iter().map(|i| labels[*i]).collect();
            let crisp = crisp_graph_from(weighted, &chosen);
            if check_consistency(&crisp).unwrap().is_consistent() {
                let mut obj = 0.0;
                for (edge, label) in edges.iter().zip(&chosen) {
                    if let EdgeValue::Posterior(p) = &edge.value {
                        obj += p.prob(*label);
                    }
                }
                best = best.max(obj);
            }
            // odometer increment
            let mut d = 0;
            loop {
                if d == assignment.len() {
                    return best;
                }
                assignment[d] += 1;
                if assignment[d] < labels.len() {
                    break;
                }
                assignment[d] = 0;
                d += 1;
            }
        }
    }

    fn random_complete_weighted(
        rng: &mut ChaCha8Rng,
        scheme: Scheme,
        nodes: usize,
    ) -> WeightedGraph {
        let mut g = WeightedGraph::new(scheme);
        let count = scheme.label_count();
        for i in 0..nodes {
            for j in i + 1..nodes {
                let raw: Vec<f64> = (0..count).map(|_| rng.gen_range(0.01..1.0)).collect();
                let sum: f64 = raw.iter().sum();
                let probs: Vec<f64> = raw.iter().map(|p| p / sum).collect();
                let posterior = Posterior::new(scheme, probs).unwrap();
                g.add_edge(&format!("e{i}"), &format!("e{j}"), posterior).unwrap();
            }
        }
        g
    }

    #[test]
    fn ilp_matches_enumeration_on_random_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..40 {
            let nodes = rng.gen_range(3..=4);
            let g = random_complete_weighted(&mut rng, Scheme::Coarse3, nodes);
            let out = ilp_repair(&g).unwrap();
            let brute = enumeration_max(&g);
            assert!(
                (out.objective - brute).abs() < 1e-9,
                "ilp {} vs brute {brute}",
                out.objective
            );
            assert!(check_consistency(&out.graph).unwrap().is_consistent());
        }
    }

    #[test]
    fn greedy_objective_never_beats_the_ilp() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..60 {
            let nodes = rng.gen_range(3..=5);
            let g = random_complete_weighted(&mut rng, Scheme::Coarse3, nodes);
            let greedy = greedy_repair(&g).unwrap();
            let ilp = ilp_repair(&g).unwrap();
            assert!(greedy.objective <= ilp.objective + 1e-9);
            assert!(check_consistency(&greedy.graph).unwrap().is_consistent());
            assert!(check_consistency(&ilp.graph).unwrap().is_consistent());
            assert!(greedy.flagged.is_empty());
        }
    }

    #[test]
    fn greedy_output_is_realizable_on_random_posteriors() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let g = random_complete_weighted(&mut rng, Scheme::Coarse3, 4);
            let out = greedy_repair(&g).unwrap();
            assert!(realizable(&out.graph, 6).unwrap());
        }
    }

    #[test]
    fn violated_constraints_mark_unrealizable_labelings() {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        for _ in 0..10 {
            let g = random_complete_weighted(&mut rng, Scheme::Coarse3, 3);
            let inst = build_ilp(&g).unwrap();
            let labels = g.scheme.labels();
            // walk every labeling of the triangle
            for a in 0..3 {
                for b in 0..3 {
                    for c in 0..3 {
                        let assignment = [a, b, c];
                        let violated = inst.transitivity.iter().any(|t| {
                            assignment[t.premise1.0] == t.premise1.1
                                && assignment[t.premise2.0] == t.premise2.1
                                && !t.entailed.iter().any(|(p, l)| assignment[*p] == *l)
                        });
                        if violated {
                            let chosen: Vec<RelationLabel> =
                                assignment.iter().map(|i| labels[*i]).collect();
                            let crisp = crisp_graph_from(&g, &chosen);
                            assert!(!realizable(&crisp, 6).unwrap());
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn pinned_edges_survive_both_repairs() {
        let mut g = contradiction_triangle(0.6);
        g.pin("C", "A").unwrap();
        let greedy = greedy_repair(&g).unwrap();
        let ilp = ilp_repair(&g).unwrap();
        for out in [greedy, ilp] {
            match &out.graph.edge("C", "A").unwrap().value {
                EdgeValue::Crisp(l) => assert_eq!(*l, coarse(C::After)),
                _ => unreachable!(),
            }
            assert!(check_consistency(&out.graph).unwrap().is_consistent());
        }
    }

    #[test]
    fn norm6_repair_handles_directed_labels() {
        use crate::corpus::NormRelation as N;
        let mut g = WeightedGraph::new(Scheme::Norm6);
        let one_hot = |l: N, eps: f64| {
            let mut probs = vec![eps / 5.0; 6];
            probs[RelationLabel::Norm(l).index()] = 1.0 - eps;
            Posterior::new(Scheme::Norm6, probs).unwrap()
        };
        g.add_edge("A", "B", one_hot(N::Before, 0.1)).unwrap();
        g.add_edge("B", "C", one_hot(N::Before, 0.2)).unwrap();
        g.add_edge("A", "C", one_hot(N::Before, 0.3)).unwrap();
        let out = ilp_repair(&g).unwrap();
        assert!(check_consistency(&out.graph).unwrap().is_consistent());
        let greedy = greedy_repair(&g).unwrap();
        assert!(check_consistency(&greedy.graph).unwrap().is_consistent());
    }
}
