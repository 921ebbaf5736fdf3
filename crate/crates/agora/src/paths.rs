//! Decomposition of the union of two matchings into maximal alternating
//! paths and cycles.

use std::collections::{BTreeMap, BTreeSet};

use crate::model::{AgentId, Matching};

/// Which of the two input matchings an edge came from. An edge present in
/// both matchings contributes one half-edge of each origin, forming a
/// two-edge cycle on its endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EdgeOrigin {
    First,
    Second,
}

impl EdgeOrigin {
    fn other(self) -> EdgeOrigin {
        match self {
            EdgeOrigin::First => EdgeOrigin::Second,
            EdgeOrigin::Second => EdgeOrigin::First,
        }
    }
}

/// One maximal component of the union. `edges[k]` joins `vertices[k]` and
/// `vertices[k + 1]`; in a cycle the last edge joins back to `vertices[0]`.
/// Edge endpoints are recorded as (buyer index, seller index) regardless of
/// traversal direction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathComponent {
    pub vertices: Vec<AgentId>,
    pub edges: Vec<(usize, usize, EdgeOrigin)>,
    pub is_cycle: bool,
}

impl PathComponent {
    /// Origins alternate along the traversal. Holds for every component of
    /// a two-matching union by construction; asserted in diagnostics.
    pub fn alternates(&self) -> bool {
        self.edges.windows(2).all(|w| w[0].2 != w[1].2)
    }

    /// A cycle consisting of the two copies of one shared edge.
    pub fn is_shared_edge_cycle(&self) -> bool {
        self.is_cycle
            && self.edges.len() == 2
            && self.edges[0].0 == self.edges[1].0
            && self.edges[0].1 == self.edges[1].1
    }

    pub fn endpoints(&self) -> Option<(AgentId, AgentId)> {
        if self.is_cycle || self.vertices.is_empty() {
            None
        } else {
            Some((self.vertices[0], *self.vertices.last().unwrap()))
        }
    }

    pub fn reversed(&self) -> PathComponent {
        let mut vertices = self.vertices.clone();
        let mut edges = self.edges.clone();
        if self.is_cycle {
            // keep the start, reverse the direction of travel
            vertices[1..].reverse();
            edges.reverse();
        } else {
            vertices.reverse();
            edges.reverse();
        }
        PathComponent { vertices, edges, is_cycle: self.is_cycle }
    }
}

type HalfEdge = (usize, usize, EdgeOrigin);

struct UnionGraph {
    incident: BTreeMap<AgentId, Vec<HalfEdge>>,
    used: BTreeSet<HalfEdge>,
}

impl UnionGraph {
    fn build(first: &Matching, second: &Matching) -> Self {
        let mut incident: BTreeMap<AgentId, Vec<HalfEdge>> = BTreeMap::new();
        let mut add = |pairs: &Matching, origin: EdgeOrigin| {
            for (i, j) in pairs.pairs() {
                incident.entry(AgentId::buyer(i)).or_default().push((i, j, origin));
                incident.entry(AgentId::seller(j)).or_default().push((i, j, origin));
            }
        };
        add(first, EdgeOrigin::First);
        add(second, EdgeOrigin::Second);
        UnionGraph { incident, used: BTreeSet::new() }
    }

    fn degree(&self, v: AgentId) -> usize {
        self.incident.get(&v).map_or(0, Vec::len)
    }

    fn next_unused(&self, v: AgentId, prefer: Option<EdgeOrigin>) -> Option<HalfEdge> {
        let slots = self.incident.get(&v)?;
        if let Some(origin) = prefer {
            if let Some(&e) = slots.iter().find(|e| e.2 == origin && !self.used.contains(e)) {
                return Some(e);
            }
        }
        slots.iter().find(|e| !self.used.contains(e)).copied()
    }

    fn walk_from(&mut self, start: AgentId, prefer_first: bool) -> PathComponent {
        let mut vertices = vec![start];
        let mut edges = Vec::new();
        let mut current = start;
        let mut prefer = if prefer_first { Some(EdgeOrigin::First) } else { None };
        loop {
            let Some(edge) = self.next_unused(current, prefer) else { break };
            self.used.insert(edge);
            let (i, j, origin) = edge;
            let next = if current == AgentId::buyer(i) {
                AgentId::seller(j)
            } else {
                AgentId::buyer(i)
            };
            edges.push(edge);
            if next == start {
                return PathComponent { vertices, edges, is_cycle: true };
            }
            vertices.push(next);
            current = next;
            prefer = Some(origin.other());
        }
        PathComponent { vertices, edges, is_cycle: false }
    }
}

/// Splits the union of two matchings into its maximal alternating paths and
/// cycles. Components are listed by their smallest vertex; open paths start
/// at their smaller endpoint, cycles at their smallest vertex taking that
/// vertex's first-matching edge first. Single covered vertices cannot occur
/// (every half-edge has two ends), and interior vertices always carry one
/// edge of each origin, so traversal alternates automatically.
pub fn alternating_decomposition(first: &Matching, second: &Matching) -> Vec<PathComponent> {
    let mut g = UnionGraph::build(first, second);
    let mut components = Vec::new();

    // open paths start at degree-1 vertices
    let endpoints: Vec<AgentId> = g
        .incident
        .keys()
        .copied()
        .filter(|&v| g.degree(v) == 1)
        .collect();
    for v in endpoints {
        if g.next_unused(v, None).is_some() {
            components.push(g.walk_from(v, false));
        }
    }

    // what remains is cycles
    let rest: Vec<AgentId> = g.incident.keys().copied().collect();
    for v in rest {
        if g.next_unused(v, None).is_some() {
            let c = g.walk_from(v, true);
            debug_assert!(c.is_cycle);
            components.push(c);
        }
    }

    components.sort_by_key(|c| c.vertices.iter().copied().min());
    components
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(pairs: &[(usize, usize)]) -> Matching {
        Matching::new(pairs.iter().copied()).unwrap()
    }

    #[test]
    fn disjoint_edges_form_two_paths() {
        let comps = alternating_decomposition(&m(&[(0, 0)]), &m(&[(1, 1)]));
        assert_eq!(comps.len(), 2);
        assert!(comps.iter().all(|c| !c.is_cycle && c.edges.len() == 1));
        assert_eq!(comps[0].edges, vec![(0, 0, EdgeOrigin::First)]);
        assert_eq!(comps[1].edges, vec![(1, 1, EdgeOrigin::Second)]);
    }

    #[test]
    fn shared_edge_becomes_two_edge_cycle() {
        let comps = alternating_decomposition(&m(&[(0, 0)]), &m(&[(0, 0)]));
        assert_eq!(comps.len(), 1);
        assert!(comps[0].is_shared_edge_cycle());
        assert_eq!(comps[0].vertices, vec![AgentId::buyer(0), AgentId::seller(0)]);
    }

    #[test]
    fn three_vertex_path_starts_at_smaller_endpoint() {
        // b0 - s0 - b1: endpoints are the two buyers, b0 < b1
        let comps = alternating_decomposition(&m(&[(0, 0)]), &m(&[(1, 0)]));
        assert_eq!(comps.len(), 1);
        let c = &comps[0];
        assert!(!c.is_cycle);
        assert!(c.alternates());
        assert_eq!(
            c.vertices,
            vec![AgentId::buyer(0), AgentId::seller(0), AgentId::buyer(1)]
        );
        assert_eq!(
            c.edges,
            vec![(0, 0, EdgeOrigin::First), (1, 0, EdgeOrigin::Second)]
        );
    }

    #[test]
    fn four_cycle() {
        let comps =
            alternating_decomposition(&m(&[(0, 0), (1, 1)]), &m(&[(0, 1), (1, 0)]));
        assert_eq!(comps.len(), 1);
        let c = &comps[0];
        assert!(c.is_cycle);
        assert_eq!(c.edges.len(), 4);
        assert!(c.alternates());
        assert!(!c.is_shared_edge_cycle());
        assert_eq!(c.vertices[0], AgentId::buyer(0));
        assert_eq!(c.edges[0].2, EdgeOrigin::First);
    }

    #[test]
    fn mixed_union() {
        // shared (0,0); path b1 - s1 - b2; lone second-matching edge (3, 2)
        let first = m(&[(0, 0), (1, 1)]);
        let second = m(&[(0, 0), (2, 1), (3, 2)]);
        let comps = alternating_decomposition(&first, &second);
        assert_eq!(comps.len(), 3);
        assert!(comps[0].is_shared_edge_cycle());
        assert_eq!(comps[1].edges.len(), 2);
        assert_eq!(comps[2].edges, vec![(3, 2, EdgeOrigin::Second)]);
        // every input edge appears exactly once per origin
        let total: usize = comps.iter().map(|c| c.edges.len()).sum();
        assert_eq!(total, first.len() + second.len());
    }

    #[test]
    fn reversal_keeps_edge_set() {
        let comps = alternating_decomposition(&m(&[(0, 0)]), &m(&[(1, 0)]));
        let c = &comps[0];
        let r = c.reversed();
        assert_eq!(r.vertices, vec![AgentId::buyer(1), AgentId::seller(0), AgentId::buyer(0)]);
        assert!(r.alternates());
        let mut a = c.edges.clone();
        let mut b = r.edges.clone();
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }
}
