//! Labeled graphs over the generator alphabet and Stallings folding.
//!
//! Each edge is stored once with an orientation; seen from its head the
//! label is inverted. A half-edge is an (edge, end) pair, so a loop edge
//! contributes two half-edges at its vertex with opposite labels.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::word::{Letter, Sign};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VertexId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeId(pub u32);

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FoldError {
    #[error("rank must be at least 1, got {0}")]
    InvalidRank(usize),
    #[error("graph has no vertices")]
    NoVertices,
    #[error("graph is not connected")]
    NotConnected,
    #[error("duplicate vertex id {0}")]
    DuplicateVertex(VertexId),
    #[error("edge {edge} references unknown vertex {vertex}")]
    UnknownVertex { edge: EdgeId, vertex: VertexId },
    #[error("edge {edge} has generator index {index} outside 1..={rank}")]
    InvalidLabel { edge: EdgeId, index: usize, rank: usize },
    #[error("fold pair is no longer present in the graph")]
    StalePair,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Edge {
    pub from: VertexId,
    pub to: VertexId,
    pub label: Letter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum End {
    Tail,
    Head,
}

/// One end of an edge, viewed from the vertex it is attached to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HalfEdge {
    pub edge: EdgeId,
    pub end: End,
}

/// Connected directed multigraph with edges labeled by letters of rank `g`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledGraph {
    rank: usize,
    vertices: BTreeSet<VertexId>,
    edges: BTreeMap<EdgeId, Edge>,
}

/// Two half-edges at `vertex` with the same outgoing label `label`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FoldPair {
    pub vertex: VertexId,
    pub label: Letter,
    pub keep: EdgeId,
    pub drop: EdgeId,
}

/// Record of one fold; `vertex` and edge ids refer to the graph before it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FoldEvent {
    pub vertex: VertexId,
    pub keep: EdgeId,
    pub drop: EdgeId,
    pub label: Letter,
    /// Vertex removed by identifying the far ends, if they were distinct.
    pub merged: Option<(VertexId, VertexId)>,
}

impl fmt::Display for FoldEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FOLD v={} keep={} drop={} label={}", self.vertex, self.keep, self.drop, self.label)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FoldTrace {
    pub events: Vec<FoldEvent>,
}

impl FoldTrace {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

impl fmt::Display for FoldTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.events {
            writeln!(f, "{e}")?;
        }
        Ok(())
    }
}

/// Outcome of folding a graph and comparing it with the rose.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decomposition {
    /// The folded graph is the rose; `iota` sends each surviving edge to
    /// the generator it traverses (sign `-` when its orientation is reversed).
    Iso { trace: FoldTrace, iota: Vec<(EdgeId, Letter)> },
    NotRose { folded: LabeledGraph, trace: FoldTrace },
}

/// Cell counts of the handlebody dual to a graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HandlebodySummary {
    pub three_cells: usize,
    pub two_cells: usize,
    pub genus: i64,
}

impl LabeledGraph {
    /// Validates and builds a graph; vertex ids need not be contiguous.
    pub fn new(
        rank: usize,
        vertices: impl IntoIterator<Item = VertexId>,
        edges: impl IntoIterator<Item = (EdgeId, Edge)>,
    ) -> Result<Self, FoldError> {
        if rank == 0 {
            return Err(FoldError::InvalidRank(rank));
        }
        let mut vs = BTreeSet::new();
        for v in vertices {
            if !vs.insert(v) {
                return Err(FoldError::DuplicateVertex(v));
            }
        }
        let es: BTreeMap<EdgeId, Edge> = edges.into_iter().collect();
        let g = LabeledGraph { rank, vertices: vs, edges: es };
        g.validate()?;
        Ok(g)
    }

    fn validate(&self) -> Result<(), FoldError> {
        if self.vertices.is_empty() {
            return Err(FoldError::NoVertices);
        }
        for (&id, e) in &self.edges {
            for v in [e.from, e.to] {
                if !self.vertices.contains(&v) {
                    return Err(FoldError::UnknownVertex { edge: id, vertex: v });
                }
            }
            if e.label.index == 0 || e.label.index > self.rank {
                return Err(FoldError::InvalidLabel { edge: id, index: e.label.index, rank: self.rank });
            }
        }
        if !self.is_connected() {
            return Err(FoldError::NotConnected);
        }
        Ok(())
    }

    /// Bouquet of `g` loops labeled `g1+ .. gg+` at vertex 0.
    pub fn rose(g: usize) -> Result<Self, FoldError> {
        if g == 0 {
            return Err(FoldError::InvalidRank(g));
        }
        let v = VertexId(0);
        let edges = (1..=g).map(|i| {
            (EdgeId(i as u32 - 1), Edge { from: v, to: v, label: Letter::pos(i) })
        });
        Self::new(g, [v], edges)
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// First Betti number `E - V + 1`.
    pub fn cycle_rank(&self) -> i64 {
        self.edges.len() as i64 - self.vertices.len() as i64 + 1
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.vertices.iter().copied()
    }

    pub fn edges(&self) -> impl Iterator<Item = (EdgeId, &Edge)> + '_ {
        self.edges.iter().map(|(&k, v)| (k, v))
    }

    pub fn edge(&self, id: EdgeId) -> Option<&Edge> {
        self.edges.get(&id)
    }

    fn is_connected(&self) -> bool {
        let Some(&start) = self.vertices.iter().next() else {
            return false;
        };
        let mut adj: BTreeMap<VertexId, Vec<VertexId>> = BTreeMap::new();
        for e in self.edges.values() {
            adj.entry(e.from).or_default().push(e.to);
            adj.entry(e.to).or_default().push(e.from);
        }
        let mut seen = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for &w in adj.get(&v).into_iter().flatten() {
                if seen.insert(w) {
                    queue.push_back(w);
                }
            }
        }
        seen.len() == self.vertices.len()
    }

    /// Vertex a half-edge is attached to.
    pub fn base(&self, h: HalfEdge) -> VertexId {
        let e = &self.edges[&h.edge];
        match h.end {
            End::Tail => e.from,
            End::Head => e.to,
        }
    }

    /// Vertex at the other end of the edge carrying `h`.
    pub fn far(&self, h: HalfEdge) -> VertexId {
        let e = &self.edges[&h.edge];
        match h.end {
            End::Tail => e.to,
            End::Head => e.from,
        }
    }

    /// Label read when leaving the base of `h` along its edge.
    pub fn outgoing_label(&self, h: HalfEdge) -> Letter {
        let e = &self.edges[&h.edge];
        match h.end {
            End::Tail => e.label,
            End::Head => e.label.inverse(),
        }
    }

    /// Half-edges at `v` in (edge id, tail before head) order.
    pub fn half_edges_at(&self, v: VertexId) -> Vec<HalfEdge> {
        let mut out = Vec::new();
        for (&id, e) in &self.edges {
            if e.from == v {
                out.push(HalfEdge { edge: id, end: End::Tail });
            }
            if e.to == v {
                out.push(HalfEdge { edge: id, end: End::Head });
            }
        }
        out
    }

    fn incidence(&self) -> BTreeMap<VertexId, Vec<HalfEdge>> {
        let mut map: BTreeMap<VertexId, Vec<HalfEdge>> =
            self.vertices.iter().map(|&v| (v, Vec::new())).collect();
        for (&id, e) in &self.edges {
            map.get_mut(&e.from).expect("validated").push(HalfEdge { edge: id, end: End::Tail });
            map.get_mut(&e.to).expect("validated").push(HalfEdge { edge: id, end: End::Head });
        }
        map
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.half_edges_at(v).len()
    }

    /// Every foldable pair, sorted by (vertex, label, keep, drop).
    pub fn foldable_pairs(&self) -> Vec<FoldPair> {
        let mut out = Vec::new();
        for (v, hs) in self.incidence() {
            let mut by_label: BTreeMap<Letter, Vec<EdgeId>> = BTreeMap::new();
            for h in hs {
                by_label.entry(self.outgoing_label(h)).or_default().push(h.edge);
            }
            for (label, mut ids) in by_label {
                ids.sort();
                for i in 0..ids.len() {
                    for j in i + 1..ids.len() {
                        out.push(FoldPair { vertex: v, label, keep: ids[i], drop: ids[j] });
                    }
                }
            }
        }
        out
    }

    /// First foldable pair in (vertex, label, edge id) order.
    pub fn find_foldable_pair(&self) -> Option<FoldPair> {
        for (v, hs) in self.incidence() {
            let mut by_label: BTreeMap<Letter, Vec<EdgeId>> = BTreeMap::new();
            for h in hs {
                by_label.entry(self.outgoing_label(h)).or_default().push(h.edge);
            }
            for (label, mut ids) in by_label {
                if ids.len() >= 2 {
                    ids.sort();
                    return Some(FoldPair { vertex: v, label, keep: ids[0], drop: ids[1] });
                }
            }
        }
        None
    }

    pub fn is_folded(&self) -> bool {
        self.find_foldable_pair().is_none()
    }

    fn half_edge_with_label(&self, v: VertexId, edge: EdgeId, label: Letter) -> Option<HalfEdge> {
        let e = self.edges.get(&edge)?;
        if e.from == v && e.label == label {
            return Some(HalfEdge { edge, end: End::Tail });
        }
        if e.to == v && e.label.inverse() == label {
            return Some(HalfEdge { edge, end: End::Head });
        }
        None
    }

    /// Identifies the two edges of `pair`, merging their far ends into the
    /// smaller vertex id. Distinct far ends keep `E - V + 1`; equal far ends
    /// (parallel edges) lower it by one.
    pub fn fold_step(&self, pair: &FoldPair) -> Result<(LabeledGraph, FoldEvent), FoldError> {
        if pair.keep == pair.drop {
            return Err(FoldError::StalePair);
        }
        let hk = self
            .half_edge_with_label(pair.vertex, pair.keep, pair.label)
            .ok_or(FoldError::StalePair)?;
        let hd = self
            .half_edge_with_label(pair.vertex, pair.drop, pair.label)
            .ok_or(FoldError::StalePair)?;
        let (fk, fd) = (self.far(hk), self.far(hd));
        let mut out = self.clone();
        out.edges.remove(&pair.drop);
        let merged = if fk != fd {
            let (keep_v, gone) = if fk < fd { (fk, fd) } else { (fd, fk) };
            for e in out.edges.values_mut() {
                if e.from == gone {
                    e.from = keep_v;
                }
                if e.to == gone {
                    e.to = keep_v;
                }
            }
            out.vertices.remove(&gone);
            Some((keep_v, gone))
        } else {
            None
        };
        let event = FoldEvent { vertex: pair.vertex, keep: pair.keep, drop: pair.drop, label: pair.label, merged };
        Ok((out, event))
    }

    /// Folds in deterministic order until no pair remains.
    pub fn fold_to_completion(&self) -> (LabeledGraph, FoldTrace) {
        self.fold_with(|g| g.find_foldable_pair())
    }

    /// Folds choosing uniformly among all current pairs.
    pub fn fold_to_completion_random<R: Rng + ?Sized>(&self, rng: &mut R) -> (LabeledGraph, FoldTrace) {
        self.fold_with(|g| g.foldable_pairs().choose(rng).copied())
    }

    fn fold_with(&self, mut pick: impl FnMut(&LabeledGraph) -> Option<FoldPair>) -> (LabeledGraph, FoldTrace) {
        let mut g = self.clone();
        let mut trace = FoldTrace::default();
        while let Some(pair) = pick(&g) {
            let (next, ev) = g.fold_step(&pair).expect("pair taken from the current graph");
            trace.events.push(ev);
            g = next;
        }
        (g, trace)
    }

    /// Folds completely and checks whether the result is the rose of the
    /// graph's rank, with no loss of cycle rank along the way.
    pub fn decompose_to_rose(&self) -> Decomposition {
        let (folded, trace) = self.fold_to_completion();
        let g = self.rank;
        let distinct: BTreeSet<usize> = folded.edges.values().map(|e| e.label.index).collect();
        let is_rose = folded.vertex_count() == 1
            && folded.edge_count() == g
            && distinct.len() == g
            && self.cycle_rank() == g as i64;
        if !is_rose {
            return Decomposition::NotRose { folded, trace };
        }
        let iota = folded.edges.iter().map(|(&id, e)| (id, e.label)).collect();
        Decomposition::Iso { trace, iota }
    }

    pub fn handlebody_summary(&self) -> HandlebodySummary {
        HandlebodySummary {
            three_cells: self.vertex_count(),
            two_cells: self.edge_count(),
            genus: self.cycle_rank(),
        }
    }

    /// Inverse of a fold at `h`: the half-edges `moved` at the far end of
    /// `h` are detached onto a new vertex, joined to the base of `h` by a new
    /// edge carrying the same outgoing label. Folding the new edge against
    /// `h`'s edge restores `self` up to ids.
    pub fn unfold(&self, h: HalfEdge, moved: &[HalfEdge]) -> Result<LabeledGraph, FoldError> {
        if !self.edges.contains_key(&h.edge) {
            return Err(FoldError::StalePair);
        }
        let u = self.base(h);
        let v = self.far(h);
        let ret = HalfEdge { edge: h.edge, end: if h.end == End::Tail { End::Head } else { End::Tail } };
        let allowed: BTreeSet<HalfEdge> =
            self.half_edges_at(v).into_iter().filter(|&x| x != ret && x != h).collect();
        let moved_set: BTreeSet<HalfEdge> = moved.iter().copied().collect();
        if moved_set.is_empty() || moved_set.len() >= allowed.len() || !moved_set.is_subset(&allowed) {
            return Err(FoldError::StalePair);
        }
        let v2 = VertexId(self.vertices.iter().next_back().map_or(0, |x| x.0 + 1));
        let new_edge = EdgeId(self.edges.keys().next_back().map_or(0, |x| x.0 + 1));
        let mut out = self.clone();
        out.vertices.insert(v2);
        for m in &moved_set {
            let e = out.edges.get_mut(&m.edge).expect("present");
            match m.end {
                End::Tail => e.from = v2,
                End::Head => e.to = v2,
            }
        }
        let label = self.outgoing_label(h);
        let (from, to, stored) = match label.sign {
            Sign::Plus => (u, v2, label),
            Sign::Minus => (v2, u, label.inverse()),
        };
        out.edges.insert(new_edge, Edge { from, to, label: stored });
        out.validate()?;
        Ok(out)
    }

    /// One random unfold that leaves every vertex with degree at least two,
    /// or `None` when no half-edge admits such a move.
    pub fn random_unfold<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<LabeledGraph> {
        let mut candidates = Vec::new();
        for hs in self.incidence().into_values() {
            for h in hs {
                let far = self.far(h);
                let ret = HalfEdge { edge: h.edge, end: if h.end == End::Tail { End::Head } else { End::Tail } };
                let others: Vec<HalfEdge> =
                    self.half_edges_at(far).into_iter().filter(|&x| x != ret && x != h).collect();
                if others.len() >= 2 {
                    candidates.push((h, others));
                }
            }
        }
        let (h, others) = candidates.choose(rng)?;
        // Nonempty proper subset: both endpoints keep degree >= 2.
        let mut moved: Vec<HalfEdge>;
        loop {
            moved = others.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
            if !moved.is_empty() && moved.len() < others.len() {
                break;
            }
        }
        self.unfold(*h, &moved).ok()
    }

    /// `steps` random unfolds applied to `rose(g)`.
    pub fn random_blowup<R: Rng + ?Sized>(g: usize, steps: usize, rng: &mut R) -> Result<LabeledGraph, FoldError> {
        let mut graph = Self::rose(g)?;
        for _ in 0..steps {
            match graph.random_unfold(rng) {
                Some(next) => graph = next,
                None => break,
            }
        }
        Ok(graph)
    }

    /// Label-isomorphism invariant: the lexicographically least edge list
    /// over vertex relabelings, with every edge oriented so its sign is `+`.
    pub fn canonical_form(&self) -> CanonicalForm {
        let verts: Vec<VertexId> = self.vertices.iter().copied().collect();
        let pos: BTreeMap<VertexId, usize> = verts.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let n = verts.len();
        let mut adj: Vec<Vec<(Letter, usize)>> = vec![Vec::new(); n];
        let mut norm_edges = Vec::with_capacity(self.edges.len());
        for e in self.edges.values() {
            let (a, b) = (pos[&e.from], pos[&e.to]);
            adj[a].push((e.label, b));
            adj[b].push((e.label.inverse(), a));
            let (s, t) = if e.label.sign == Sign::Plus { (a, b) } else { (b, a) };
            norm_edges.push((s, t, e.label.index));
        }
        let initial = refine(&adj, vec![0; n]);
        let mut best: Option<Vec<(u32, u32, usize)>> = None;
        search(&adj, &norm_edges, initial, &mut best);
        CanonicalForm { rank: self.rank, vertex_count: n, edges: best.unwrap_or_default() }
    }

    pub fn to_doc(&self) -> GraphDoc {
        GraphDoc {
            rank: self.rank,
            vertices: self.vertices.iter().map(|v| v.0).collect(),
            edges: self
                .edges
                .values()
                .map(|e| EdgeDoc { from: e.from.0, to: e.to.0, gen: e.label.index, sign: e.label.sign.as_int() })
                .collect(),
        }
    }

    /// Edge ids are positions in the document's edge list.
    pub fn from_doc(doc: &GraphDoc) -> Result<Self, FoldError> {
        let mut edges = Vec::with_capacity(doc.edges.len());
        for (i, e) in doc.edges.iter().enumerate() {
            let id = EdgeId(i as u32);
            let sign = Sign::from_int(e.sign).ok_or(FoldError::InvalidLabel { edge: id, index: e.gen, rank: doc.rank })?;
            edges.push((id, Edge { from: VertexId(e.from), to: VertexId(e.to), label: Letter::new(e.gen, sign) }));
        }
        Self::new(doc.rank, doc.vertices.iter().map(|&v| VertexId(v)), edges)
    }
}

/// Canonical encoding used to compare graphs up to label isomorphism.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CanonicalForm {
    pub rank: usize,
    pub vertex_count: usize,
    pub edges: Vec<(u32, u32, usize)>,
}

// Colour refinement to a stable partition. Colours are ranks of
// signatures, so they never depend on the input vertex order.
fn refine(adj: &[Vec<(Letter, usize)>], mut colour: Vec<u32>) -> Vec<u32> {
    loop {
        let sigs: Vec<(u32, Vec<(Letter, u32)>)> = (0..adj.len())
            .map(|v| {
                let mut nb: Vec<(Letter, u32)> = adj[v].iter().map(|&(l, w)| (l, colour[w])).collect();
                nb.sort();
                (colour[v], nb)
            })
            .collect();
        let distinct: BTreeSet<&(u32, Vec<(Letter, u32)>)> = sigs.iter().collect();
        let rank: BTreeMap<&(u32, Vec<(Letter, u32)>), u32> =
            distinct.iter().enumerate().map(|(i, s)| (*s, i as u32)).collect();
        let next: Vec<u32> = sigs.iter().map(|s| rank[s]).collect();
        let before = colour.iter().collect::<BTreeSet<_>>().len();
        let after = distinct.len();
        colour = next;
        if after == before {
            return colour;
        }
    }
}

fn search(
    adj: &[Vec<(Letter, usize)>],
    edges: &[(usize, usize, usize)],
    colour: Vec<u32>,
    best: &mut Option<Vec<(u32, u32, usize)>>,
) {
    let n = colour.len();
    let mut cells: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (v, &c) in colour.iter().enumerate() {
        cells.entry(c).or_default().push(v);
    }
    match cells.iter().find(|(_, vs)| vs.len() > 1) {
        None => {
            let mut enc: Vec<(u32, u32, usize)> =
                edges.iter().map(|&(a, b, i)| (colour[a], colour[b], i)).collect();
            enc.sort();
            if best.as_ref().is_none_or(|b| enc < *b) {
                *best = Some(enc);
            }
        }
        Some((_, cell)) => {
            for &v in cell {
                // Split v off its cell; doubling keeps other cells ordered.
                let indiv: Vec<u32> = (0..n)
                    .map(|w| 2 * colour[w] + u32::from(colour[w] == colour[v] && w != v))
                    .collect();
                search(adj, edges, refine(adj, indiv), best);
            }
        }
    }
}

/// Serialized graph: `{"rank", "vertices", "edges": [{"from","to","gen","sign"}]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphDoc {
    pub rank: usize,
    pub vertices: Vec<u32>,
    pub edges: Vec<EdgeDoc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeDoc {
    pub from: u32,
    pub to: u32,
    pub gen: usize,
    pub sign: i64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest, ProptestConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn edge(from: u32, to: u32, label: Letter) -> Edge {
        Edge { from: VertexId(from), to: VertexId(to), label }
    }

    fn graph(rank: usize, nv: u32, es: &[(u32, u32, Letter)]) -> LabeledGraph {
        LabeledGraph::new(
            rank,
            (0..nv).map(VertexId),
            es.iter().enumerate().map(|(i, &(a, b, l))| (EdgeId(i as u32), edge(a, b, l))),
        )
        .unwrap()
    }

    #[test]
    fn rose_shapes() {
        let r1 = LabeledGraph::rose(1).unwrap();
        assert_eq!((r1.vertex_count(), r1.edge_count()), (1, 1));
        let r3 = LabeledGraph::rose(3).unwrap();
        assert_eq!((r3.vertex_count(), r3.edge_count(), r3.cycle_rank()), (1, 3, 3));
        assert_eq!(LabeledGraph::rose(0), Err(FoldError::InvalidRank(0)));
    }

    #[test]
    fn construction_errors() {
        let e = LabeledGraph::new(1, [VertexId(0), VertexId(1)], []);
        assert_eq!(e, Err(FoldError::NotConnected));
        let e = LabeledGraph::new(1, [VertexId(0)], [(EdgeId(0), edge(0, 1, Letter::pos(1)))]);
        assert!(matches!(e, Err(FoldError::UnknownVertex { .. })));
        let e = LabeledGraph::new(1, [VertexId(0)], [(EdgeId(0), edge(0, 0, Letter::pos(2)))]);
        assert!(matches!(e, Err(FoldError::InvalidLabel { .. })));
    }

    #[test]
    fn foldable_pair_examples() {
        assert_eq!(LabeledGraph::rose(3).unwrap().find_foldable_pair(), None);
        let g1 = Letter::pos(1);
        let par = graph(1, 2, &[(0, 1, g1), (0, 1, g1)]);
        let p = par.find_foldable_pair().unwrap();
        assert_eq!((p.vertex, p.keep, p.drop), (VertexId(0), EdgeId(0), EdgeId(1)));
        // Incoming and outgoing g1 at vertex 1 read as g1- and g1+.
        let path = graph(1, 3, &[(0, 1, g1), (1, 2, g1)]);
        assert_eq!(path.find_foldable_pair(), None);
    }

    #[test]
    fn fold_step_examples() {
        let g1 = Letter::pos(1);
        let par = graph(1, 2, &[(0, 1, g1), (0, 1, g1)]);
        let (out, ev) = par.fold_step(&par.find_foldable_pair().unwrap()).unwrap();
        assert_eq!((out.vertex_count(), out.edge_count()), (2, 1));
        assert_eq!(ev.merged, None);

        let fork = graph(1, 3, &[(0, 1, g1), (0, 2, g1)]);
        let (out, ev) = fork.fold_step(&fork.find_foldable_pair().unwrap()).unwrap();
        assert_eq!((out.vertex_count(), out.edge_count()), (2, 1));
        assert_eq!(out.cycle_rank(), fork.cycle_rank());
        assert_eq!(ev.merged, Some((VertexId(1), VertexId(2))));
        assert_eq!(ev.to_string(), "FOLD v=0 keep=0 drop=1 label=g1+");

        let rose = LabeledGraph::rose(2).unwrap();
        let bogus = FoldPair { vertex: VertexId(0), label: g1, keep: EdgeId(0), drop: EdgeId(1) };
        assert_eq!(rose.fold_step(&bogus), Err(FoldError::StalePair));
    }

    #[test]
    fn rose_is_already_folded() {
        let r = LabeledGraph::rose(2).unwrap();
        let (out, trace) = r.fold_to_completion();
        assert_eq!(out, r);
        assert!(trace.is_empty());
        assert!(matches!(LabeledGraph::rose(3).unwrap().decompose_to_rose(), Decomposition::Iso { trace, .. } if trace.is_empty()));
    }

    #[test]
    fn blowup_with_ten_edges_folds_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = LabeledGraph::random_blowup(2, 8, &mut rng).unwrap();
        assert_eq!(g.edge_count(), 10);
        let (out, trace) = g.fold_to_completion();
        assert!(out.is_folded());
        assert_eq!(trace.len(), g.edge_count() - out.edge_count());
        assert_eq!(out.cycle_rank(), 2);
        assert!(matches!(g.decompose_to_rose(), Decomposition::Iso { trace, .. } if trace.len() == 8));
    }

    #[test]
    fn extra_loop_is_not_rose() {
        let (g1, g2) = (Letter::pos(1), Letter::pos(2));
        let g = graph(2, 1, &[(0, 0, g1), (0, 0, g2), (0, 0, g1)]);
        match g.decompose_to_rose() {
            Decomposition::NotRose { folded, trace } => {
                assert_eq!(trace.len(), 1);
                assert_eq!(folded.edge_count(), 2);
            }
            other => panic!("expected NotRose, got {other:?}"),
        }
    }

    #[test]
    fn handlebody_examples() {
        let s = LabeledGraph::rose(4).unwrap().handlebody_summary();
        assert_eq!((s.three_cells, s.two_cells, s.genus), (1, 4, 4));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = LabeledGraph::random_blowup(3, 6, &mut rng).unwrap();
        let s = g.handlebody_summary();
        assert_eq!((s.three_cells, s.two_cells, s.genus), (7, 9, 3));
        let point = LabeledGraph::new(1, [VertexId(5)], []).unwrap();
        assert_eq!(point.handlebody_summary().genus, 0);
    }

    #[test]
    fn canonical_form_ignores_ids_and_orientation() {
        let (g1, g2) = (Letter::pos(1), Letter::pos(2));
        let a = graph(2, 2, &[(0, 1, g1), (1, 0, g2), (1, 1, g1)]);
        let b = LabeledGraph::new(
            2,
            [VertexId(9), VertexId(4)],
            [
                (EdgeId(3), edge(4, 9, g1.inverse())),
                (EdgeId(1), edge(4, 9, g1)),
                (EdgeId(0), edge(9, 9, g1)),
            ],
        )
        .unwrap();
        assert_ne!(a.canonical_form(), b.canonical_form());
        let b2 = LabeledGraph::new(
            2,
            [VertexId(9), VertexId(4)],
            [
                (EdgeId(3), edge(9, 4, g1.inverse())),
                (EdgeId(1), edge(9, 4, g2)),
                (EdgeId(0), edge(9, 9, g1.inverse())),
            ],
        )
        .unwrap();
        assert_eq!(a.canonical_form(), b2.canonical_form());
    }

    #[test]
    fn doc_round_trip() {
        let g = LabeledGraph::random_blowup(2, 4, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let json = serde_json::to_string(&g.to_doc()).unwrap();
        let back = LabeledGraph::from_doc(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back.canonical_form(), g.canonical_form());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn folds_drop_one_edge_and_keep_rank(seed in any::<u64>(), g in 2usize..5, k in 0usize..15) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut graph = LabeledGraph::random_blowup(g, k, &mut rng).unwrap();
            while let Some(p) = graph.find_foldable_pair() {
                let (next, _) = graph.fold_step(&p).unwrap();
                prop_assert_eq!(next.edge_count() + 1, graph.edge_count());
                prop_assert_eq!(next.cycle_rank(), g as i64);
                graph = next;
            }
            prop_assert_eq!(graph.handlebody_summary().genus, graph.cycle_rank());
        }

        #[test]
        fn folding_is_confluent(seed in any::<u64>(), g in 2usize..5, k in 0usize..15) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let graph = LabeledGraph::random_blowup(g, k, &mut rng).unwrap();
            let (det, _) = graph.fold_to_completion();
            let (rnd, _) = graph.fold_to_completion_random(&mut rng);
            prop_assert_eq!(det.canonical_form(), rnd.canonical_form());
            let is_iso = matches!(graph.decompose_to_rose(), Decomposition::Iso { .. });
            prop_assert!(is_iso);
        }

        #[test]
        fn canonical_form_is_relabel_invariant(seed in any::<u64>(), g in 2usize..4, k in 0usize..10, shift in 1u32..50) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let graph = LabeledGraph::random_blowup(g, k, &mut rng).unwrap();
            let mut perm: Vec<u32> = graph.vertices().map(|v| v.0).collect();
            perm.shuffle(&mut rng);
            let map: BTreeMap<VertexId, VertexId> = graph
                .vertices()
                .zip(perm.iter())
                .map(|(v, &p)| (v, VertexId(p * 3 + shift)))
                .collect();
            let relabeled = LabeledGraph::new(
                g,
                map.values().copied(),
                graph.edges().map(|(id, e)| {
                    let flip = rng.gen_bool(0.5);
                    let (a, b) = (map[&e.from], map[&e.to]);
                    let e2 = if flip { Edge { from: b, to: a, label: e.label.inverse() } } else { Edge { from: a, to: b, label: e.label } };
                    (EdgeId(id.0 + 100), e2)
                }),
            ).unwrap();
            prop_assert_eq!(graph.canonical_form(), relabeled.canonical_form());
        }
    }
}
