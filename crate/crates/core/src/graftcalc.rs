//! Combinatorial grafting on holed spheres.
//!
//! A chart records, for each end of a planar piece, the degree with which
//! the piece covers the corresponding end of its support. Grafting along an
//! arc raises the degree at both of its ends by one. A presentation glues
//! such pieces along meridians and carries a multiloop whose arcs inside
//! each piece account for every degree above one.
//!
//! Meridian `k` of a presentation is `gluing[k] = [side0, side1]`; the
//! marking graph has one vertex per piece and edge `k` running from the
//! piece of side 0 to the piece of side 1. Crossing meridian `k` from side 0
//! to side 1 reads the label of edge `k`, the other way its inverse.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::foldgraph::{Decomposition, EdgeId, FoldError, GraphDoc, LabeledGraph, VertexId};
use crate::moebius::MapClass;
use crate::multiarc::ChordDiagram;
use crate::planarity::is_planar;
use crate::schottky::{SchottkyDoc, SchottkyError, SchottkyGroup};
use crate::word::{GroupWord, Letter, WordParseError};

/// Classification tolerance for the numeric admissibility cross-check.
pub const ADMISSIBLE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraftError {
    #[error("chart {0} needs at least two ends")]
    TooFewEnds(String),
    #[error("chart {chart} has end {end} with degree 0")]
    ZeroDegree { chart: String, end: String },
    #[error("chart {chart} lists end {end} twice")]
    DuplicateEnd { chart: String, end: String },
    #[error("basic chart {0} has an end of degree above 1")]
    BasicDegree(String),
    #[error("invalid piece id {0:?}")]
    InvalidId(String),
    #[error("piece {0} has punctures and cannot be glued")]
    PuncturedPiece(String),
    #[error("SameBoundary: {0}")]
    SameBoundary(String),
    #[error("unknown boundary {0}")]
    UnknownBoundary(String),
    #[error("unknown piece {0}")]
    UnknownPiece(String),
    #[error("chart {0} is not basic")]
    NotBasic(String),
    #[error("diagram has {edges} edges but chart has {ends} ends")]
    EdgeCountMismatch { edges: usize, ends: usize },
    #[error("RHViolation: {0}")]
    RHViolation(String),
    #[error("boundary {0} is not glued")]
    UnpairedBoundary(String),
    #[error("boundary {0} is glued more than once")]
    DuplicateGluing(String),
    #[error("MarkingMismatch: {0}")]
    MarkingMismatch(String),
    #[error("RankMismatch: genus {genus}, group rank {group}, marking rank {marking}")]
    RankMismatch { genus: usize, group: usize, marking: usize },
    #[error("EulerMismatch: expected {expected}, pieces give {found}")]
    EulerMismatch { expected: i64, found: i64 },
    #[error("CarrierBroken: loop {loop_index} at arc {position}")]
    CarrierBroken { loop_index: usize, position: usize },
    #[error("WordMismatch: loop {loop_index} declares {declared}, carrier reads {computed}")]
    WordMismatch { loop_index: usize, declared: GroupWord, computed: GroupWord },
    #[error("CarrierOverlap: arcs in piece {0} cannot be disjoint")]
    CarrierOverlap(String),
    #[error("EndpointMismatch: meridian {meridian} has endpoint counts ({}, {}) and degrees ({}, {})", counts.0, counts.1, degrees.0, degrees.1)]
    EndpointMismatch { meridian: usize, counts: (usize, usize), degrees: (u32, u32) },
    #[error("InvalidSlot: boundary {boundary} slot {slot}")]
    InvalidSlot { boundary: String, slot: usize },
    #[error("NotAdmissible: loop {loop_index} with word {word}")]
    NotAdmissible { loop_index: usize, word: GroupWord },
    #[error("InadmissibleLoopFormed: loop {loop_index} with word {word}")]
    InadmissibleLoopFormed { loop_index: usize, word: GroupWord },
    #[error("MarkingNotRose: folded marking is not the rose (cycle rank {rank})")]
    MarkingNotRose { rank: i64 },
    #[error("invalid word: {0}")]
    Word(#[from] WordParseError),
    #[error(transparent)]
    Graph(#[from] FoldError),
    #[error(transparent)]
    Group(#[from] SchottkyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quality {
    Basic,
    Good,
    AlmostGood,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EndKind {
    Boundary,
    Puncture,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ChartEnd {
    pub id: String,
    pub kind: EndKind,
    pub degree: u32,
}

/// A genus-zero piece with the covering degree at each of its ends.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HoledSphereChart {
    id: String,
    ends: Vec<ChartEnd>,
    quality: Quality,
}

impl HoledSphereChart {
    pub fn new(id: impl Into<String>, ends: Vec<ChartEnd>, quality: Quality) -> Result<Self, GraftError> {
        let id = id.into();
        if id.is_empty() || id.contains('.') {
            return Err(GraftError::InvalidId(id));
        }
        if ends.len() < 2 {
            return Err(GraftError::TooFewEnds(id));
        }
        let mut seen = BTreeSet::new();
        for e in &ends {
            if e.degree == 0 {
                return Err(GraftError::ZeroDegree { chart: id, end: e.id.clone() });
            }
            if !seen.insert(e.id.as_str()) {
                return Err(GraftError::DuplicateEnd { chart: id, end: e.id.clone() });
            }
        }
        if quality == Quality::Basic && ends.iter().any(|e| e.degree != 1) {
            return Err(GraftError::BasicDegree(id));
        }
        Ok(HoledSphereChart { id, ends, quality })
    }

    /// Basic chart whose ends are the named boundaries.
    pub fn basic<S: AsRef<str>>(id: impl Into<String>, boundaries: &[S]) -> Result<Self, GraftError> {
        let ends = boundaries
            .iter()
            .map(|b| ChartEnd { id: b.as_ref().to_string(), kind: EndKind::Boundary, degree: 1 })
            .collect();
        Self::new(id, ends, Quality::Basic)
    }

    /// Basic chart with boundaries `b1..bn`.
    pub fn basic_holed(id: impl Into<String>, n: usize) -> Result<Self, GraftError> {
        let names: Vec<String> = (1..=n).map(|i| format!("b{i}")).collect();
        Self::basic(id, &names)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn ends(&self) -> &[ChartEnd] {
        &self.ends
    }

    pub fn quality(&self) -> Quality {
        self.quality
    }

    pub fn degrees(&self) -> Vec<u32> {
        self.ends.iter().map(|e| e.degree).collect()
    }

    pub fn end_index(&self, end: &str) -> Option<usize> {
        self.ends.iter().position(|e| e.id == end)
    }

    pub fn degree_of(&self, end: &str) -> Option<u32> {
        self.end_index(end).map(|i| self.ends[i].degree)
    }

    /// `2 - n` for a sphere with `n` ends.
    pub fn euler_characteristic(&self) -> i64 {
        2 - self.ends.len() as i64
    }

    /// Raises the degree of both ends by one; a basic chart becomes good.
    pub fn graft_arc(&self, a: &str, b: &str) -> Result<Self, GraftError> {
        if a == b {
            return Err(GraftError::SameBoundary(format!("{}.{a}", self.id)));
        }
        let ia = self.end_index(a).ok_or_else(|| GraftError::UnknownBoundary(format!("{}.{a}", self.id)))?;
        let ib = self.end_index(b).ok_or_else(|| GraftError::UnknownBoundary(format!("{}.{b}", self.id)))?;
        let mut out = self.clone();
        out.ends[ia].degree += 1;
        out.ends[ib].degree += 1;
        if out.quality == Quality::Basic {
            out.quality = Quality::Good;
        }
        Ok(out)
    }

    /// Grafts a basic chart along every chord; diagram edge `i` is end `i`.
    pub fn graft_multiarc(&self, d: &ChordDiagram) -> Result<Self, GraftError> {
        if self.quality != Quality::Basic {
            return Err(GraftError::NotBasic(self.id.clone()));
        }
        if d.degrees.len() != self.ends.len() {
            return Err(GraftError::EdgeCountMismatch { edges: d.degrees.len(), ends: self.ends.len() });
        }
        d.chords.iter().try_fold(self.clone(), |chart, (p, q)| {
            let (a, b) = (&self.ends[p.edge].id, &self.ends[q.edge].id);
            chart.graft_arc(a, b)
        })
    }

    /// Degree forced by Riemann-Hurwitz: `1 + Σ(d_i - 1) / 2`.
    pub fn cover_degree(&self) -> Result<u32, GraftError> {
        let excess: u32 = self.ends.iter().map(|e| e.degree - 1).sum();
        if !excess.is_multiple_of(2) {
            return Err(GraftError::RHViolation(format!("{}: odd ramification total {excess}", self.id)));
        }
        Ok(1 + excess / 2)
    }
}

/// `2(d - 1) = Σ(d_i - 1)` and no end exceeds the total degree.
pub fn riemann_hurwitz_check(d: u32, degrees: &[u32]) -> bool {
    if d == 0 || degrees.contains(&0) {
        return false;
    }
    let excess: u64 = degrees.iter().map(|&x| u64::from(x) - 1).sum();
    2 * (u64::from(d) - 1) == excess && degrees.iter().all(|&x| x <= d)
}

/// Boundary `boundary` of piece `piece`, written `piece.boundary`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BoundaryRef {
    pub piece: String,
    pub boundary: String,
}

impl BoundaryRef {
    pub fn new(piece: impl Into<String>, boundary: impl Into<String>) -> Self {
        BoundaryRef { piece: piece.into(), boundary: boundary.into() }
    }
}

impl fmt::Display for BoundaryRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.piece, self.boundary)
    }
}

impl FromStr for BoundaryRef {
    type Err = GraftError;

    /// Splits at the first `.`; piece ids never contain one.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once('.') {
            Some((p, b)) if !p.is_empty() && !b.is_empty() => Ok(BoundaryRef::new(p, b)),
            _ => Err(GraftError::UnknownBoundary(s.to_string())),
        }
    }
}

/// The part of a loop inside one piece, entering and leaving through two
/// distinct boundaries.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CarrierArc {
    pub piece: String,
    pub enter: String,
    pub exit: String,
}

impl CarrierArc {
    pub fn new(piece: impl Into<String>, enter: impl Into<String>, exit: impl Into<String>) -> Self {
        CarrierArc { piece: piece.into(), enter: enter.into(), exit: exit.into() }
    }
}

/// A loop given by its cyclic carrier; `word` is read from the meridian
/// crossings after each arc in turn.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AdmissibleLoop {
    pub word: GroupWord,
    pub carrier: Vec<CarrierArc>,
}

/// Unchecked ingredients of a presentation, as read from a document.
#[derive(Debug, Clone, PartialEq)]
pub struct PresentationParts {
    pub genus: usize,
    pub group: SchottkyGroup,
    pub marking: LabeledGraph,
    pub pieces: Vec<HoledSphereChart>,
    pub gluing: Vec<[BoundaryRef; 2]>,
    pub loops: Vec<AdmissibleLoop>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    Skip,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub status: CheckStatus,
    pub detail: String,
    pub error: Option<GraftError>,
}

/// Outcome of every invariant check on a presentation, in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status == CheckStatus::Pass)
    }

    pub fn first_failure(&self) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.status == CheckStatus::Fail)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let tag = match c.status {
                CheckStatus::Pass => "PASS",
                CheckStatus::Fail => "FAIL",
                CheckStatus::Skip => "SKIP",
            };
            writeln!(f, "{tag} {} {}", c.name, c.detail)?;
        }
        Ok(())
    }
}

// Checks enforced by `GraftingPresentation::new`; the rest are reported.
const ENFORCED: &[&str] = &["pairing", "marking", "rank", "euler", "carriers", "disjoint", "endpoints", "riemann-hurwitz"];

// Lookup tables derived from a valid gluing.
struct Index {
    piece: BTreeMap<String, usize>,
    // (piece index, boundary id) -> (meridian, side)
    side: BTreeMap<(usize, String), (usize, usize)>,
}

impl PresentationParts {
    fn index(&self) -> Result<Index, GraftError> {
        let mut piece = BTreeMap::new();
        for (i, p) in self.pieces.iter().enumerate() {
            if piece.insert(p.id.clone(), i).is_some() {
                return Err(GraftError::InvalidId(p.id.clone()));
            }
            if p.ends.iter().any(|e| e.kind == EndKind::Puncture) {
                return Err(GraftError::PuncturedPiece(p.id.clone()));
            }
        }
        let mut side = BTreeMap::new();
        for (k, pair) in self.gluing.iter().enumerate() {
            if pair[0] == pair[1] {
                return Err(GraftError::SameBoundary(pair[0].to_string()));
            }
            for (s, r) in pair.iter().enumerate() {
                let &pi = piece.get(&r.piece).ok_or_else(|| GraftError::UnknownPiece(r.piece.clone()))?;
                if self.pieces[pi].end_index(&r.boundary).is_none() {
                    return Err(GraftError::UnknownBoundary(r.to_string()));
                }
                if side.insert((pi, r.boundary.clone()), (k, s)).is_some() {
                    return Err(GraftError::DuplicateGluing(r.to_string()));
                }
            }
        }
        for (pi, p) in self.pieces.iter().enumerate() {
            for e in &p.ends {
                if !side.contains_key(&(pi, e.id.clone())) {
                    return Err(GraftError::UnpairedBoundary(format!("{}.{}", p.id, e.id)));
                }
            }
        }
        Ok(Index { piece, side })
    }

    fn check_marking(&self, idx: &Index) -> Result<(), GraftError> {
        let m = &self.marking;
        if m.vertex_count() != self.pieces.len() || m.edge_count() != self.gluing.len() {
            return Err(GraftError::MarkingMismatch(format!(
                "marking has {} vertices and {} edges, presentation has {} pieces and {} meridians",
                m.vertex_count(),
                m.edge_count(),
                self.pieces.len(),
                self.gluing.len()
            )));
        }
        for (k, pair) in self.gluing.iter().enumerate() {
            let from = VertexId(idx.piece[&pair[0].piece] as u32);
            let to = VertexId(idx.piece[&pair[1].piece] as u32);
            match m.edge(EdgeId(k as u32)) {
                Some(e) if e.from == from && e.to == to => {}
                _ => {
                    return Err(GraftError::MarkingMismatch(format!(
                        "edge {k} must run from vertex {from} to vertex {to}"
                    )))
                }
            }
        }
        Ok(())
    }

    fn check_rank(&self) -> Result<(), GraftError> {
        let (g, gr, mr) = (self.genus, self.group.rank(), self.marking.rank());
        if g == 0 || gr != g || mr != g {
            return Err(GraftError::RankMismatch { genus: g, group: gr, marking: mr });
        }
        Ok(())
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.pieces.iter().map(|p| p.euler_characteristic()).sum()
    }

    fn check_euler(&self) -> Result<i64, GraftError> {
        let expected = 2 - 2 * self.genus as i64;
        let found = self.euler_characteristic();
        if expected != found {
            return Err(GraftError::EulerMismatch { expected, found });
        }
        Ok(found)
    }

    fn label(&self, meridian: usize, side: usize) -> Letter {
        let l = self.marking.edge(EdgeId(meridian as u32)).expect("marking checked").label;
        if side == 0 {
            l
        } else {
            l.inverse()
        }
    }

    // Word read along a carrier; `loop_index` only labels errors.
    fn carrier_word(&self, idx: &Index, loop_index: usize, carrier: &[CarrierArc]) -> Result<GroupWord, GraftError> {
        if carrier.is_empty() {
            return Err(GraftError::CarrierBroken { loop_index, position: 0 });
        }
        let mut letters = Vec::with_capacity(carrier.len());
        for (i, arc) in carrier.iter().enumerate() {
            let &pi = idx.piece.get(&arc.piece).ok_or_else(|| GraftError::UnknownPiece(arc.piece.clone()))?;
            let piece = &self.pieces[pi];
            for b in [&arc.enter, &arc.exit] {
                if piece.end_index(b).is_none() {
                    return Err(GraftError::UnknownBoundary(format!("{}.{b}", arc.piece)));
                }
            }
            if arc.enter == arc.exit {
                return Err(GraftError::SameBoundary(format!("{}.{}", arc.piece, arc.exit)));
            }
            let (k, s) = idx.side[&(pi, arc.exit.clone())];
            let partner = &self.gluing[k][1 - s];
            let next = &carrier[(i + 1) % carrier.len()];
            if partner.piece != next.piece || partner.boundary != next.enter {
                return Err(GraftError::CarrierBroken { loop_index, position: i });
            }
            letters.push(self.label(k, s));
        }
        Ok(GroupWord::from_letters(letters))
    }

    // Each piece's arcs, as edges between its end indices, must embed
    // disjointly in the holed sphere.
    fn check_disjoint(&self, idx: &Index, loops: &[AdmissibleLoop]) -> Result<usize, GraftError> {
        let mut per_piece: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
        let mut arcs = 0;
        for l in loops {
            for arc in &l.carrier {
                let pi = idx.piece[&arc.piece];
                let p = &self.pieces[pi];
                let a = p.end_index(&arc.enter).expect("carrier checked");
                let b = p.end_index(&arc.exit).expect("carrier checked");
                per_piece.entry(pi).or_default().push((a, b));
                arcs += 1;
            }
        }
        for (pi, edges) in per_piece {
            if !is_planar(&edges) {
                return Err(GraftError::CarrierOverlap(self.pieces[pi].id.clone()));
            }
        }
        Ok(arcs)
    }

    // Arc endpoints on each glued boundary.
    fn endpoint_counts(&self, idx: &Index) -> BTreeMap<(usize, String), usize> {
        let mut counts = BTreeMap::new();
        for l in &self.loops {
            for arc in &l.carrier {
                let pi = idx.piece[&arc.piece];
                for b in [&arc.enter, &arc.exit] {
                    *counts.entry((pi, b.clone())).or_insert(0) += 1;
                }
            }
        }
        counts
    }

    fn check_endpoints(&self, idx: &Index) -> Result<(), GraftError> {
        let counts = self.endpoint_counts(idx);
        for (k, pair) in self.gluing.iter().enumerate() {
            let mut c = [0usize; 2];
            let mut d = [0u32; 2];
            for s in 0..2 {
                let pi = idx.piece[&pair[s].piece];
                c[s] = counts.get(&(pi, pair[s].boundary.clone())).copied().unwrap_or(0);
                d[s] = self.pieces[pi].degree_of(&pair[s].boundary).expect("pairing checked");
            }
            if c[0] != c[1] || c[0] + 1 != d[0] as usize || c[1] + 1 != d[1] as usize {
                return Err(GraftError::EndpointMismatch { meridian: k, counts: (c[0], c[1]), degrees: (d[0], d[1]) });
            }
        }
        Ok(())
    }

    fn check_rh(&self) -> Result<(), GraftError> {
        for p in &self.pieces {
            let d = p.cover_degree()?;
            if !riemann_hurwitz_check(d, &p.degrees()) {
                return Err(GraftError::RHViolation(format!("{}: degree {d}, ends {:?}", p.id, p.degrees())));
            }
        }
        Ok(())
    }

    /// Reduced word nonempty and its image classified loxodromic.
    pub fn word_is_admissible(&self, word: &GroupWord) -> bool {
        let w = word.reduced();
        if w.is_empty() {
            return false;
        }
        match self.group.evaluate(&w) {
            Ok(m) => matches!(m.classify(ADMISSIBLE_TOL), Ok(MapClass::Loxodromic)),
            Err(_) => false,
        }
    }

    /// Word of the loop's carrier and whether it is admissible.
    pub fn admissible(&self, carrier: &[CarrierArc]) -> Result<(GroupWord, bool), GraftError> {
        let idx = self.index()?;
        self.check_marking(&idx)?;
        let w = self.carrier_word(&idx, self.loops.len(), carrier)?;
        let ok = self.word_is_admissible(&w);
        Ok((w, ok))
    }

    fn check_admissible(&self, idx: &Index) -> Result<(), GraftError> {
        for (i, l) in self.loops.iter().enumerate() {
            let w = self.carrier_word(idx, i, &l.carrier)?;
            if !self.word_is_admissible(&w) {
                return Err(GraftError::NotAdmissible { loop_index: i, word: w });
            }
        }
        Ok(())
    }

    fn check_marking_rose(&self) -> Result<(), GraftError> {
        match self.marking.decompose_to_rose() {
            Decomposition::Iso { .. } => Ok(()),
            Decomposition::NotRose { .. } => Err(GraftError::MarkingNotRose { rank: self.marking.cycle_rank() }),
        }
    }

    /// Runs every check in order. Checks that need the gluing tables are
    /// skipped when the pairing or marking is broken.
    pub fn verify(&self) -> VerifyReport {
        let mut checks = Vec::new();
        let c = &mut checks;
        let idx = self.index();
        let pairing = idx.as_ref().map(|_| format!("pieces={} meridians={}", self.pieces.len(), self.gluing.len()));
        record(c, "pairing", pairing.map_err(Clone::clone));
        let idx = idx.ok();
        let mut marking_ok = false;
        match &idx {
            Some(i) => {
                let r = self.check_marking(i);
                marking_ok = r.is_ok();
                let detail = format!("vertices={} edges={}", self.marking.vertex_count(), self.marking.edge_count());
                record(c, "marking", r.map(|_| detail));
            }
            None => skip(c, &["marking"]),
        }
        record(c, "rank", self.check_rank().map(|_| format!("g={}", self.genus)));
        record(c, "euler", self.check_euler().map(|chi| format!("chi={chi}")));
        let rh = || self.check_rh().map(|_| format!("pieces={}", self.pieces.len()));
        match idx.as_ref().filter(|_| marking_ok) {
            Some(i) => {
                let carriers = self.loops.iter().enumerate().try_for_each(|(n, l)| {
                    let w = self.carrier_word(i, n, &l.carrier)?;
                    if !w.is_conjugate_to(&l.word) {
                        return Err(GraftError::WordMismatch { loop_index: n, declared: l.word.clone(), computed: w });
                    }
                    Ok(())
                });
                let carriers_ok = carriers.is_ok();
                record(c, "carriers", carriers.map(|_| format!("loops={}", self.loops.len())));
                if carriers_ok {
                    record(c, "disjoint", self.check_disjoint(i, &self.loops).map(|n| format!("arcs={n}")));
                    record(c, "endpoints", self.check_endpoints(i).map(|_| format!("meridians={}", self.gluing.len())));
                    record(c, "riemann-hurwitz", rh());
                    record(c, "admissible", self.check_admissible(i).map(|_| format!("loops={}", self.loops.len())));
                } else {
                    skip(c, &["disjoint", "endpoints"]);
                    record(c, "riemann-hurwitz", rh());
                    skip(c, &["admissible"]);
                }
            }
            None => {
                skip(c, &["carriers", "disjoint", "endpoints"]);
                record(c, "riemann-hurwitz", rh());
                skip(c, &["admissible"]);
            }
        }
        record(c, "marking-rose", self.check_marking_rose().map(|_| "iso".to_string()));
        VerifyReport { checks }
    }
}

fn record(checks: &mut Vec<CheckResult>, name: &'static str, r: Result<String, GraftError>) {
    let (status, detail, error) = match r {
        Ok(d) => (CheckStatus::Pass, d, None),
        Err(e) => (CheckStatus::Fail, e.to_string(), Some(e)),
    };
    checks.push(CheckResult { name, status, detail, error });
}

fn skip(checks: &mut Vec<CheckResult>, names: &[&'static str]) {
    for &name in names {
        checks.push(CheckResult { name, status: CheckStatus::Skip, detail: "prerequisite failed".into(), error: None });
    }
}

/// Normal form: pieces glued along meridians plus a multiloop of carriers.
///
/// Construction enforces the structural invariants; the admissibility of
/// every loop and the rose decomposition of the marking are reported by
/// [`GraftingPresentation::verify`].
#[derive(Debug, Clone, PartialEq)]
pub struct GraftingPresentation {
    parts: PresentationParts,
}

/// Arc endpoint on a boundary; slot `k` on one side of a meridian is glued
/// to slot `k` on the other side.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ArcEnd {
    pub boundary: String,
    pub slot: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PieceArc {
    pub piece: String,
    pub a: ArcEnd,
    pub b: ArcEnd,
}

/// Input of [`GraftingPresentation::assemble`]: basic pieces, their gluing
/// and the arcs inside each piece.
#[derive(Debug, Clone, PartialEq)]
pub struct AssemblyInput {
    pub genus: usize,
    pub group: SchottkyGroup,
    pub marking: LabeledGraph,
    pub pieces: Vec<HoledSphereChart>,
    pub gluing: Vec<[BoundaryRef; 2]>,
    pub arcs: Vec<PieceArc>,
}

impl GraftingPresentation {
    pub fn new(parts: PresentationParts) -> Result<Self, GraftError> {
        let report = parts.verify();
        if let Some(c) = report.checks.iter().find(|c| c.status == CheckStatus::Fail && ENFORCED.contains(&c.name)) {
            return Err(c.error.clone().expect("failed checks carry an error"));
        }
        Ok(GraftingPresentation { parts })
    }

    pub fn parts(&self) -> &PresentationParts {
        &self.parts
    }

    pub fn genus(&self) -> usize {
        self.parts.genus
    }

    pub fn group(&self) -> &SchottkyGroup {
        &self.parts.group
    }

    pub fn marking(&self) -> &LabeledGraph {
        &self.parts.marking
    }

    pub fn pieces(&self) -> &[HoledSphereChart] {
        &self.parts.pieces
    }

    pub fn gluing(&self) -> &[[BoundaryRef; 2]] {
        &self.parts.gluing
    }

    pub fn loops(&self) -> &[AdmissibleLoop] {
        &self.parts.loops
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.parts.euler_characteristic()
    }

    pub fn verify(&self) -> VerifyReport {
        self.parts.verify()
    }

    /// Word read along `carrier` and whether it is admissible.
    pub fn admissible(&self, carrier: &[CarrierArc]) -> Result<(GroupWord, bool), GraftError> {
        self.parts.admissible(carrier)
    }

    /// Grafts along a new loop: its arcs must chain, read an admissible
    /// word and fit disjointly beside the existing carriers. Each arc
    /// endpoint raises the degree of its boundary by one.
    pub fn graft_loop(&self, carrier: Vec<CarrierArc>) -> Result<Self, GraftError> {
        let idx = self.parts.index()?;
        let loop_index = self.parts.loops.len();
        let word = self.parts.carrier_word(&idx, loop_index, &carrier)?;
        if !self.parts.word_is_admissible(&word) {
            return Err(GraftError::NotAdmissible { loop_index, word });
        }
        let mut parts = self.parts.clone();
        parts.loops.push(AdmissibleLoop { word, carrier });
        parts.check_disjoint(&idx, &parts.loops)?;
        for arc in &parts.loops[loop_index].carrier {
            let pi = idx.piece[&arc.piece];
            for b in [&arc.enter, &arc.exit] {
                let e = parts.pieces[pi].end_index(b).expect("carrier checked");
                parts.pieces[pi].ends[e].degree += 1;
            }
            if parts.pieces[pi].quality == Quality::Basic {
                parts.pieces[pi].quality = Quality::Good;
            }
        }
        Self::new(parts)
    }

    /// Chains the arcs of each piece across the meridians into loops.
    ///
    /// Loops are traced starting from the first unused arc in (piece, arc)
    /// order, leaving it through its `b` end. Every formed loop must be
    /// admissible.
    pub fn assemble(input: AssemblyInput) -> Result<Self, GraftError> {
        let AssemblyInput { genus, group, marking, pieces, gluing, arcs } = input;
        if let Some(p) = pieces.iter().find(|p| p.quality != Quality::Basic) {
            return Err(GraftError::NotBasic(p.id.clone()));
        }
        let mut parts = PresentationParts { genus, group, marking, pieces, gluing, loops: Vec::new() };
        let idx = parts.index()?;
        parts.check_marking(&idx)?;

        // Arcs in (piece, input order).
        let mut order: Vec<usize> = (0..arcs.len()).collect();
        let piece_of = |a: &PieceArc| idx.piece.get(&a.piece).copied();
        for a in &arcs {
            let pi = piece_of(a).ok_or_else(|| GraftError::UnknownPiece(a.piece.clone()))?;
            for end in [&a.a, &a.b] {
                if parts.pieces[pi].end_index(&end.boundary).is_none() {
                    return Err(GraftError::UnknownBoundary(format!("{}.{}", a.piece, end.boundary)));
                }
            }
            if a.a.boundary == a.b.boundary {
                return Err(GraftError::SameBoundary(format!("{}.{}", a.piece, a.a.boundary)));
            }
        }
        order.sort_by_key(|&i| piece_of(&arcs[i]));

        // (piece, boundary, slot) -> (arc, end) with end 0 = a, 1 = b.
        let mut at: BTreeMap<(usize, String, usize), (usize, usize)> = BTreeMap::new();
        let mut slots: BTreeMap<(usize, String), Vec<usize>> = BTreeMap::new();
        for (i, a) in arcs.iter().enumerate() {
            let pi = piece_of(a).expect("checked");
            for (e, end) in [&a.a, &a.b].into_iter().enumerate() {
                let key = (pi, end.boundary.clone(), end.slot);
                if at.insert(key, (i, e)).is_some() {
                    return Err(GraftError::InvalidSlot { boundary: format!("{}.{}", a.piece, end.boundary), slot: end.slot });
                }
                slots.entry((pi, end.boundary.clone())).or_default().push(end.slot);
            }
        }
        for (k, pair) in parts.gluing.iter().enumerate() {
            let count = |r: &BoundaryRef| slots.get(&(idx.piece[&r.piece], r.boundary.clone())).map_or(0, Vec::len);
            let (c0, c1) = (count(&pair[0]), count(&pair[1]));
            if c0 != c1 {
                return Err(GraftError::EndpointMismatch { meridian: k, counts: (c0, c1), degrees: (1, 1) });
            }
        }
        for ((pi, b), s) in &slots {
            let mut sorted = s.clone();
            sorted.sort_unstable();
            if let Some((_, &bad)) = sorted.iter().enumerate().find(|(i, &v)| *i != v) {
                return Err(GraftError::InvalidSlot { boundary: format!("{}.{b}", parts.pieces[*pi].id), slot: bad });
            }
        }

        let mut used = vec![false; arcs.len()];
        let mut loops = Vec::new();
        for &start in &order {
            if used[start] {
                continue;
            }
            let mut carrier = Vec::new();
            let (mut cur, mut enter_end) = (start, 0usize);
            loop {
                used[cur] = true;
                let arc = &arcs[cur];
                let (enter, exit) = if enter_end == 0 { (&arc.a, &arc.b) } else { (&arc.b, &arc.a) };
                carrier.push(CarrierArc::new(arc.piece.clone(), enter.boundary.clone(), exit.boundary.clone()));
                let pi = idx.piece[&arc.piece];
                let (k, s) = idx.side[&(pi, exit.boundary.clone())];
                let partner = &parts.gluing[k][1 - s];
                let key = (idx.piece[&partner.piece], partner.boundary.clone(), exit.slot);
                let &(next, next_end) = at.get(&key).expect("slot counts match across meridians");
                if next == start && next_end == 0 {
                    break;
                }
                cur = next;
                enter_end = next_end;
            }
            let n = loops.len();
            let word = parts.carrier_word(&idx, n, &carrier)?;
            if !parts.word_is_admissible(&word) {
                return Err(GraftError::InadmissibleLoopFormed { loop_index: n, word });
            }
            loops.push(AdmissibleLoop { word, carrier });
        }

        let counts = {
            parts.loops = loops;
            parts.endpoint_counts(&idx)
        };
        for (pi, p) in parts.pieces.iter_mut().enumerate() {
            let mut touched = false;
            for e in &mut p.ends {
                let c = counts.get(&(pi, e.id.clone())).copied().unwrap_or(0);
                e.degree = 1 + c as u32;
                touched |= c > 0;
            }
            if touched {
                p.quality = Quality::Good;
            }
        }
        Self::new(parts)
    }

    /// Inverse of [`assemble`](Self::assemble): basic pieces plus the arcs of
    /// every loop, slots numbered by crossing order along the loops.
    pub fn split(&self) -> AssemblyInput {
        let p = &self.parts;
        let idx = p.index().expect("valid presentation");
        let mut next_slot: BTreeMap<usize, usize> = BTreeMap::new();
        // Per loop, the slot of the crossing after arc i.
        let mut crossing_slots: Vec<Vec<usize>> = Vec::new();
        for l in &p.loops {
            let mut v = Vec::with_capacity(l.carrier.len());
            for arc in &l.carrier {
                let (k, _) = idx.side[&(idx.piece[&arc.piece], arc.exit.clone())];
                let slot = next_slot.entry(k).or_insert(0);
                v.push(*slot);
                *slot += 1;
            }
            crossing_slots.push(v);
        }
        let mut per_piece: Vec<Vec<PieceArc>> = vec![Vec::new(); p.pieces.len()];
        for (li, l) in p.loops.iter().enumerate() {
            let n = l.carrier.len();
            for (i, arc) in l.carrier.iter().enumerate() {
                let enter_slot = crossing_slots[li][(i + n - 1) % n];
                let exit_slot = crossing_slots[li][i];
                per_piece[idx.piece[&arc.piece]].push(PieceArc {
                    piece: arc.piece.clone(),
                    a: ArcEnd { boundary: arc.enter.clone(), slot: enter_slot },
                    b: ArcEnd { boundary: arc.exit.clone(), slot: exit_slot },
                });
            }
        }
        let pieces = p
            .pieces
            .iter()
            .map(|c| {
                let ends = c.ends.iter().map(|e| ChartEnd { degree: 1, ..e.clone() }).collect();
                HoledSphereChart { id: c.id.clone(), ends, quality: Quality::Basic }
            })
            .collect();
        AssemblyInput {
            genus: p.genus,
            group: p.group.clone(),
            marking: p.marking.clone(),
            pieces,
            gluing: p.gluing.clone(),
            arcs: per_piece.into_iter().flatten().collect(),
        }
    }

    pub fn to_doc(&self) -> PresentationDoc {
        let p = &self.parts;
        PresentationDoc {
            genus: p.genus,
            group: p.group.to_doc(),
            marking: p.marking.to_doc(),
            pieces: p
                .pieces
                .iter()
                .map(|c| PieceDoc {
                    id: c.id.clone(),
                    boundaries: c.ends.iter().map(|e| EndDoc { id: e.id.clone(), deg: e.degree }).collect(),
                    quality: Some(c.quality),
                })
                .collect(),
            gluing: p.gluing.iter().map(|[a, b]| [a.to_string(), b.to_string()]).collect(),
            loops: p
                .loops
                .iter()
                .map(|l| LoopDoc {
                    word: l.word.to_string(),
                    carrier: l.carrier.iter().map(|a| [a.piece.clone(), a.enter.clone(), a.exit.clone()]).collect(),
                })
                .collect(),
        }
    }
}

/// Arcs of a chord diagram drawn in `chart`: diagram edge `i` is end `i`
/// and the marked point order gives the slot.
pub fn arcs_from_chords(chart: &HoledSphereChart, d: &ChordDiagram) -> Result<Vec<PieceArc>, GraftError> {
    if d.degrees.len() != chart.ends.len() {
        return Err(GraftError::EdgeCountMismatch { edges: d.degrees.len(), ends: chart.ends.len() });
    }
    Ok(d.chords
        .iter()
        .map(|(p, q)| PieceArc {
            piece: chart.id.clone(),
            a: ArcEnd { boundary: chart.ends[p.edge].id.clone(), slot: p.slot },
            b: ArcEnd { boundary: chart.ends[q.edge].id.clone(), slot: q.slot },
        })
        .collect())
}

/// Presentation dual to a labeled graph: vertex `v` becomes piece `p<v>`
/// with one boundary per half-edge (`t<k>` for the tail of edge `k`, `h<k>`
/// for its head), glued along the edges. The marking is the graph itself
/// with vertices and edges renumbered in order.
pub fn presentation_from_graph(graph: &LabeledGraph, group: SchottkyGroup) -> Result<GraftingPresentation, GraftError> {
    let verts: Vec<VertexId> = graph.vertices().collect();
    let vpos: BTreeMap<VertexId, usize> = verts.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut ends: Vec<Vec<String>> = vec![Vec::new(); verts.len()];
    let mut gluing = Vec::new();
    let mut edges = Vec::new();
    for (k, (_, e)) in graph.edges().enumerate() {
        let (a, b) = (vpos[&e.from], vpos[&e.to]);
        ends[a].push(format!("t{k}"));
        ends[b].push(format!("h{k}"));
        gluing.push([BoundaryRef::new(format!("p{a}"), format!("t{k}")), BoundaryRef::new(format!("p{b}"), format!("h{k}"))]);
        edges.push((
            EdgeId(k as u32),
            crate::foldgraph::Edge { from: VertexId(a as u32), to: VertexId(b as u32), label: e.label },
        ));
    }
    let pieces = ends
        .iter()
        .enumerate()
        .map(|(i, names)| HoledSphereChart::basic(format!("p{i}"), names))
        .collect::<Result<Vec<_>, _>>()?;
    let marking = LabeledGraph::new(graph.rank(), (0..verts.len() as u32).map(VertexId), edges)?;
    let genus = graph.rank();
    GraftingPresentation::new(PresentationParts { genus, group, marking, pieces, gluing, loops: Vec::new() })
}

/// Serialized presentation; boundary references are `piece.boundary`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresentationDoc {
    pub genus: usize,
    pub group: SchottkyDoc,
    pub marking: GraphDoc,
    pub pieces: Vec<PieceDoc>,
    pub gluing: Vec<[String; 2]>,
    #[serde(default)]
    pub loops: Vec<LoopDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PieceDoc {
    pub id: String,
    pub boundaries: Vec<EndDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quality: Option<Quality>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndDoc {
    pub id: String,
    pub deg: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopDoc {
    pub word: String,
    pub carrier: Vec<[String; 3]>,
}

impl PresentationDoc {
    /// Builds the unchecked parts; a missing quality is basic when every
    /// degree is 1 and good otherwise.
    pub fn to_parts(&self) -> Result<PresentationParts, GraftError> {
        let group = SchottkyGroup::from_doc(&self.group)?;
        let marking = LabeledGraph::from_doc(&self.marking)?;
        let pieces = self
            .pieces
            .iter()
            .map(|p| {
                let ends: Vec<ChartEnd> = p
                    .boundaries
                    .iter()
                    .map(|e| ChartEnd { id: e.id.clone(), kind: EndKind::Boundary, degree: e.deg })
                    .collect();
                let quality = p.quality.unwrap_or(if ends.iter().all(|e| e.degree == 1) {
                    Quality::Basic
                } else {
                    Quality::Good
                });
                HoledSphereChart::new(p.id.clone(), ends, quality)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let gluing = self
            .gluing
            .iter()
            .map(|[a, b]| Ok([a.parse()?, b.parse()?]))
            .collect::<Result<Vec<_>, GraftError>>()?;
        let loops = self
            .loops
            .iter()
            .map(|l| {
                Ok(AdmissibleLoop {
                    word: l.word.parse()?,
                    carrier: l.carrier.iter().map(|[p, a, b]| CarrierArc::new(p.clone(), a.clone(), b.clone())).collect(),
                })
            })
            .collect::<Result<Vec<_>, GraftError>>()?;
        Ok(PresentationParts { genus: self.genus, group, marking, pieces, gluing, loops })
    }
}
