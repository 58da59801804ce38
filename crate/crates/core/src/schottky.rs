//! Classical Schottky groups built from circle pairings.
//!
//! Generator `i` sends the source circle onto the destination circle and the
//! exterior of the source into the interior of the destination. Validity is
//! checked geometrically (disjoint circles and image-circle identity).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::moebius::{Complex, GeneralizedCircle, MapClass, MoebiusError, MoebiusMap, SpherePoint, DEFAULT_TOL};
use crate::word::{GroupWord, Letter, Sign};

pub const DEFAULT_DEPTH_CAP: usize = 10;
pub const DEFAULT_WORD_CAP: usize = 1_000_000;

/// Containment slack used by the nesting check.
pub const NESTING_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchottkyError {
    #[error("a Schottky group needs at least one circle pair")]
    Empty,
    #[error("pairing circles must be round circles (pair {0})")]
    NonClassical(usize),
    #[error("CirclesOverlap({0},{1})")]
    CirclesOverlap(usize, usize),
    #[error("PairingMismatch({0})")]
    PairingMismatch(usize),
    #[error("fuchsian group has non-real data in pair {0}")]
    NotFuchsian(usize),
    #[error("NestingViolation at word {word} (slack {slack:e})")]
    NestingViolation { word: GroupWord, slack: f64 },
    #[error("CapExceeded: depth {depth} needs {needed} disks, cap is {cap}")]
    CapExceeded { depth: usize, needed: u128, cap: usize },
    #[error("depth must be at least 1")]
    InvalidDepth,
    #[error("letter {0} is outside the group rank")]
    LetterOutOfRange(Letter),
    #[error("document declares rank {declared} but has {pairs} pairs")]
    RankMismatch { declared: usize, pairs: usize },
    #[error(transparent)]
    Moebius(#[from] MoebiusError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CirclePair {
    pub src: GeneralizedCircle,
    pub dst: GeneralizedCircle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchottkyGroup {
    generators: Vec<MoebiusMap>,
    pairing: Vec<CirclePair>,
    fuchsian: bool,
    tol: f64,
}

impl SchottkyGroup {
    /// Builds the group and runs the ping-pong checks.
    pub fn build(pairs: &[CirclePair], fuchsian: bool, tol: f64) -> Result<Self, SchottkyError> {
        if pairs.is_empty() {
            return Err(SchottkyError::Empty);
        }
        for (i, p) in pairs.iter().enumerate() {
            if p.src.center_radius().is_none() || p.dst.center_radius().is_none() {
                return Err(SchottkyError::NonClassical(i));
            }
        }
        let circles: Vec<(Complex, f64)> = pairs
            .iter()
            .flat_map(|p| [p.src.center_radius().unwrap(), p.dst.center_radius().unwrap()])
            .collect();
        for i in 0..circles.len() {
            for j in i + 1..circles.len() {
                let (ci, ri) = circles[i];
                let (cj, rj) = circles[j];
                if (ci - cj).norm() - ri - rj <= tol {
                    return Err(SchottkyError::CirclesOverlap(i, j));
                }
            }
        }
        let mut generators = Vec::with_capacity(pairs.len());
        for (i, p) in pairs.iter().enumerate() {
            let g = MoebiusMap::from_circle_pairing(&p.src, &p.dst, fuchsian).map_err(|e| match e {
                MoebiusError::NonRealCenters => SchottkyError::NotFuchsian(i),
                other => SchottkyError::Moebius(other),
            })?;
            generators.push(g);
        }
        let group = SchottkyGroup { generators, pairing: pairs.to_vec(), fuchsian, tol };
        group.verify_pairings()?;
        Ok(group)
    }

    /// Builds from the serialized form; `tol` defaults to [`DEFAULT_TOL`].
    pub fn from_doc(doc: &SchottkyDoc) -> Result<Self, SchottkyError> {
        if doc.rank != doc.pairs.len() {
            return Err(SchottkyError::RankMismatch { declared: doc.rank, pairs: doc.pairs.len() });
        }
        let pairs = doc
            .pairs
            .iter()
            .map(|p| Ok(CirclePair { src: p.src.to_circle()?, dst: p.dst.to_circle()? }))
            .collect::<Result<Vec<_>, MoebiusError>>()?;
        Self::build(&pairs, doc.fuchsian, doc.tol.unwrap_or(DEFAULT_TOL))
    }

    pub fn to_doc(&self) -> SchottkyDoc {
        let circle = |c: &GeneralizedCircle| {
            let (z, r) = c.center_radius().expect("classical groups have round circles");
            CircleDoc { cx: z.re, cy: z.im, r }
        };
        SchottkyDoc {
            rank: self.rank(),
            pairs: self.pairing.iter().map(|p| PairDoc { src: circle(&p.src), dst: circle(&p.dst) }).collect(),
            fuchsian: self.fuchsian,
            tol: Some(self.tol),
        }
    }

    /// Wraps generators and circles without any checks. Diagnostics only.
    pub fn from_parts_unchecked(generators: Vec<MoebiusMap>, pairing: Vec<CirclePair>, fuchsian: bool, tol: f64) -> Self {
        SchottkyGroup { generators, pairing, fuchsian, tol }
    }

    fn verify_pairings(&self) -> Result<(), SchottkyError> {
        let check_tol = self.tol.max(DEFAULT_TOL);
        for (i, (g, p)) in self.generators.iter().zip(&self.pairing).enumerate() {
            let img = g.apply_circle(&p.src)?;
            if img.chordal_gap_to(&p.dst, 16) > check_tol || p.dst.chordal_gap_to(&img, 16) > check_tol {
                return Err(SchottkyError::PairingMismatch(i));
            }
            // Exterior of src goes inside dst: infinity is exterior to src.
            let far = g.apply(&SpherePoint::INFINITY);
            match far.to_complex() {
                Some(z) if p.dst.signed_distance(z) < 0.0 => {}
                _ => return Err(SchottkyError::PairingMismatch(i)),
            }
            if self.fuchsian {
                let real = g.entries().iter().all(|e| e.im.abs() <= check_tol);
                let centers = [p.src, p.dst]
                    .iter()
                    .all(|c| c.center_radius().map(|(z, _)| z.im.abs() <= check_tol).unwrap_or(false));
                if !(real && centers) {
                    return Err(SchottkyError::NotFuchsian(i));
                }
            }
        }
        Ok(())
    }

    pub fn rank(&self) -> usize {
        self.generators.len()
    }

    pub fn generators(&self) -> &[MoebiusMap] {
        &self.generators
    }

    pub fn pairing(&self) -> &[CirclePair] {
        &self.pairing
    }

    pub fn is_fuchsian(&self) -> bool {
        self.fuchsian
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn generator(&self, l: Letter) -> Result<MoebiusMap, SchottkyError> {
        let g = self
            .generators
            .get(l.index.wrapping_sub(1))
            .ok_or(SchottkyError::LetterOutOfRange(l))?;
        Ok(match l.sign {
            Sign::Plus => *g,
            Sign::Minus => g.inverse(),
        })
    }

    /// Product of the letters' matrices, left to right.
    pub fn evaluate(&self, word: &GroupWord) -> Result<MoebiusMap, SchottkyError> {
        word.letters()
            .iter()
            .try_fold(MoebiusMap::identity(), |acc, &l| Ok(acc.compose(&self.generator(l)?)))
    }

    /// Disk whose interior is the image region of the letter: `dst` for a
    /// generator, `src` for its inverse.
    pub fn range_disk(&self, l: Letter) -> GeneralizedCircle {
        let p = &self.pairing[l.index - 1];
        match l.sign {
            Sign::Plus => p.dst,
            Sign::Minus => p.src,
        }
    }

    /// Closed fundamental domain: outside or on every pairing circle.
    pub fn in_fundamental_domain(&self, p: &SpherePoint) -> bool {
        let Some(z) = p.to_complex() else {
            return true;
        };
        self.pairing
            .iter()
            .flat_map(|pair| [pair.src, pair.dst])
            .all(|c| c.signed_distance(z) >= -self.tol)
    }

    pub fn reduced_words(&self, max_len: usize) -> ReducedWords {
        enumerate_reduced_words(self.rank(), max_len)
    }

    /// Classifies every nonempty reduced word up to `max_len`.
    pub fn all_loxodromic_check(&self, max_len: usize) -> LoxodromicReport {
        let words: Vec<GroupWord> = self.reduced_words(max_len).filter(|w| !w.is_empty()).collect();
        let results: Vec<(GroupWord, Result<MapClass, MoebiusError>, f64)> = words
            .into_par_iter()
            .map(|w| {
                let m = self.evaluate(&w).expect("enumerated words stay within rank");
                let t = m.trace() * m.trace();
                let x = t.re.clamp(0.0, 4.0);
                let dist = (t - Complex::new(x, 0.0)).norm();
                let class = m.classify(self.tol.max(1e-12));
                (w, class, dist)
            })
            .collect();
        let checked = results.len();
        let min_trace_distance = results.iter().map(|r| r.2).fold(f64::INFINITY, f64::min);
        let violations = results
            .into_iter()
            .filter(|(_, class, _)| *class != Ok(MapClass::Loxodromic))
            .map(|(w, class, dist)| LoxodromicViolation { word: w, class, trace_distance: dist })
            .collect();
        LoxodromicReport { checked, violations, min_trace_distance }
    }

    /// Nested image disks up to `depth` letters.
    ///
    /// The disk of `w s` is the image of the range disk of `s` under `w`.
    /// Leaf-disk centers approximate the limit set.
    pub fn limit_set_approx(&self, depth: usize, max_words: usize) -> Result<LimitSetApprox, SchottkyError> {
        if depth == 0 {
            return Err(SchottkyError::InvalidDepth);
        }
        let needed = disk_count(self.rank(), depth);
        if needed > max_words as u128 {
            return Err(SchottkyError::CapExceeded { depth, needed, cap: max_words });
        }
        let alphabet = Letter::alphabet(self.rank());
        let mut nodes: Vec<DiskNode> = Vec::with_capacity(needed as usize);
        // (node index, accumulated matrix) for the current frontier.
        let mut frontier: Vec<(usize, MoebiusMap)> = Vec::new();
        for &l in &alphabet {
            nodes.push(DiskNode { word: GroupWord::from_letters(vec![l]), disk: self.range_disk(l), parent: None, depth: 1 });
            frontier.push((nodes.len() - 1, self.generator(l)?));
        }
        for level in 2..=depth {
            let expanded: Vec<Result<Vec<(DiskNode, MoebiusMap)>, SchottkyError>> = frontier
                .par_iter()
                .map(|&(idx, m)| {
                    let parent = &nodes[idx];
                    let last = parent.word.last().expect("nonempty");
                    alphabet
                        .iter()
                        .filter(|&&s| s != last.inverse())
                        .map(|&s| {
                            let word = parent.word.pushed(s);
                            let disk = self.image_disk(&m, s, &word)?;
                            check_nesting(&parent.disk, &disk, &word)?;
                            let child = DiskNode { word, disk, parent: Some(idx), depth: level };
                            Ok((child, m.compose(&self.generator(s)?)))
                        })
                        .collect()
                })
                .collect();
            let mut next = Vec::with_capacity(frontier.len() * alphabet.len());
            for children in expanded {
                for (node, m) in children? {
                    nodes.push(node);
                    next.push((nodes.len() - 1, m));
                }
            }
            frontier = next;
        }
        let points = nodes
            .iter()
            .filter(|n| n.depth == depth)
            .map(|n| SpherePoint::finite(n.disk.center_radius().expect("checked").0))
            .collect();
        Ok(LimitSetApprox { tree: DiskTree { nodes, depth }, points })
    }

    fn image_disk(&self, m: &MoebiusMap, s: Letter, word: &GroupWord) -> Result<GeneralizedCircle, SchottkyError> {
        let range = self.range_disk(s);
        let violation = |slack| SchottkyError::NestingViolation { word: word.clone(), slack };
        let img = m.apply_circle(&range).map_err(|_| violation(f64::NAN))?;
        img.center_radius().ok_or_else(|| violation(f64::INFINITY))?;
        // The bounded side of the image circle must be the image of the disk.
        let (rc, _) = range.center_radius().expect("classical");
        match m.apply_complex(rc).to_complex() {
            Some(z) if img.signed_distance(z) < 0.0 => Ok(img),
            _ => Err(violation(f64::INFINITY)),
        }
    }
}

fn check_nesting(parent: &GeneralizedCircle, child: &GeneralizedCircle, word: &GroupWord) -> Result<(), SchottkyError> {
    let (pc, pr) = parent.center_radius().expect("disks are circles");
    let (cc, cr) = child.center_radius().expect("disks are circles");
    let slack = pr - ((cc - pc).norm() + cr);
    if slack < -NESTING_SLACK {
        return Err(SchottkyError::NestingViolation { word: word.clone(), slack });
    }
    Ok(())
}

/// Number of reduced words of length 1..=depth in rank `g`.
/// Serialized group: `{"rank", "pairs": [{"src": {"cx","cy","r"}, "dst": ...}], "fuchsian", "tol"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchottkyDoc {
    pub rank: usize,
    pub pairs: Vec<PairDoc>,
    #[serde(default)]
    pub fuchsian: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDoc {
    pub src: CircleDoc,
    pub dst: CircleDoc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleDoc {
    pub cx: f64,
    pub cy: f64,
    pub r: f64,
}

impl CircleDoc {
    pub fn to_circle(&self) -> Result<GeneralizedCircle, MoebiusError> {
        GeneralizedCircle::circle(Complex::new(self.cx, self.cy), self.r)
    }
}

pub fn disk_count(rank: usize, depth: usize) -> u128 {
    let (g2, mut level, mut total) = (2 * rank as u128, 2 * rank as u128, 0u128);
    for _ in 0..depth {
        total = total.saturating_add(level);
        level = level.saturating_mul(g2 - 1);
    }
    total
}

/// Number of reduced words of length at most `max_len`, identity included.
pub fn reduced_word_count(rank: usize, max_len: usize) -> u128 {
    1 + disk_count(rank, max_len)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoxodromicViolation {
    pub word: GroupWord,
    pub class: Result<MapClass, MoebiusError>,
    pub trace_distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoxodromicReport {
    pub checked: usize,
    pub violations: Vec<LoxodromicViolation>,
    /// Smallest distance of a squared trace from the segment `[0, 4]`.
    pub min_trace_distance: f64,
}

impl LoxodromicReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiskNode {
    pub word: GroupWord,
    pub disk: GeneralizedCircle,
    pub parent: Option<usize>,
    pub depth: usize,
}

/// Forest of nested disks in breadth-first order; roots are the interiors
/// of the pairing circles.
#[derive(Debug, Clone, PartialEq)]
pub struct DiskTree {
    pub nodes: Vec<DiskNode>,
    pub depth: usize,
}

impl DiskTree {
    pub fn leaves(&self) -> impl Iterator<Item = &DiskNode> {
        self.nodes.iter().filter(move |n| n.depth == self.depth)
    }

    pub fn at_depth(&self, depth: usize) -> impl Iterator<Item = &DiskNode> {
        self.nodes.iter().filter(move |n| n.depth == depth)
    }

    /// Smallest containment slack `r_parent - (|c_child - c_parent| + r_child)`.
    pub fn min_nesting_slack(&self) -> f64 {
        self.nodes
            .iter()
            .filter_map(|n| n.parent.map(|p| (p, n)))
            .map(|(p, n)| {
                let (pc, pr) = self.nodes[p].disk.center_radius().unwrap();
                let (cc, cr) = n.disk.center_radius().unwrap();
                pr - ((cc - pc).norm() + cr)
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_diameter_at(&self, depth: usize) -> f64 {
        self.at_depth(depth)
            .map(|n| 2.0 * n.disk.center_radius().unwrap().1)
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitSetApprox {
    pub tree: DiskTree,
    pub points: Vec<SpherePoint>,
}

/// Breadth-first stream of reduced words, lexicographic within a length.
pub struct ReducedWords {
    alphabet: Vec<Letter>,
    max_len: usize,
    level: Vec<GroupWord>,
    pos: usize,
    len: usize,
}

pub fn enumerate_reduced_words(rank: usize, max_len: usize) -> ReducedWords {
    ReducedWords { alphabet: Letter::alphabet(rank), max_len, level: vec![GroupWord::empty()], pos: 0, len: 0 }
}

impl Iterator for ReducedWords {
    type Item = GroupWord;

    fn next(&mut self) -> Option<GroupWord> {
        if self.pos < self.level.len() {
            self.pos += 1;
            return Some(self.level[self.pos - 1].clone());
        }
        if self.len >= self.max_len || self.alphabet.is_empty() {
            return None;
        }
        let alphabet = &self.alphabet;
        let next: Vec<GroupWord> = self
            .level
            .iter()
            .flat_map(|w| {
                let last = w.last();
                alphabet
                    .iter()
                    .filter(move |&&l| Some(l.inverse()) != last)
                    .map(move |&l| w.pushed(l))
            })
            .collect();
        self.level = next;
        self.len += 1;
        self.pos = 0;
        self.next()
    }
}
