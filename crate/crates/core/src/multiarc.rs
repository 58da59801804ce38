//! Non-crossing chord diagrams on an n-gon with prescribed endpoint counts.
//!
//! Edge `i` carries `δ_i` marked points, ordered from the edge's
//! counterclockwise start. Walking the edges in order and the points along
//! each edge gives the global cyclic order used for crossing tests.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Upper bound on `Σδ` accepted by the exhaustive search.
pub const BRUTE_FORCE_CAP: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MultiarcError {
    #[error("degree tuple must have at least one entry")]
    EmptyTuple,
    #[error("cannot parse degree tuple {0:?}")]
    Parse(String),
    #[error("degree tuple {0} is infeasible")]
    Infeasible(DegreeTuple),
    #[error("chord construction stalled with counts {0:?}")]
    InternalInvariantBreach(Vec<usize>),
    #[error("total degree {sum} exceeds search cap {cap}")]
    CapExceeded { sum: usize, cap: usize },
}

/// Cyclic sequence of per-edge endpoint counts `δ_1..δ_n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DegreeTuple(Vec<usize>);

impl DegreeTuple {
    pub fn new(counts: Vec<usize>) -> Result<Self, MultiarcError> {
        if counts.is_empty() {
            return Err(MultiarcError::EmptyTuple);
        }
        Ok(DegreeTuple(counts))
    }

    pub fn counts(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum(&self) -> usize {
        self.0.iter().sum()
    }

    /// Even total and no entry larger than the rest combined.
    pub fn feasible(&self) -> bool {
        let sum = self.sum();
        let max = self.0.iter().copied().max().unwrap_or(0);
        sum.is_multiple_of(2) && 2 * max <= sum
    }

    /// Every tuple with `1..=max_len` entries and total at most `max_sum`.
    pub fn enumerate(max_len: usize, max_sum: usize) -> Vec<DegreeTuple> {
        fn rec(prefix: &mut Vec<usize>, len: usize, budget: usize, out: &mut Vec<DegreeTuple>) {
            if prefix.len() == len {
                out.push(DegreeTuple(prefix.clone()));
                return;
            }
            for v in 0..=budget {
                prefix.push(v);
                rec(prefix, len, budget - v, out);
                prefix.pop();
            }
        }
        let mut out = Vec::new();
        for len in 1..=max_len {
            rec(&mut Vec::new(), len, max_sum, &mut out);
        }
        out
    }
}

impl fmt::Display for DegreeTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|d| d.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

impl FromStr for DegreeTuple {
    type Err = MultiarcError;

    /// Comma-separated counts, e.g. `1,2,3`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let counts = s
            .split(',')
            .map(|t| t.trim().parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| MultiarcError::Parse(s.to_string()))?;
        Self::new(counts)
    }
}

/// Marked point `slot` (0-based) on polygon edge `edge` (0-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PointRef {
    pub edge: usize,
    pub slot: usize,
}

impl fmt::Display for PointRef {
    /// 1-based, as in `e2.p1`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}.p{}", self.edge + 1, self.slot + 1)
    }
}

/// A set of chords on the marked points of a polygon. Not validated on
/// construction; see [`ChordDiagram::validate`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ChordDiagram {
    pub degrees: Vec<usize>,
    pub chords: Vec<(PointRef, PointRef)>,
}

impl ChordDiagram {
    /// Position of `p` in the global cyclic order, if it exists.
    pub fn global_index(&self, p: PointRef) -> Option<usize> {
        if p.edge >= self.degrees.len() || p.slot >= self.degrees[p.edge] {
            return None;
        }
        Some(self.degrees[..p.edge].iter().sum::<usize>() + p.slot)
    }

    pub fn point_count(&self) -> usize {
        self.degrees.iter().sum()
    }

    /// Checks the matching, edge separation, planarity and endpoint counts
    /// against `t`.
    pub fn validate(&self, t: &DegreeTuple) -> bool {
        if self.degrees != t.counts() {
            return false;
        }
        let total = self.point_count();
        let mut used = vec![false; total];
        let mut spans = Vec::with_capacity(self.chords.len());
        for &(p, q) in &self.chords {
            let (Some(a), Some(b)) = (self.global_index(p), self.global_index(q)) else {
                return false;
            };
            if p.edge == q.edge || used[a] || used[b] {
                return false;
            }
            used[a] = true;
            used[b] = true;
            spans.push((a.min(b), a.max(b)));
        }
        if used.iter().any(|u| !u) {
            return false;
        }
        for (i, &(a, b)) in spans.iter().enumerate() {
            for &(c, d) in &spans[i + 1..] {
                let c_in = a < c && c < b;
                let d_in = a < d && d < b;
                if c_in != d_in {
                    return false;
                }
            }
        }
        // Per-edge counts follow from the perfect matching on `degrees`.
        true
    }

    /// Number of chord endpoints on each edge.
    pub fn endpoint_counts(&self) -> Vec<usize> {
        let mut out = vec![0; self.degrees.len()];
        for (p, q) in &self.chords {
            for r in [p, q] {
                if r.edge < out.len() {
                    out[r.edge] += 1;
                }
            }
        }
        out
    }
}

impl fmt::Display for ChordDiagram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (p, q) in &self.chords {
            writeln!(f, "{p} -- {q}")?;
        }
        Ok(())
    }
}

/// Builds the canonical multiarc: repeatedly join the largest remaining
/// edge `j` (lowest index on ties) to the next nonempty edge `m` after it,
/// using the last free point of `j` and the first free point of `m`. Every
/// edge strictly between `j` and `m` is exhausted, so the two points are
/// adjacent among free points and the chord crosses nothing built later.
pub fn construct(t: &DegreeTuple) -> Result<ChordDiagram, MultiarcError> {
    if !t.feasible() {
        return Err(MultiarcError::Infeasible(t.clone()));
    }
    let n = t.len();
    // Free points on edge i are the slots lo[i]..hi[i].
    let mut lo = vec![0usize; n];
    let mut hi = t.counts().to_vec();
    let mut chords = Vec::with_capacity(t.sum() / 2);
    loop {
        let remaining: Vec<usize> = (0..n).map(|i| hi[i] - lo[i]).collect();
        let max = *remaining.iter().max().expect("nonempty");
        if max == 0 {
            break;
        }
        let j = remaining.iter().position(|&r| r == max).expect("max exists");
        let m = (1..n)
            .map(|k| (j + k) % n)
            .find(|&i| remaining[i] > 0)
            .ok_or_else(|| MultiarcError::InternalInvariantBreach(remaining.clone()))?;
        hi[j] -= 1;
        let p = PointRef { edge: j, slot: hi[j] };
        let q = PointRef { edge: m, slot: lo[m] };
        lo[m] += 1;
        chords.push((p, q));
    }
    Ok(ChordDiagram { degrees: t.counts().to_vec(), chords })
}

/// Exhaustive search for any valid multiarc on `t`; capped at
/// [`BRUTE_FORCE_CAP`] points.
pub fn brute_force_exists(t: &DegreeTuple) -> Result<bool, MultiarcError> {
    let sum = t.sum();
    if sum > BRUTE_FORCE_CAP {
        return Err(MultiarcError::CapExceeded { sum, cap: BRUTE_FORCE_CAP });
    }
    let labels: Vec<usize> = t
        .counts()
        .iter()
        .enumerate()
        .flat_map(|(i, &d)| std::iter::repeat_n(i, d))
        .collect();
    Ok(matchable(&labels))
}

// A non-crossing matching of points cut open at the start: the first point
// pairs with some later point, splitting the rest into inside and outside.
fn matchable(labels: &[usize]) -> bool {
    let Some((&first, rest)) = labels.split_first() else {
        return true;
    };
    (0..rest.len())
        .step_by(2)
        .any(|k| rest[k] != first && matchable(&rest[..k]) && matchable(&rest[k + 1..]))
}
