//! Standard groups, graphs and presentations used by tests and the CLI.
//!
//! Randomized generators take an explicit RNG; [`seed`] reads
//! `SCHOTTKY_SEED` so that runs can be reproduced from the environment.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::foldgraph::{Edge, EdgeId, LabeledGraph, VertexId};
use crate::graftcalc::{presentation_from_graph, BoundaryRef, CarrierArc, GraftError, GraftingPresentation, HoledSphereChart, PresentationParts};
use crate::moebius::{Complex, GeneralizedCircle, DEFAULT_TOL};
use crate::schottky::{CirclePair, SchottkyGroup};
use crate::word::Letter;

pub const SEED_VAR: &str = "SCHOTTKY_SEED";

/// Seed from `SCHOTTKY_SEED`, or `default` when unset or unparsable.
pub fn seed(default: u64) -> u64 {
    std::env::var(SEED_VAR).ok().and_then(|s| s.trim().parse().ok()).unwrap_or(default)
}

fn unit_circle_at(x: f64) -> GeneralizedCircle {
    GeneralizedCircle::circle(Complex::new(x, 0.0), 1.0).expect("positive radius")
}

/// Fuchsian group of rank `g` with unit circles centered at
/// `-2(2g-1), -2(2g-1)+4, ..`; pair `i` sends circle `2i` to `2i+1`.
/// Rank 2 gives `C(-6,1) -> C(-2,1)`, `C(2,1) -> C(6,1)`.
pub fn rank_group(g: usize) -> SchottkyGroup {
    assert!(g >= 1, "rank must be positive");
    let first = -2.0 * (2 * g - 1) as f64;
    let pairs: Vec<CirclePair> = (0..g)
        .map(|i| CirclePair {
            src: unit_circle_at(first + 8.0 * i as f64),
            dst: unit_circle_at(first + 8.0 * i as f64 + 4.0),
        })
        .collect();
    SchottkyGroup::build(&pairs, true, DEFAULT_TOL).expect("disjoint unit circles on the real line")
}

pub fn rank1_group() -> SchottkyGroup {
    rank_group(1)
}

pub fn rank2_group() -> SchottkyGroup {
    rank_group(2)
}

pub fn rank3_group() -> SchottkyGroup {
    rank_group(3)
}

fn graph(rank: usize, vertices: u32, edges: &[(u32, u32, Letter)]) -> LabeledGraph {
    LabeledGraph::new(
        rank,
        (0..vertices).map(VertexId),
        edges.iter().enumerate().map(|(k, &(from, to, label))| (EdgeId(k as u32), Edge { from: VertexId(from), to: VertexId(to), label })),
    )
    .expect("fixture graph is valid")
}

fn parts(genus: usize, marking: LabeledGraph, pieces: Vec<HoledSphereChart>, gluing: &[(&str, &str)]) -> PresentationParts {
    PresentationParts {
        genus,
        group: rank_group(genus),
        marking,
        pieces,
        gluing: gluing.iter().map(|(a, b)| [a.parse().expect("ref"), b.parse().expect("ref")]).collect::<Vec<[BoundaryRef; 2]>>(),
        loops: Vec::new(),
    }
}

/// One `2g`-holed sphere glued to itself along `b(2i-1) ~ b(2i)`, marked by
/// the rose.
pub fn omega0_presentation(g: usize) -> GraftingPresentation {
    let piece = HoledSphereChart::basic_holed("p0", 2 * g).expect("2g >= 2");
    let refs: Vec<(String, String)> = (1..=g).map(|i| (format!("p0.b{}", 2 * i - 1), format!("p0.b{}", 2 * i))).collect();
    let gluing: Vec<(&str, &str)> = refs.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
    let marking = LabeledGraph::rose(g).expect("g >= 1");
    GraftingPresentation::new(parts(g, marking, vec![piece], &gluing)).expect("fixture is valid")
}

/// Genus 2 from two pairs of pants `A`, `B`: `a1 ~ a2` (g1), `b1 ~ b2`
/// (g2) and the bar `a3 ~ b3` labeled g1, which folds onto the A loop.
pub fn dumbbell_presentation() -> GraftingPresentation {
    let a = HoledSphereChart::basic("A", &["a1", "a2", "a3"]).expect("pants");
    let b = HoledSphereChart::basic("B", &["b1", "b2", "b3"]).expect("pants");
    let marking = graph(2, 2, &[(0, 0, Letter::pos(1)), (1, 1, Letter::pos(2)), (0, 1, Letter::pos(1))]);
    GraftingPresentation::new(parts(2, marking, vec![a, b], &[("A.a1", "A.a2"), ("B.b1", "B.b2"), ("A.a3", "B.b3")]))
        .expect("fixture is valid")
}

/// Genus 2 from two pairs of pants glued along all three boundaries with
/// labels g1, g2, g1. Every fold of a theta graph is between parallel
/// edges, so this marking is never the rose.
pub fn theta_presentation() -> GraftingPresentation {
    let a = HoledSphereChart::basic("A", &["a1", "a2", "a3"]).expect("pants");
    let b = HoledSphereChart::basic("B", &["b1", "b2", "b3"]).expect("pants");
    let marking = graph(2, 2, &[(0, 1, Letter::pos(1)), (0, 1, Letter::pos(2)), (0, 1, Letter::pos(1))]);
    GraftingPresentation::new(parts(2, marking, vec![a, b], &[("A.a1", "B.b1"), ("A.a2", "B.b2"), ("A.a3", "B.b3")]))
        .expect("fixture is valid")
}

/// Random closed walk in the pieces of `p` that never leaves a piece
/// through the boundary it entered by, or `None` within `max_len` steps.
pub fn random_carrier<R: Rng + ?Sized>(p: &GraftingPresentation, rng: &mut R, max_len: usize) -> Option<Vec<CarrierArc>> {
    let partner = |r: &BoundaryRef| -> BoundaryRef {
        let pair = p.gluing().iter().find(|pair| pair.contains(r)).expect("glued");
        if &pair[0] == r {
            pair[1].clone()
        } else {
            pair[0].clone()
        }
    };
    let piece_of = |id: &str| p.pieces().iter().find(|c| c.id() == id).expect("piece");
    let start = p.pieces().choose(rng)?;
    let first_exit = start.ends().choose(rng)?.id.clone();
    let mut arcs: Vec<(String, Option<String>, String)> = vec![(start.id().to_string(), None, first_exit.clone())];
    let mut at = partner(&BoundaryRef::new(start.id(), first_exit.clone()));
    for _ in 0..max_len {
        if at.piece == start.id() && at.boundary != first_exit {
            arcs[0].1 = Some(at.boundary.clone());
            return Some(arcs.into_iter().map(|(pc, e, x)| CarrierArc::new(pc, e.expect("closed"), x)).collect());
        }
        let piece = piece_of(&at.piece);
        let options: Vec<&str> = piece.ends().iter().map(|e| e.id.as_str()).filter(|b| *b != at.boundary).collect();
        let exit = options.choose(rng)?.to_string();
        arcs.push((at.piece.clone(), Some(at.boundary.clone()), exit.clone()));
        at = partner(&BoundaryRef::new(at.piece.clone(), exit));
    }
    None
}

/// Dual presentation of a random blowup of `rose(g)` with `steps` unfolds.
pub fn random_presentation<R: Rng + ?Sized>(g: usize, steps: usize, rng: &mut R) -> GraftingPresentation {
    let graph = LabeledGraph::random_blowup(g, steps, rng).expect("g >= 1");
    presentation_from_graph(&graph, rank_group(g)).expect("blowups give valid presentations")
}

/// Grafts up to `loops` random loops, skipping candidates that cannot be
/// drawn disjointly. Returns every intermediate presentation, first to last.
pub fn random_graft_sequence<R: Rng + ?Sized>(
    start: GraftingPresentation,
    loops: usize,
    rng: &mut R,
) -> Result<Vec<GraftingPresentation>, GraftError> {
    let mut out = vec![start];
    let mut attempts = 0;
    while out.len() <= loops && attempts < 20 * loops.max(1) {
        attempts += 1;
        let current = out.last().expect("nonempty");
        let max_len = 3 * current.gluing().len() + 3;
        let Some(carrier) = random_carrier(current, rng, max_len) else { continue };
        match current.graft_loop(carrier) {
            Ok(next) => out.push(next),
            Err(GraftError::CarrierOverlap(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn groups_build() {
        for g in 1..=4 {
            assert_eq!(rank_group(g).rank(), g);
        }
        let pairs = rank2_group().pairing().to_vec();
        let centers: Vec<f64> = pairs.iter().flat_map(|p| [p.src, p.dst]).map(|c| c.center_radius().unwrap().0.re).collect();
        assert_eq!(centers, vec![-6.0, -2.0, 2.0, 6.0]);
        assert_eq!(rank1_group().pairing()[0].src.center_radius().unwrap().0.re, -2.0);
    }

    #[test]
    fn random_presentations_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let g = rng.gen_range(2..=3);
            let p = random_presentation(g, rng.gen_range(0..6), &mut rng);
            assert!(p.verify().passed(), "{}", p.verify());
            let seq = random_graft_sequence(p, 3, &mut rng).unwrap();
            for q in &seq {
                assert_eq!(q.euler_characteristic(), 2 - 2 * g as i64);
                assert!(q.verify().passed(), "{}", q.verify());
            }
        }
    }
}
