//! Planarity of small undirected multigraphs.
//!
//! Loops and parallel edges never affect planarity and are dropped. Each
//! biconnected block is tested by incremental face embedding: keep a planar
//! subgraph with its faces, and repeatedly route a path of some remaining
//! fragment through a face containing all of that fragment's attachments.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

/// True when the graph with the given edges is planar.
pub fn is_planar(edges: &[(usize, usize)]) -> bool {
    let simple: BTreeSet<(usize, usize)> = edges
        .iter()
        .filter(|(a, b)| a != b)
        .map(|&(a, b)| (a.min(b), a.max(b)))
        .collect();
    let used: BTreeSet<usize> = simple.iter().flat_map(|&(a, b)| [a, b]).collect();
    let v = used.len();
    if v <= 4 {
        return true;
    }
    if simple.len() > 3 * v - 6 {
        return false;
    }
    blocks(&simple).iter().all(|b| b.len() < 3 || embed_block(b))
}

// Edge sets of the biconnected components.
fn blocks(edges: &BTreeSet<(usize, usize)>) -> Vec<Vec<(usize, usize)>> {
    let mut adj: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(a, b) in edges {
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
    }
    struct State<'a> {
        adj: &'a BTreeMap<usize, Vec<usize>>,
        disc: BTreeMap<usize, usize>,
        low: BTreeMap<usize, usize>,
        stack: Vec<(usize, usize)>,
        out: Vec<Vec<(usize, usize)>>,
        time: usize,
    }
    fn dfs(s: &mut State, u: usize, parent: Option<usize>) {
        s.time += 1;
        s.disc.insert(u, s.time);
        s.low.insert(u, s.time);
        let neighbours = s.adj[&u].clone();
        for w in neighbours {
            if Some(w) == parent {
                continue;
            }
            if let Some(&dw) = s.disc.get(&w) {
                if dw < s.disc[&u] {
                    s.stack.push((u, w));
                    let lu = s.low[&u].min(dw);
                    s.low.insert(u, lu);
                }
            } else {
                s.stack.push((u, w));
                dfs(s, w, Some(u));
                let lu = s.low[&u].min(s.low[&w]);
                s.low.insert(u, lu);
                if s.low[&w] >= s.disc[&u] {
                    let mut block = Vec::new();
                    while let Some(e) = s.stack.pop() {
                        block.push((e.0.min(e.1), e.0.max(e.1)));
                        if e == (u, w) {
                            break;
                        }
                    }
                    s.out.push(block);
                }
            }
        }
    }
    let mut s = State { adj: &adj, disc: BTreeMap::new(), low: BTreeMap::new(), stack: Vec::new(), out: Vec::new(), time: 0 };
    let roots: Vec<usize> = adj.keys().copied().collect();
    for r in roots {
        if !s.disc.contains_key(&r) {
            dfs(&mut s, r, None);
        }
    }
    s.out
}

struct Fragment {
    attach: BTreeSet<usize>,
    // Interior vertices; empty for a single chord between embedded vertices.
    interior: BTreeSet<usize>,
    chord: Option<(usize, usize)>,
}

// Embeds a 2-connected simple graph or reports that it cannot be done.
fn embed_block(edges: &[(usize, usize)]) -> bool {
    let mut adj: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for &(a, b) in edges {
        adj.entry(a).or_default().insert(b);
        adj.entry(b).or_default().insert(a);
    }
    let cycle = find_cycle(&adj);
    let mut emb_v: BTreeSet<usize> = cycle.iter().copied().collect();
    let mut emb_e: BTreeSet<(usize, usize)> = BTreeSet::new();
    for i in 0..cycle.len() {
        let (a, b) = (cycle[i], cycle[(i + 1) % cycle.len()]);
        emb_e.insert((a.min(b), a.max(b)));
    }
    let mut faces = vec![cycle.clone(), cycle];
    while emb_e.len() < edges.len() {
        let frags = fragments(&adj, edges, &emb_v, &emb_e);
        let mut choice: Option<(usize, usize)> = None;
        for (fi, frag) in frags.iter().enumerate() {
            let admissible: Vec<usize> = faces
                .iter()
                .enumerate()
                .filter(|(_, f)| frag.attach.iter().all(|a| f.contains(a)))
                .map(|(i, _)| i)
                .collect();
            match admissible.len() {
                0 => return false,
                1 => {
                    choice = Some((fi, admissible[0]));
                    break;
                }
                _ => {
                    if choice.is_none() {
                        choice = Some((fi, admissible[0]));
                    }
                }
            }
        }
        let (fi, face_idx) = choice.expect("a fragment remains while edges remain");
        let path = fragment_path(&adj, &frags[fi], &emb_v);
        for w in path.windows(2) {
            emb_e.insert((w[0].min(w[1]), w[0].max(w[1])));
        }
        emb_v.extend(path.iter().copied());
        let face = faces.swap_remove(face_idx);
        let (f1, f2) = split_face(&face, &path);
        faces.push(f1);
        faces.push(f2);
    }
    true
}

fn find_cycle(adj: &BTreeMap<usize, BTreeSet<usize>>) -> Vec<usize> {
    fn dfs(
        adj: &BTreeMap<usize, BTreeSet<usize>>,
        u: usize,
        parent: Option<usize>,
        path: &mut Vec<usize>,
        on_path: &mut BTreeMap<usize, usize>,
        done: &mut BTreeSet<usize>,
    ) -> Option<Vec<usize>> {
        on_path.insert(u, path.len());
        path.push(u);
        for &w in &adj[&u] {
            if Some(w) == parent || done.contains(&w) {
                continue;
            }
            if let Some(&pos) = on_path.get(&w) {
                return Some(path[pos..].to_vec());
            }
            if let Some(c) = dfs(adj, w, Some(u), path, on_path, done) {
                return Some(c);
            }
        }
        path.pop();
        on_path.remove(&u);
        done.insert(u);
        None
    }
    let start = *adj.keys().next().expect("nonempty block");
    dfs(adj, start, None, &mut Vec::new(), &mut BTreeMap::new(), &mut BTreeSet::new())
        .expect("2-connected blocks with at least three edges contain a cycle")
}

fn fragments(
    adj: &BTreeMap<usize, BTreeSet<usize>>,
    edges: &[(usize, usize)],
    emb_v: &BTreeSet<usize>,
    emb_e: &BTreeSet<(usize, usize)>,
) -> Vec<Fragment> {
    let mut out = Vec::new();
    for &(a, b) in edges {
        if emb_v.contains(&a) && emb_v.contains(&b) && !emb_e.contains(&(a, b)) {
            out.push(Fragment { attach: BTreeSet::from([a, b]), interior: BTreeSet::new(), chord: Some((a, b)) });
        }
    }
    let mut seen: BTreeSet<usize> = BTreeSet::new();
    for &v in adj.keys() {
        if emb_v.contains(&v) || seen.contains(&v) {
            continue;
        }
        let mut interior = BTreeSet::from([v]);
        let mut attach = BTreeSet::new();
        let mut queue = VecDeque::from([v]);
        seen.insert(v);
        while let Some(u) = queue.pop_front() {
            for &w in &adj[&u] {
                if emb_v.contains(&w) {
                    attach.insert(w);
                } else if seen.insert(w) {
                    interior.insert(w);
                    queue.push_back(w);
                }
            }
        }
        out.push(Fragment { attach, interior, chord: None });
    }
    out
}

// Path through the fragment between two distinct attachment vertices.
fn fragment_path(adj: &BTreeMap<usize, BTreeSet<usize>>, frag: &Fragment, emb_v: &BTreeSet<usize>) -> Vec<usize> {
    if let Some((a, b)) = frag.chord {
        return vec![a, b];
    }
    let a = *frag.attach.iter().next().expect("fragments of a block have attachments");
    let mut parent: BTreeMap<usize, usize> = BTreeMap::new();
    let mut queue = VecDeque::new();
    for &w in &adj[&a] {
        if frag.interior.contains(&w) && !parent.contains_key(&w) {
            parent.insert(w, a);
            queue.push_back(w);
        }
    }
    while let Some(u) = queue.pop_front() {
        for &w in &adj[&u] {
            if emb_v.contains(&w) && w != a {
                let mut path = vec![w, u];
                let mut x = u;
                while parent[&x] != a {
                    x = parent[&x];
                    path.push(x);
                }
                path.push(a);
                path.reverse();
                return path;
            }
            if frag.interior.contains(&w) && !parent.contains_key(&w) {
                parent.insert(w, u);
                queue.push_back(w);
            }
        }
    }
    unreachable!("fragments of a 2-connected block have two attachments")
}

// Splits a face cycle along a path whose two ends lie on it.
fn split_face(face: &[usize], path: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let (a, b) = (path[0], *path.last().expect("path"));
    let n = face.len();
    let i = face.iter().position(|&x| x == a).expect("path starts on face");
    let j = face.iter().position(|&x| x == b).expect("path ends on face");
    let inner = &path[1..path.len() - 1];
    let walk = |from: usize, to: usize| {
        let mut out = vec![face[from]];
        let mut k = from;
        while k != to {
            k = (k + 1) % n;
            out.push(face[k]);
        }
        out
    };
    let mut f1 = walk(i, j);
    f1.extend(inner.iter().rev());
    let mut f2 = walk(j, i);
    f2.extend(inner.iter());
    (f1, f2)
}
