//! Stallings automata for finitely generated subgroups of free groups.
//!
//! Graphs are stored folded: for every vertex and generator there is at most
//! one outgoing and one incoming edge, so a table of targets suffices.
//! Subgroup graphs are kept as cores in canonical form (breadth-first
//! numbering from the base vertex in letter order x, x⁻¹, y, y⁻¹, …), which
//! makes structural equality coincide with equality of based graphs.

use std::collections::{HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::free_words::{cmp_words, Word};
use crate::perm::Perm;

const NONE: u32 = u32::MAX;

/// Parent pointers of a product-graph search.
type ProductParents = HashMap<(u32, u32), Option<((u32, u32), i32)>>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StallingsError {
    #[error("subgroup has infinite index")]
    InfiniteIndex,
    #[error("desk-scale bound exceeded: {0}")]
    BoundExceeded(String),
    #[error("alphabet ranks differ ({0} vs {1})")]
    RankMismatch(usize, usize),
    #[error("family member {0} is the trivial subgroup")]
    TrivialMember(usize),
    #[error("subgroup of rank {sub} cannot be a free factor of a free group of rank {ambient}")]
    RankTooLarge { sub: usize, ambient: usize },
    #[error("generators do not form a free basis")]
    NotFree,
    #[error("malformed graph: {0}")]
    Malformed(String),
}

/// Folded labelled graph. `out[v * rank + a]` is the target of the edge
/// labelled `a + 1` leaving `v`; `inn` is the reverse table.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FoldedGraph {
    rank: usize,
    out: Vec<u32>,
    inn: Vec<u32>,
}

impl FoldedGraph {
    fn empty(rank: usize, n: usize) -> Self {
        FoldedGraph { rank, out: vec![NONE; n * rank], inn: vec![NONE; n * rank] }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn vertex_count(&self) -> usize {
        self.out.len().checked_div(self.rank).unwrap_or(0)
    }

    pub fn edge_count(&self) -> usize {
        self.out.iter().filter(|&&t| t != NONE).count()
    }

    /// Target of reading the signed letter `l` at `v`.
    #[inline]
    pub fn step(&self, v: u32, l: i32) -> Option<u32> {
        let a = l.unsigned_abs() as usize - 1;
        let t = if l > 0 { self.out[v as usize * self.rank + a] } else { self.inn[v as usize * self.rank + a] };
        (t != NONE).then_some(t)
    }

    fn set_edge(&mut self, u: u32, a: usize, v: u32) {
        self.out[u as usize * self.rank + a] = v;
        self.inn[v as usize * self.rank + a] = u;
    }

    /// Edges `(from, label, to)` with positive 1-based labels.
    pub fn edges(&self) -> impl Iterator<Item = (u32, i32, u32)> + '_ {
        self.out
            .iter()
            .enumerate()
            .filter(|(_, &t)| t != NONE)
            .map(move |(i, &t)| ((i / self.rank) as u32, (i % self.rank) as i32 + 1, t))
    }

    pub fn degree(&self, v: u32) -> usize {
        let r = self.rank;
        let s = v as usize * r;
        self.out[s..s + r].iter().chain(&self.inn[s..s + r]).filter(|&&t| t != NONE).count()
    }

    /// Reads as much of `w` as possible from `start`; returns the vertex
    /// reached and the number of letters consumed.
    pub fn trace(&self, start: u32, w: &Word) -> (u32, usize) {
        let mut v = start;
        for (i, &l) in w.letters().iter().enumerate() {
            match self.step(v, l) {
                Some(t) => v = t,
                None => return (v, i),
            }
        }
        (v, w.len())
    }

    pub fn read(&self, start: u32, w: &Word) -> Option<u32> {
        let (v, k) = self.trace(start, w);
        (k == w.len()).then_some(v)
    }

    fn letters(&self) -> impl Iterator<Item = i32> {
        let r = self.rank as i32;
        (1..=r).flat_map(|a| [a, -a])
    }

    /// Geodesic labels from `root` to every vertex (breadth-first, letter order).
    pub fn geodesics(&self, root: u32) -> Vec<Option<Word>> {
        let n = self.vertex_count();
        let mut parent: Vec<Option<(u32, i32)>> = vec![None; n];
        let mut seen = vec![false; n];
        seen[root as usize] = true;
        let mut order = vec![root];
        let mut i = 0;
        while i < order.len() {
            let v = order[i];
            for l in self.letters() {
                if let Some(t) = self.step(v, l) {
                    if !seen[t as usize] {
                        seen[t as usize] = true;
                        parent[t as usize] = Some((v, l));
                        order.push(t);
                    }
                }
            }
            i += 1;
        }
        let mut paths: Vec<Option<Word>> = vec![None; n];
        paths[root as usize] = Some(Word::empty());
        for &v in &order[1..] {
            let (p, l) = parent[v as usize].unwrap();
            let mut letters = paths[p as usize].as_ref().unwrap().letters().to_vec();
            letters.push(l);
            paths[v as usize] = Some(Word::from_letters(letters));
        }
        paths
    }

    /// Renumbers the component of `root` breadth-first; `root` becomes 0.
    /// Returns the new graph and the old-to-new vertex map.
    fn canonical_from(&self, root: u32) -> (FoldedGraph, Vec<u32>) {
        let n = self.vertex_count();
        let mut map = vec![NONE; n];
        map[root as usize] = 0;
        let mut order = vec![root];
        let mut i = 0;
        while i < order.len() {
            let v = order[i];
            for l in self.letters() {
                if let Some(t) = self.step(v, l) {
                    if map[t as usize] == NONE {
                        map[t as usize] = order.len() as u32;
                        order.push(t);
                    }
                }
            }
            i += 1;
        }
        let mut g = FoldedGraph::empty(self.rank, order.len());
        for (u, a, v) in self.edges() {
            if map[u as usize] != NONE {
                g.set_edge(map[u as usize], a as usize - 1, map[v as usize]);
            }
        }
        (g, map)
    }

    /// Deletes vertices of degree ≤ 1 repeatedly, sparing those in `keep`.
    fn prune(&self, keep: &[u32]) -> (FoldedGraph, Vec<u32>) {
        let n = self.vertex_count();
        let mut alive = vec![true; n];
        let mut deg: Vec<usize> = (0..n as u32).map(|v| self.degree(v)).collect();
        let mut stack: Vec<u32> = (0..n as u32).filter(|&v| deg[v as usize] <= 1).collect();
        while let Some(v) = stack.pop() {
            if !alive[v as usize] || keep.contains(&v) || deg[v as usize] > 1 {
                continue;
            }
            alive[v as usize] = false;
            for l in self.letters() {
                if let Some(t) = self.step(v, l) {
                    if alive[t as usize] && t != v {
                        deg[t as usize] -= 1;
                        if deg[t as usize] <= 1 {
                            stack.push(t);
                        }
                    }
                }
            }
        }
        self.induced(&alive)
    }

    fn induced(&self, alive: &[bool]) -> (FoldedGraph, Vec<u32>) {
        let mut map = vec![NONE; alive.len()];
        let mut next = 0;
        for (v, &a) in alive.iter().enumerate() {
            if a {
                map[v] = next;
                next += 1;
            }
        }
        let mut g = FoldedGraph::empty(self.rank, next as usize);
        for (u, a, v) in self.edges() {
            if alive[u as usize] && alive[v as usize] {
                g.set_edge(map[u as usize], a as usize - 1, map[v as usize]);
            }
        }
        (g, map)
    }

    pub fn is_complete(&self) -> bool {
        !self.out.contains(&NONE) && !self.inn.contains(&NONE)
    }
}

/// Unfolded graph under construction.
#[derive(Debug, Clone)]
pub struct GraphBuilder {
    rank: usize,
    vertices: usize,
    edges: Vec<(u32, usize, u32)>,
}

impl GraphBuilder {
    pub fn new(rank: usize) -> Self {
        GraphBuilder { rank, vertices: 0, edges: Vec::new() }
    }

    pub fn vertex(&mut self) -> u32 {
        self.vertices += 1;
        (self.vertices - 1) as u32
    }

    pub fn edge(&mut self, u: u32, l: i32, v: u32) {
        if l > 0 {
            self.edges.push((u, l as usize - 1, v));
        } else {
            self.edges.push((v, (-l) as usize - 1, u));
        }
    }

    /// Path from `from` to `to` spelling `w`; a loop of length 0 identifies
    /// nothing, so empty words between distinct vertices are not allowed.
    pub fn path(&mut self, from: u32, w: &Word, to: u32) {
        let letters = w.letters();
        if letters.is_empty() {
            assert_eq!(from, to, "empty path between distinct vertices");
            return;
        }
        let mut cur = from;
        for (i, &l) in letters.iter().enumerate() {
            let nxt = if i + 1 == letters.len() { to } else { self.vertex() };
            self.edge(cur, l, nxt);
            cur = nxt;
        }
    }

    /// Inserts a copy of a folded graph; returns the offset of its vertices.
    pub fn graph(&mut self, g: &FoldedGraph) -> u32 {
        let off = self.vertices as u32;
        self.vertices += g.vertex_count();
        for (u, a, v) in g.edges() {
            self.edges.push((u + off, a as usize - 1, v + off));
        }
        off
    }

    /// Stallings folding with union-find; returns the folded graph and the
    /// map from builder vertices to folded vertices.
    pub fn fold(self) -> (FoldedGraph, Vec<u32>) {
        let n = self.vertices;
        let r = self.rank;
        let mut parent: Vec<u32> = (0..n as u32).collect();
        fn find(parent: &mut [u32], mut v: u32) -> u32 {
            while parent[v as usize] != v {
                let p = parent[parent[v as usize] as usize];
                parent[v as usize] = p;
                v = p;
            }
            v
        }
        // adjacency entries (signed label index, target)
        let mut adj: Vec<Vec<(usize, u32)>> = vec![Vec::new(); n];
        for &(u, a, v) in &self.edges {
            adj[u as usize].push((2 * a, v));
            adj[v as usize].push((2 * a + 1, u));
        }
        let mut stack: Vec<u32> = (0..n as u32).collect();
        let mut slot = vec![NONE; 2 * r];
        while let Some(v0) = stack.pop() {
            let mut v = find(&mut parent, v0);
            loop {
                slot.iter_mut().for_each(|s| *s = NONE);
                let mut clash = None;
                for &(lab, t) in &adj[v as usize] {
                    let t = find(&mut parent, t);
                    if slot[lab] == NONE {
                        slot[lab] = t;
                    } else if slot[lab] != t {
                        clash = Some((slot[lab], t));
                        break;
                    }
                }
                match clash {
                    None => {
                        let mut entries = Vec::new();
                        for (lab, &t) in slot.iter().enumerate() {
                            if t != NONE {
                                entries.push((lab, t));
                            }
                        }
                        adj[v as usize] = entries;
                        break;
                    }
                    Some((a, b)) => {
                        let (big, small) = if adj[a as usize].len() >= adj[b as usize].len() { (a, b) } else { (b, a) };
                        parent[small as usize] = big;
                        let moved = std::mem::take(&mut adj[small as usize]);
                        adj[big as usize].extend(moved);
                        stack.push(big);
                        v = find(&mut parent, v);
                    }
                }
            }
        }
        let mut map = vec![NONE; n];
        let mut reps = Vec::new();
        for v in 0..n as u32 {
            let rv = find(&mut parent, v);
            if map[rv as usize] == NONE {
                map[rv as usize] = reps.len() as u32;
                reps.push(rv);
            }
        }
        let mut g = FoldedGraph::empty(r, reps.len());
        for (i, &rv) in reps.iter().enumerate() {
            for &(lab, t) in &adj[rv as usize] {
                if lab % 2 == 0 {
                    let t = map[find(&mut parent, t) as usize];
                    g.set_edge(i as u32, lab / 2, t);
                }
            }
        }
        let out = (0..n as u32).map(|v| map[find(&mut parent, v) as usize]).collect();
        (g, out)
    }
}

/// Folded automaton with a start and an accept vertex; recognises the set
/// of group elements read along start-to-accept paths.
#[derive(Debug, Clone)]
pub struct Automaton {
    pub graph: FoldedGraph,
    pub start: u32,
    pub accept: u32,
}

impl Automaton {
    /// Recognises `g · H · h`.
    pub fn coset(g: &Word, h_graph: &SubgroupGraph, h: &Word) -> Automaton {
        let mut b = GraphBuilder::new(h_graph.rank());
        let off = b.graph(&h_graph.graph);
        let s = b.vertex();
        let f = b.vertex();
        connect(&mut b, s, &g.reduced(), off);
        connect(&mut b, off, &h.reduced(), f);
        let (graph, map) = b.fold();
        Automaton { graph, start: map[s as usize], accept: map[f as usize] }
    }

    pub fn accepts(&self, w: &Word) -> bool {
        self.graph.read(self.start, &w.reduced()) == Some(self.accept)
    }
}

/// Path for `w` between `u` and `v`; an empty word identifies them.
fn connect(b: &mut GraphBuilder, u: u32, w: &Word, v: u32) {
    if w.is_empty() {
        if u != v {
            let z = b.vertex();
            b.edge(z, 1, u);
            b.edge(z, 1, v);
        }
    } else {
        b.path(u, w, v);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Index {
    Finite(usize),
    Infinite,
}

/// Core graph of a finitely generated subgroup; vertex 0 is the base.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SubgroupGraph {
    graph: FoldedGraph,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubgroupGraphJson {
    pub rank: usize,
    pub base: u32,
    pub edges: Vec<[i64; 3]>,
}

impl SubgroupGraph {
    fn normalize(graph: FoldedGraph, base: u32) -> SubgroupGraph {
        let (g, map) = graph.canonical_from(base);
        let (g, _) = g.prune(&[0]);
        debug_assert_eq!(map[base as usize], 0);
        SubgroupGraph { graph: g.canonical_from(0).0 }
    }

    pub fn from_generators(rank: usize, gens: &[Word]) -> SubgroupGraph {
        let mut b = GraphBuilder::new(rank);
        let base = b.vertex();
        for g in gens {
            let g = g.reduced();
            if !g.is_empty() {
                b.path(base, &g, base);
            }
        }
        let (graph, map) = b.fold();
        SubgroupGraph::normalize(graph, map[base as usize])
    }

    pub fn trivial(rank: usize) -> SubgroupGraph {
        SubgroupGraph { graph: FoldedGraph::empty(rank, 1) }
    }

    /// The whole free group: one vertex, one loop per generator.
    pub fn rose(rank: usize) -> SubgroupGraph {
        let gens: Vec<Word> = (1..=rank as i32).map(Word::letter).collect();
        SubgroupGraph::from_generators(rank, &gens)
    }

    /// Cover graph from a complete coset table (`table[v][a]` = v·a).
    pub fn from_table(rank: usize, table: &[Vec<u32>]) -> SubgroupGraph {
        let mut g = FoldedGraph::empty(rank, table.len());
        for (v, row) in table.iter().enumerate() {
            for (a, &t) in row.iter().enumerate() {
                g.set_edge(v as u32, a, t);
            }
        }
        SubgroupGraph::normalize(g, 0)
    }

    pub fn from_json(j: &SubgroupGraphJson) -> Result<SubgroupGraph, StallingsError> {
        let mut b = GraphBuilder::new(j.rank);
        let n = j.edges.iter().flat_map(|e| [e[0], e[2]]).chain([j.base as i64]).max().unwrap_or(0);
        for _ in 0..=n {
            b.vertex();
        }
        for e in &j.edges {
            let (u, l, v) = (e[0], e[1], e[2]);
            if u < 0 || v < 0 || l == 0 || l.unsigned_abs() as usize > j.rank {
                return Err(StallingsError::Malformed(format!("bad edge {e:?}")));
            }
            b.edge(u as u32, l as i32, v as u32);
        }
        let (graph, map) = b.fold();
        Ok(SubgroupGraph::normalize(graph, map[j.base as usize]))
    }

    pub fn to_json(&self) -> SubgroupGraphJson {
        SubgroupGraphJson {
            rank: self.rank(),
            base: 0,
            edges: self.graph.edges().map(|(u, a, v)| [u as i64, a as i64, v as i64]).collect(),
        }
    }

    pub fn graph(&self) -> &FoldedGraph {
        &self.graph
    }

    /// Rank of the ambient free group.
    pub fn rank(&self) -> usize {
        self.graph.rank
    }

    /// Rank of the subgroup: |E| − |V| + 1.
    pub fn subgroup_rank(&self) -> usize {
        self.graph.edge_count() + 1 - self.graph.vertex_count()
    }

    pub fn vertex_count(&self) -> usize {
        self.graph.vertex_count()
    }

    pub fn edge_count(&self) -> usize {
        self.graph.edge_count()
    }

    pub fn is_trivial(&self) -> bool {
        self.graph.edge_count() == 0
    }

    pub fn contains(&self, w: &Word) -> bool {
        self.graph.read(0, &w.reduced()) == Some(0)
    }

    /// Free basis from the breadth-first spanning tree.
    pub fn basis(&self) -> Vec<Word> {
        let paths = self.graph.geodesics(0);
        let n = self.vertex_count();
        let mut tree = HashSet::new();
        for v in 0..n as u32 {
            let p = paths[v as usize].as_ref().unwrap();
            if let Some(&l) = p.letters().last() {
                let prev = self.graph.step(v, -l).unwrap();
                tree.insert(if l > 0 { (prev, l, v) } else { (v, -l, prev) });
            }
        }
        self.graph
            .edges()
            .filter(|e| !tree.contains(e))
            .map(|(u, a, v)| {
                let pu = paths[u as usize].as_ref().unwrap();
                let pv = paths[v as usize].as_ref().unwrap();
                Word::mul_all([pu, &Word::letter(a), &pv.inverse()])
            })
            .collect()
    }

    pub fn is_cover(&self) -> bool {
        self.graph.is_complete()
    }

    pub fn index(&self) -> Index {
        if self.is_cover() {
            Index::Finite(self.vertex_count())
        } else {
            Index::Infinite
        }
    }

    /// Coset permutations `σ_a(v) = v·a` of a cover.
    pub fn permutations(&self) -> Result<Vec<Perm>, StallingsError> {
        if !self.is_cover() {
            return Err(StallingsError::InfiniteIndex);
        }
        let n = self.vertex_count();
        Ok((0..self.rank())
            .map(|a| {
                Perm::from_images((0..n).map(|v| self.graph.out[v * self.rank() + a]).collect())
                    .expect("complete folded graph gives permutations")
            })
            .collect())
    }

    pub fn intersect(&self, other: &SubgroupGraph) -> Result<SubgroupGraph, StallingsError> {
        if self.rank() != other.rank() {
            return Err(StallingsError::RankMismatch(self.rank(), other.rank()));
        }
        let g1 = &self.graph;
        let g2 = &other.graph;
        let mut index: HashMap<(u32, u32), u32> = HashMap::new();
        let mut pairs = vec![(0u32, 0u32)];
        index.insert((0, 0), 0);
        let mut edges = Vec::new();
        let mut i = 0;
        while i < pairs.len() {
            let (p, q) = pairs[i];
            for l in g1.letters() {
                if let (Some(p2), Some(q2)) = (g1.step(p, l), g2.step(q, l)) {
                    let next = *index.entry((p2, q2)).or_insert_with(|| {
                        pairs.push((p2, q2));
                        (pairs.len() - 1) as u32
                    });
                    if l > 0 {
                        edges.push((i as u32, l as usize - 1, next));
                    }
                }
            }
            i += 1;
        }
        let mut g = FoldedGraph::empty(self.rank(), pairs.len());
        for (u, a, v) in edges {
            g.set_edge(u, a, v);
        }
        Ok(SubgroupGraph::normalize(g, 0))
    }

    /// `c · H · c⁻¹`.
    pub fn conjugate(&self, c: &Word) -> SubgroupGraph {
        let gens: Vec<Word> = self.basis().iter().map(|b| c.conjugate(b)).collect();
        SubgroupGraph::from_generators(self.rank(), &gens)
    }

    /// Finite-index subgroup containing `H` as a free factor, obtained by
    /// completing each label's partial permutation on the core's vertices.
    pub fn hall_completion(&self) -> SubgroupGraph {
        let mut g = self.graph.clone();
        let n = g.vertex_count() as u32;
        let r = g.rank;
        for a in 0..r {
            let sources: Vec<u32> = (0..n).filter(|&v| g.out[v as usize * r + a] == NONE).collect();
            let targets: Vec<u32> = (0..n).filter(|&v| g.inn[v as usize * r + a] == NONE).collect();
            for (&u, &v) in sources.iter().zip(&targets) {
                g.set_edge(u, a, v);
            }
        }
        SubgroupGraph::normalize(g, 0)
    }

    /// Kernel of the coset action `F → Sym(F/H)`, as its Cayley-graph cover.
    pub fn normal_core(&self) -> Result<SubgroupGraph, StallingsError> {
        let perms = self.permutations()?;
        let n = self.vertex_count();
        let elements = crate::perm::closure(&perms, n, CAYLEY_CAP)
            .ok_or_else(|| StallingsError::BoundExceeded(format!("permutation image exceeds {CAYLEY_CAP} elements")))?;
        let pos: HashMap<&Perm, u32> = elements.iter().enumerate().map(|(i, p)| (p, i as u32)).collect();
        let table: Vec<Vec<u32>> = elements.iter().map(|e| perms.iter().map(|s| pos[&e.then(s)]).collect()).collect();
        Ok(SubgroupGraph::from_table(self.rank(), &table))
    }

    /// Whether `H` is normal: every conjugate of a basis element by a
    /// generator stays inside.
    pub fn is_normal(&self) -> bool {
        let basis = self.basis();
        (1..=self.rank() as i32).all(|a| {
            let x = Word::letter(a);
            basis.iter().all(|b| self.contains(&x.conjugate(b)) && self.contains(&x.inverse().conjugate(b)))
        })
    }

    /// Unbased core and the label of a path from the base into it.
    pub fn cyclic_core(&self) -> (FoldedGraph, Word) {
        if self.is_trivial() {
            return (self.graph.clone(), Word::empty());
        }
        let (core, map) = self.graph.prune(&[]);
        let paths = self.graph.geodesics(0);
        let (v, _) = map
            .iter()
            .enumerate()
            .filter(|(_, &m)| m != NONE)
            .map(|(v, &m)| (v, m))
            .min_by_key(|(v, _)| paths[*v].as_ref().map(|p| p.len()).unwrap_or(usize::MAX))
            .unwrap();
        let (core, _) = core.canonical_from(map[v]);
        (core, paths[v].clone().unwrap())
    }
}

const CAYLEY_CAP: usize = 2_000_000;

/// `q ∈ H1 · g · H2`.
pub fn double_coset_contains(h1: &SubgroupGraph, g: &Word, h2: &SubgroupGraph, q: &Word) -> bool {
    // q = h1 g h2  iff  H1 meets q H2 g⁻¹
    coset_intersection(h1, q, h2, &g.inverse()).is_some()
}

/// Shortest element of `A ∩ g·B·h`, if any.
pub fn coset_intersection(a: &SubgroupGraph, g: &Word, b: &SubgroupGraph, h: &Word) -> Option<Word> {
    let m = Automaton::coset(g, b, h);
    let ga = a.graph();
    let gm = &m.graph;
    let start = (0u32, m.start);
    let goal = (0u32, m.accept);
    let mut prev: ProductParents = HashMap::new();
    prev.insert(start, None);
    let mut queue = VecDeque::from([start]);
    while let Some(cur) = queue.pop_front() {
        if cur == goal {
            let mut letters = Vec::new();
            let mut c = cur;
            while let Some(Some((p, l))) = prev.get(&c) {
                letters.push(*l);
                c = *p;
            }
            letters.reverse();
            return Some(Word::from_letters(letters));
        }
        for l in ga.letters() {
            if let (Some(x), Some(y)) = (ga.step(cur.0, l), gm.step(cur.1, l)) {
                if let std::collections::hash_map::Entry::Vacant(e) = prev.entry((x, y)) {
                    e.insert(Some((cur, l)));
                    queue.push_back((x, y));
                }
            }
        }
    }
    None
}

/// A nontrivial element `element ∈ A ∩ g·B·g⁻¹` for family members `A`, `B`
/// (`first`, `second`), with `first ≠ second` or `g ∉ A`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MalnormalWitness {
    pub first: usize,
    pub second: usize,
    pub conjugator: Word,
    pub element: Word,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MalnormalVerdict {
    pub malnormal: bool,
    pub witness: Option<MalnormalWitness>,
}

/// Union-find over product vertices, dense when small enough.
struct ProductComponents {
    n2: usize,
    parent: Vec<u32>,
}

impl ProductComponents {
    fn find(&mut self, mut v: u32) -> u32 {
        while self.parent[v as usize] != v {
            let p = self.parent[self.parent[v as usize] as usize];
            self.parent[v as usize] = p;
            v = p;
        }
        v
    }
}

/// Searches the full fiber product of two core graphs for a component
/// carrying a cycle. When `same` is set, the diagonal component is skipped.
fn product_cycle(g1: &FoldedGraph, g2: &FoldedGraph, same: bool) -> Option<(u32, u32)> {
    let (n1, n2) = (g1.vertex_count(), g2.vertex_count());
    let total = n1 * n2;
    if total > u32::MAX as usize {
        return None;
    }
    let mut uf = ProductComponents { n2, parent: (0..total as u32).collect() };
    let mut edge_count: Vec<u32> = vec![0; total];
    let mut touched = vec![false; total];
    let r = g1.rank;
    let mut by_label1: Vec<Vec<(u32, u32)>> = vec![Vec::new(); r];
    let mut by_label2: Vec<Vec<(u32, u32)>> = vec![Vec::new(); r];
    for (u, a, v) in g1.edges() {
        by_label1[a as usize - 1].push((u, v));
    }
    for (u, a, v) in g2.edges() {
        by_label2[a as usize - 1].push((u, v));
    }
    let id = |p: u32, q: u32| p * n2 as u32 + q;
    let mut edge_list: Vec<(u32, u32)> = Vec::new();
    for a in 0..r {
        for &(u1, v1) in &by_label1[a] {
            for &(u2, v2) in &by_label2[a] {
                let (x, y) = (id(u1, u2), id(v1, v2));
                touched[x as usize] = true;
                touched[y as usize] = true;
                let (rx, ry) = (uf.find(x), uf.find(y));
                if rx != ry {
                    uf.parent[rx as usize] = ry;
                }
                edge_list.push((x, y));
            }
        }
    }
    for &(x, _) in &edge_list {
        let rx = uf.find(x);
        edge_count[rx as usize] += 1;
    }
    let mut vertex_count: Vec<u32> = vec![0; total];
    for v in 0..total as u32 {
        if touched[v as usize] {
            let rv = uf.find(v);
            vertex_count[rv as usize] += 1;
        }
    }
    let diag = if same { Some(uf.find(0)) } else { None };
    // best witness vertex over all cyclic components, by conjugator length/order
    let mut cyclic_roots = HashSet::new();
    for v in 0..total as u32 {
        if touched[v as usize]
            && uf.find(v) == v
            && Some(v) != diag
            && edge_count[v as usize] >= vertex_count[v as usize]
        {
            cyclic_roots.insert(v);
        }
    }
    if cyclic_roots.is_empty() {
        return None;
    }
    let p1 = g1.geodesics(0);
    let p2 = g2.geodesics(0);
    let mut best: Option<(Word, u32, u32)> = None;
    for v in 0..total as u32 {
        if !touched[v as usize] || !cyclic_roots.contains(&uf.find(v)) {
            continue;
        }
        let (p, q) = (v / uf.n2 as u32, v % uf.n2 as u32);
        let g = p1[p as usize].as_ref().unwrap().mul(&p2[q as usize].as_ref().unwrap().inverse());
        let better = match &best {
            None => true,
            Some((b, _, _)) => cmp_words(&g, b) == std::cmp::Ordering::Less,
        };
        if better {
            best = Some((g, p, q));
        }
    }
    best.map(|(_, p, q)| (p, q))
}

/// A reduced nontrivial closed path at `(p, q)` in the product graph.
fn product_loop(g1: &FoldedGraph, g2: &FoldedGraph, p: u32, q: u32) -> Word {
    let mut parent: ProductParents = HashMap::new();
    parent.insert((p, q), None);
    let mut queue = VecDeque::from([(p, q)]);
    let path_to = |parent: &ProductParents, mut c: (u32, u32)| {
        let mut letters = Vec::new();
        while let Some(Some((pr, l))) = parent.get(&c) {
            letters.push(*l);
            c = *pr;
        }
        letters.reverse();
        Word::from_letters(letters)
    };
    while let Some(cur) = queue.pop_front() {
        for l in g1.letters() {
            if let (Some(x), Some(y)) = (g1.step(cur.0, l), g2.step(cur.1, l)) {
                let nxt = (x, y);
                match parent.get(&nxt) {
                    None => {
                        parent.insert(nxt, Some((cur, l)));
                        queue.push_back(nxt);
                    }
                    Some(par) => {
                        // skip the tree edge back to the parent
                        let is_tree_back = matches!(par, Some((pp, pl)) if *pp == cur && *pl == l)
                            || matches!(parent.get(&cur), Some(Some((pp, pl))) if *pp == nxt && *pl == -l);
                        if !is_tree_back {
                            let a = path_to(&parent, cur);
                            let b = path_to(&parent, nxt);
                            return Word::mul_all([&a, &Word::letter(l), &b.inverse()]);
                        }
                    }
                }
            }
        }
    }
    Word::empty()
}

/// Decides whether the family is malnormal: for members `A`, `B` and any
/// `g`, `A ∩ g B g⁻¹ ≠ 1` only when `A`, `B` are the same member and `g ∈ A`.
pub fn is_malnormal_family(family: &[SubgroupGraph]) -> Result<MalnormalVerdict, StallingsError> {
    if let Some(first) = family.first() {
        for (i, h) in family.iter().enumerate() {
            if h.rank() != first.rank() {
                return Err(StallingsError::RankMismatch(first.rank(), h.rank()));
            }
            if h.is_trivial() {
                return Err(StallingsError::TrivialMember(i));
            }
        }
    }
    for i in 0..family.len() {
        for j in i..family.len() {
            let (g1, g2) = (family[i].graph(), family[j].graph());
            if let Some((p, q)) = product_cycle(g1, g2, i == j) {
                let p1 = g1.geodesics(0);
                let p2 = g2.geodesics(0);
                let pu = p1[p as usize].clone().unwrap();
                let qv = p2[q as usize].clone().unwrap();
                let lp = product_loop(g1, g2, p, q);
                return Ok(MalnormalVerdict {
                    malnormal: false,
                    witness: Some(MalnormalWitness {
                        first: i,
                        second: j,
                        conjugator: pu.mul(&qv.inverse()),
                        element: pu.conjugate(&lp),
                    }),
                });
            }
        }
    }
    Ok(MalnormalVerdict { malnormal: true, witness: None })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FreeFactorWitness {
    /// Words that together with any basis of `H` form a basis of `F`.
    Extension { words: Vec<Word> },
    /// A basis of an automorphic image of `H` whose core is Whitehead-minimal.
    Minimal { basis: Vec<Word>, core_edges: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FreeFactorCertificate {
    pub verdict: bool,
    pub witness: FreeFactorWitness,
}

/// Type II Whitehead automorphisms of `F_r` as generator images, in a fixed
/// order. Each comes with its inverse.
fn whitehead_automorphisms(rank: usize) -> Vec<(Vec<Word>, Vec<Word>)> {
    let mut out = Vec::new();
    let others = rank - 1;
    for m in (1..=rank as i32).flat_map(|a| [a, -a]) {
        for code in 1..4usize.pow(others as u32) {
            let build = |mult: i32| {
                let mut c = code;
                let mut images = Vec::with_capacity(rank);
                for g in 1..=rank as i32 {
                    if g == mult.abs() {
                        images.push(Word::letter(g));
                        continue;
                    }
                    let choice = c % 4;
                    c /= 4;
                    let x = Word::letter(g);
                    let mw = Word::letter(mult);
                    let mi = Word::letter(-mult);
                    images.push(match choice {
                        0 => x,
                        1 => x.mul(&mw),
                        2 => mi.mul(&x),
                        _ => Word::mul_all([&mi, &x, &mw]),
                    });
                }
                images
            };
            out.push((build(m), build(-m)));
        }
    }
    out
}

fn core_size(rank: usize, gens: &[Word]) -> usize {
    SubgroupGraph::from_generators(rank, gens).cyclic_core().0.edge_count()
}

/// Free-factor decision by greedy Whitehead minimisation of the core graph.
pub fn is_free_factor(h: &SubgroupGraph) -> Result<FreeFactorCertificate, StallingsError> {
    let r = h.rank();
    let k = h.subgroup_rank();
    if k > r {
        return Err(StallingsError::RankTooLarge { sub: k, ambient: r });
    }
    if r > 5 {
        return Err(StallingsError::BoundExceeded(format!("Whitehead search in rank {r}")));
    }
    let autos = whitehead_automorphisms(r);
    let mut basis = h.basis();
    let mut inverse: Vec<Word> = (1..=r as i32).map(Word::letter).collect();
    let mut cost = core_size(r, &basis);
    'outer: loop {
        if cost <= k {
            break;
        }
        for (fwd, bwd) in &autos {
            let cand: Vec<Word> = basis.iter().map(|b| b.substitute(fwd)).collect();
            let c = core_size(r, &cand);
            if c < cost {
                basis = cand;
                cost = c;
                // ψ ← ψ ∘ w⁻¹
                inverse = bwd.iter().map(|w| w.substitute(&inverse)).collect();
                continue 'outer;
            }
        }
        break;
    }
    let image = SubgroupGraph::from_generators(r, &basis);
    let (core, path) = image.cyclic_core();
    if core.vertex_count() == 1 && core.edge_count() == k {
        let used: HashSet<i32> = core.edges().map(|(_, a, _)| a).collect();
        let words: Vec<Word> = (1..=r as i32)
            .filter(|a| !used.contains(a))
            .map(|a| path.conjugate(&Word::letter(a)).substitute(&inverse))
            .collect();
        let mut all = h.basis();
        all.extend(words.iter().cloned());
        let check = SubgroupGraph::from_generators(r, &all);
        debug_assert!(check == SubgroupGraph::rose(r) && all.len() == r);
        if check == SubgroupGraph::rose(r) && all.len() == r {
            return Ok(FreeFactorCertificate { verdict: true, witness: FreeFactorWitness::Extension { words } });
        }
    }
    Ok(FreeFactorCertificate { verdict: false, witness: FreeFactorWitness::Minimal { basis, core_edges: cost } })
}

/// Largest index enumerated for a given ambient rank.
fn enumeration_bound(rank: usize) -> usize {
    match rank {
        0 | 1 => 12,
        2 => 7,
        3 => 5,
        4 => 4,
        _ => 3,
    }
}

/// Every subgroup of index exactly `n`, as cover graphs, in canonical
/// coset-table order.
pub fn subgroups_of_index(rank: usize, n: usize) -> Result<Vec<SubgroupGraph>, StallingsError> {
    if n == 0 {
        return Err(StallingsError::Malformed("index must be positive".into()));
    }
    if n > enumeration_bound(rank) {
        return Err(StallingsError::BoundExceeded(format!("subgroup enumeration at index {n} in rank {rank}")));
    }
    let mut out = Vec::new();
    enumerate_tables(rank, n, |t| {
        out.push(SubgroupGraph::from_table(rank, t));
    });
    Ok(out)
}

/// Enumerates transitive coset tables on `n` points with basepoint 0, each
/// conjugacy-free labelling exactly once (new cosets numbered in scan order).
pub fn enumerate_tables(rank: usize, n: usize, mut emit: impl FnMut(&[Vec<u32>])) {
    let mut fwd = vec![vec![NONE; rank]; n];
    let mut bwd = vec![vec![NONE; rank]; n];
    fn rec(
        rank: usize,
        n: usize,
        used: usize,
        fwd: &mut Vec<Vec<u32>>,
        bwd: &mut Vec<Vec<u32>>,
        emit: &mut dyn FnMut(&[Vec<u32>]),
    ) {
        // first empty slot in scan order (coset, x, x⁻¹, y, y⁻¹, …)
        let mut slot = None;
        'scan: for c in 0..used {
            for a in 0..rank {
                if fwd[c][a] == NONE {
                    slot = Some((c, a, true));
                    break 'scan;
                }
                if bwd[c][a] == NONE {
                    slot = Some((c, a, false));
                    break 'scan;
                }
            }
        }
        let Some((c, a, forward)) = slot else {
            if used == n {
                emit(fwd);
            }
            return;
        };
        let limit = if used < n { used + 1 } else { used };
        for d in 0..limit {
            let new_used = if d == used { used + 1 } else { used };
            if forward {
                if bwd[d][a] != NONE {
                    continue;
                }
                fwd[c][a] = d as u32;
                bwd[d][a] = c as u32;
                rec(rank, n, new_used, fwd, bwd, emit);
                fwd[c][a] = NONE;
                bwd[d][a] = NONE;
            } else {
                if fwd[d][a] != NONE {
                    continue;
                }
                bwd[c][a] = d as u32;
                fwd[d][a] = c as u32;
                rec(rank, n, new_used, fwd, bwd, emit);
                bwd[c][a] = NONE;
                fwd[d][a] = NONE;
            }
        }
    }
    rec(rank, n, 1, &mut fwd, &mut bwd, &mut emit);
}

const CHARACTERISTIC_CAP: usize = 3_000_000;

/// Intersection of all index-`n` subgroups of `F_rank`.
pub fn characteristic_core(rank: usize, n: usize) -> Result<SubgroupGraph, StallingsError> {
    let ok = matches!((rank, n), (_, 1) | (1, _) | (2, 2..=4) | (3, 2..=3));
    if !ok {
        return Err(StallingsError::BoundExceeded(format!("characteristic core at index {n} in rank {rank}")));
    }
    let subs = subgroups_of_index(rank, n)?;
    let perms: Vec<Vec<Perm>> = subs.iter().map(|s| s.permutations().unwrap()).collect();
    // orbit of the tuple of basepoints under the product action
    let start: Vec<u8> = vec![0; subs.len()];
    let mut index: HashMap<Vec<u8>, u32> = HashMap::new();
    index.insert(start.clone(), 0);
    let mut states = vec![start];
    let mut table: Vec<Vec<u32>> = Vec::new();
    let mut i = 0;
    while i < states.len() {
        let mut row = Vec::with_capacity(rank);
        for a in 0..rank {
            let next: Vec<u8> = states[i].iter().zip(&perms).map(|(&p, ps)| ps[a].apply(p as u32) as u8).collect();
            let id = match index.get(&next) {
                Some(&id) => id,
                None => {
                    if states.len() >= CHARACTERISTIC_CAP {
                        return Err(StallingsError::BoundExceeded(format!(
                            "characteristic core index exceeds {CHARACTERISTIC_CAP}"
                        )));
                    }
                    let id = states.len() as u32;
                    index.insert(next.clone(), id);
                    states.push(next);
                    id
                }
            };
            row.push(id);
        }
        table.push(row);
        i += 1;
    }
    Ok(SubgroupGraph::from_table(rank, &table))
}

/// Edge values are words in a free group on the chosen generators; the
/// product along a base loop expresses that loop in those generators.
#[derive(Debug, Clone)]
pub struct CoordinateGraph {
    rank: usize,
    generators: usize,
    // (from, label 0-based, to, value)
    edges: Vec<(u32, usize, u32, Word)>,
    out: HashMap<(u32, usize), usize>,
    inn: HashMap<(u32, usize), usize>,
}

impl CoordinateGraph {
    /// Requires `gens` to be a free basis of the subgroup they generate.
    pub fn new(rank: usize, gens: &[Word]) -> Result<CoordinateGraph, StallingsError> {
        let mut edges: Vec<Option<(u32, usize, u32, Word)>> = Vec::new();
        let mut next_vertex = 1u32;
        for (i, g) in gens.iter().enumerate() {
            let g = g.reduced();
            if g.is_empty() {
                return Err(StallingsError::NotFree);
            }
            let mut cur = 0;
            for (j, &l) in g.letters().iter().enumerate() {
                let nxt = if j + 1 == g.len() {
                    0
                } else {
                    next_vertex += 1;
                    next_vertex - 1
                };
                let value = if j == 0 { Word::letter(i as i32 + 1) } else { Word::empty() };
                if l > 0 {
                    edges.push(Some((cur, l as usize - 1, nxt, value)));
                } else {
                    edges.push(Some((nxt, (-l) as usize - 1, cur, value.inverse())));
                }
                cur = nxt;
            }
        }
        loop {
            let mut out: HashMap<(u32, usize), usize> = HashMap::new();
            let mut inn: HashMap<(u32, usize), usize> = HashMap::new();
            let mut clash = None;
            for (idx, e) in edges.iter().enumerate() {
                let Some((u, a, v, _)) = e else { continue };
                if let Some(&o) = out.get(&(*u, *a)) {
                    clash = Some((o, idx, true));
                    break;
                }
                out.insert((*u, *a), idx);
                if let Some(&o) = inn.get(&(*v, *a)) {
                    clash = Some((o, idx, false));
                    break;
                }
                inn.insert((*v, *a), idx);
            }
            let Some((i1, i2, same_source)) = clash else {
                let edges: Vec<_> = edges.into_iter().flatten().collect();
                let mut out = HashMap::new();
                let mut inn = HashMap::new();
                for (i, (u, a, v, _)) in edges.iter().enumerate() {
                    out.insert((*u, *a), i);
                    inn.insert((*v, *a), i);
                }
                return Ok(CoordinateGraph { rank, generators: gens.len(), edges, out, inn });
            };
            let (u1, _, v1, w1) = edges[i1].clone().unwrap();
            let (u2, _, v2, w2) = edges[i2].clone().unwrap();
            let (keep_v, drop_v, h, val_ok) = if same_source {
                (v1, v2, w2.inverse().mul(&w1), v1 != v2 || w1 == w2)
            } else {
                (u1, u2, w2.mul(&w1.inverse()), u1 != u2 || w1 == w2)
            };
            if !val_ok {
                return Err(StallingsError::NotFree);
            }
            if keep_v == drop_v {
                edges[i2] = None;
                continue;
            }
            let (keep_v, drop_v, h) = if drop_v == 0 {
                // never re-gauge the base; gauge the other endpoint instead
                (drop_v, keep_v, h.inverse())
            } else {
                (keep_v, drop_v, h)
            };
            for e in edges.iter_mut().flatten() {
                if e.2 == drop_v {
                    e.3 = e.3.mul(&h);
                }
                if e.0 == drop_v {
                    e.3 = h.inverse().mul(&e.3);
                }
            }
            edges[i2] = None;
            for e in edges.iter_mut().flatten() {
                if e.0 == drop_v {
                    e.0 = keep_v;
                }
                if e.2 == drop_v {
                    e.2 = keep_v;
                }
            }
            // duplicates of e1 created by renaming are removed on the next pass
            let _ = (u1, u2);
        }
    }

    pub fn generators(&self) -> usize {
        self.generators
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Expresses `w` in the generators, or `None` when `w` is not in the subgroup.
    pub fn coordinates(&self, w: &Word) -> Option<Word> {
        let mut v = 0u32;
        let mut acc = Word::empty();
        for &l in w.reduced().letters() {
            if l > 0 {
                let &i = self.out.get(&(v, l as usize - 1))?;
                acc = acc.mul(&self.edges[i].3);
                v = self.edges[i].2;
            } else {
                let &i = self.inn.get(&(v, (-l) as usize - 1))?;
                acc = acc.mul(&self.edges[i].3.inverse());
                v = self.edges[i].0;
            }
        }
        (v == 0).then_some(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::free_words::Alphabet;

    fn w(s: &str) -> Word {
        Alphabet::new(2).parse(s).unwrap()
    }

    fn sub(gens: &[&str]) -> SubgroupGraph {
        SubgroupGraph::from_generators(2, &gens.iter().map(|s| w(s)).collect::<Vec<_>>())
    }

    #[test]
    fn fold_examples() {
        let h = sub(&["x"]);
        assert_eq!((h.vertex_count(), h.edge_count(), h.subgroup_rank()), (1, 1, 1));
        let h = sub(&["xx", "y"]);
        assert_eq!((h.vertex_count(), h.edge_count(), h.subgroup_rank()), (2, 3, 2));
        let x_edges = h.graph().edges().filter(|e| e.1 == 1).count();
        assert_eq!(x_edges, 2);
        assert_eq!(h.graph().step(0, 2), Some(0));
        assert_eq!(sub(&["x", "X"]), sub(&["x"]));
    }

    #[test]
    fn folding_collapses_nested_words() {
        let h = sub(&["xyX", "xyyX"]);
        // both conjugates share the x-hair; core is a y-loop at the hair end
        assert_eq!(h.subgroup_rank(), 1);
        assert!(h.contains(&w("xyX")));
        assert!(!h.contains(&w("y")));
    }

    #[test]
    fn membership_examples() {
        let h = sub(&["xx", "y"]);
        assert!(h.contains(&w("xx")));
        assert!(!h.contains(&w("x")));
        assert!(sub(&["x"]).contains(&w("xxx")));
    }

    #[test]
    fn basis_examples() {
        let h = sub(&["xx", "y"]);
        let b = h.basis();
        assert_eq!(b.len(), 2);
        assert_eq!(SubgroupGraph::from_generators(2, &b), h);
        assert_eq!(sub(&["x"]).basis(), vec![w("x")]);
        assert_eq!(SubgroupGraph::rose(2).basis().len(), 2);
    }

    #[test]
    fn index_examples() {
        // kernel of x ↦ 1, y ↦ 0 in Z/2
        let k = sub(&["xx", "y", "xyX"]);
        assert_eq!(k.index(), Index::Finite(2));
        assert_eq!(sub(&["xx", "y"]).index(), Index::Infinite);
        assert_eq!(SubgroupGraph::rose(2).index(), Index::Finite(1));
    }

    #[test]
    fn intersection_examples() {
        assert_eq!(sub(&["x"]).intersect(&sub(&["xx", "y"])).unwrap(), sub(&["xx"]));
        assert!(sub(&["x"]).intersect(&sub(&["y"])).unwrap().is_trivial());
        let h = sub(&["xyX", "yy"]);
        assert_eq!(h.intersect(&h).unwrap(), h);
    }

    #[test]
    fn double_coset_examples() {
        let hx = sub(&["x"]);
        let hy = sub(&["y"]);
        assert!(double_coset_contains(&hx, &w("y"), &hy, &w("xxxyyy")));
        assert!(!double_coset_contains(&hx, &w("y"), &hy, &w("yx")));
        let h = sub(&["xy", "yyx"]);
        assert!(double_coset_contains(&h, &w("xY"), &hx, &w("xY")));
        assert!(double_coset_contains(&hx, &Word::empty(), &hy, &w("xy")));
    }

    #[test]
    fn malnormal_examples() {
        let v = is_malnormal_family(&[sub(&["x"]), sub(&["y"])]).unwrap();
        assert!(v.malnormal);
        let v = is_malnormal_family(&[sub(&["xx"])]).unwrap();
        assert!(!v.malnormal);
        let wit = v.witness.unwrap();
        assert_eq!(wit.conjugator, w("x"));
        let v = is_malnormal_family(&[sub(&["x"]), sub(&["x"])]).unwrap();
        assert!(!v.malnormal);
        assert_eq!(v.witness.unwrap().second, 1);
        assert!(matches!(
            is_malnormal_family(&[sub(&["x"]), SubgroupGraph::trivial(2)]),
            Err(StallingsError::TrivialMember(1))
        ));
    }

    #[test]
    fn free_factor_examples() {
        let c = is_free_factor(&sub(&["x"])).unwrap();
        assert!(c.verdict);
        assert_eq!(c.witness, FreeFactorWitness::Extension { words: vec![w("y")] });
        assert!(!is_free_factor(&sub(&["xx"])).unwrap().verdict);
        let c = is_free_factor(&sub(&["xy"])).unwrap();
        assert!(c.verdict);
        let FreeFactorWitness::Extension { words } = c.witness else { panic!() };
        assert_eq!(SubgroupGraph::from_generators(2, &[vec![w("xy")], words].concat()), SubgroupGraph::rose(2));
        assert!(!is_free_factor(&sub(&["xyXY"])).unwrap().verdict);
        assert!(is_free_factor(&SubgroupGraph::rose(2)).unwrap().verdict);
        assert!(is_free_factor(&sub(&["xyX"])).unwrap().verdict);
        assert!(!is_free_factor(&sub(&["xyxY"])).unwrap().verdict);
    }

    #[test]
    fn free_factor_rank_error() {
        let h = SubgroupGraph::from_generators(1, &[Word::letter(1)]);
        assert!(is_free_factor(&h).unwrap().verdict);
        let k = sub(&["xx", "y", "xyX"]);
        assert!(matches!(is_free_factor(&k), Err(StallingsError::RankTooLarge { .. })));
    }

    #[test]
    fn hall_examples() {
        let h = sub(&["xx", "y"]);
        let b = h.hall_completion();
        assert!(b.is_cover());
        assert_eq!(b.index(), Index::Finite(2));
        assert_eq!(b.subgroup_rank(), 3);
        assert!(h.basis().iter().all(|g| b.contains(g)));
        let f = sub(&["x"]).hall_completion();
        assert_eq!(f, SubgroupGraph::rose(2));
        let k = sub(&["xx", "y", "xyX"]);
        assert_eq!(k.hall_completion(), k);
    }

    #[test]
    fn normal_core_examples() {
        let k = sub(&["xx", "y", "xyX"]);
        assert_eq!(k.normal_core().unwrap(), k);
        // stabilizer of a point for x ↦ (123), y ↦ (12)
        let table = vec![vec![1, 1], vec![2, 0], vec![0, 2]];
        let h = SubgroupGraph::from_table(2, &table);
        assert_eq!(h.index(), Index::Finite(3));
        let n = h.normal_core().unwrap();
        assert_eq!(n.index(), Index::Finite(6));
        assert!(n.is_normal());
        let r = SubgroupGraph::rose(2);
        assert_eq!(r.normal_core().unwrap(), r);
        assert_eq!(sub(&["x"]).normal_core(), Err(StallingsError::InfiniteIndex));
    }

    #[test]
    fn index_enumeration_counts() {
        assert_eq!(subgroups_of_index(2, 1).unwrap(), vec![SubgroupGraph::rose(2)]);
        assert_eq!(subgroups_of_index(2, 2).unwrap().len(), 3);
        assert_eq!(subgroups_of_index(2, 3).unwrap().len(), 13);
        assert_eq!(subgroups_of_index(2, 4).unwrap().len(), 71);
        assert_eq!(subgroups_of_index(1, 5).unwrap().len(), 1);
        assert!(subgroups_of_index(2, 9).is_err());
    }

    #[test]
    fn characteristic_core_examples() {
        let c = characteristic_core(2, 2).unwrap();
        assert_eq!(c.index(), Index::Finite(4));
        assert_eq!(c.subgroup_rank(), 5);
        assert_eq!(characteristic_core(2, 1).unwrap(), SubgroupGraph::rose(2));
        assert!(characteristic_core(2, 5).is_err());
    }

    #[test]
    fn json_round_trip() {
        let h = sub(&["xx", "yxY"]);
        let j = h.to_json();
        assert_eq!(SubgroupGraph::from_json(&j).unwrap(), h);
        let text = serde_json::to_string(&j).unwrap();
        let back: SubgroupGraphJson = serde_json::from_str(&text).unwrap();
        assert_eq!(back, j);
    }

    #[test]
    fn coordinates_recover_generators() {
        let gens = vec![w("xxy"), w("xyX"), w("yyx")];
        let cg = CoordinateGraph::new(2, &gens).unwrap();
        for (i, g) in gens.iter().enumerate() {
            assert_eq!(cg.coordinates(g), Some(Word::letter(i as i32 + 1)));
        }
        let prod = Word::mul_all([&gens[0], &gens[2].inverse(), &gens[1], &gens[1]]);
        let c = cg.coordinates(&prod).unwrap();
        assert_eq!(c.substitute(&gens), prod);
        assert_eq!(cg.coordinates(&w("x")), None);
        assert!(CoordinateGraph::new(2, &[w("x"), w("x")]).is_err());
    }

    #[test]
    fn coset_intersection_finds_elements() {
        let a = sub(&["x"]);
        let b = sub(&["y"]);
        assert_eq!(coset_intersection(&a, &Word::empty(), &b, &w("xx")), Some(w("xx")));
        assert_eq!(coset_intersection(&a, &w("y"), &b, &w("x")), Some(w("x")));
        assert_eq!(coset_intersection(&a, &w("y"), &sub(&["xx"]), &Word::empty()), None);
    }
}
