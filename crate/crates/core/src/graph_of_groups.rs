//! Finite graphs of free groups, paths in them, and Britton normal forms.
//!
//! A positive step along edge `e` goes from `e.to` to `e.from`, so that the
//! stable letter conjugates the from-side image onto the to-side image:
//! `t · map_from(c) · t⁻¹ = map_to(c)`. Elements of the fundamental group are
//! loops at vertex 0.

use std::collections::VecDeque;
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::free_words::{cyclic_core, primitive_root, Alphabet, Word, WordError, WordSpec};
use crate::presentation::Presentation;
use crate::stallings::{
    coset_intersection, is_free_factor, is_malnormal_family, CoordinateGraph, FreeFactorCertificate, StallingsError,
    SubgroupGraph,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GogError {
    #[error("graph has no vertices")]
    NoVertices,
    #[error("vertex {0} has rank 0")]
    ZeroRank(usize),
    #[error("edge {edge} refers to missing vertex {vertex}")]
    MissingVertex { edge: usize, vertex: usize },
    #[error("underlying graph is not connected")]
    Disconnected,
    #[error("invalid spanning tree: {0}")]
    BadTree(String),
    #[error("edge {edge}, {side} side: {reason}")]
    Invalid { edge: usize, side: Side, reason: String },
    #[error("bad generator names: {0}")]
    Names(String),
    #[error(transparent)]
    Word(#[from] WordError),
    #[error(transparent)]
    Stallings(#[from] StallingsError),
    #[error("graph of groups is not certified 1-acylindrical")]
    NotAcylindrical,
    #[error("element is trivial")]
    TrivialElement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    From,
    To,
}

impl Side {
    fn index(self) -> usize {
        match self {
            Side::From => 0,
            Side::To => 1,
        }
    }

    fn other(self) -> Side {
        match self {
            Side::From => Side::To,
            Side::To => Side::From,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::From => "from",
            Side::To => "to",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexJson {
    pub rank: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub names: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeJson {
    pub from: usize,
    pub to: usize,
    pub edge_rank: usize,
    pub map_from: Vec<WordSpec>,
    pub map_to: Vec<WordSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphOfGroupsJson {
    pub vertices: Vec<VertexJson>,
    #[serde(default)]
    pub edges: Vec<EdgeJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spanning_tree: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vertex {
    pub rank: usize,
    pub names: Option<Vec<char>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub map_from: Vec<Word>,
    pub map_to: Vec<Word>,
    pub name: Option<char>,
}

impl Edge {
    pub fn rank(&self) -> usize {
        self.map_from.len()
    }

    pub fn map(&self, side: Side) -> &[Word] {
        match side {
            Side::From => &self.map_from,
            Side::To => &self.map_to,
        }
    }

    pub fn vertex(&self, side: Side) -> usize {
        match side {
            Side::From => self.from,
            Side::To => self.to,
        }
    }
}

/// One end of an edge, as a member of the family at its vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EdgeEnd {
    pub edge: usize,
    pub side: Side,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Step {
    pub edge: usize,
    pub positive: bool,
}

impl Step {
    pub fn reverse(self) -> Step {
        Step { edge: self.edge, positive: !self.positive }
    }

    /// The side whose image sits at the vertex the step arrives at.
    pub fn arrive_side(self) -> Side {
        if self.positive {
            Side::From
        } else {
            Side::To
        }
    }

    pub fn depart_side(self) -> Side {
        self.arrive_side().other()
    }
}

/// Path `g₀ s₁ g₁ … s_k g_k`; `syllables.len() == steps.len() + 1`, each
/// syllable a word in the vertex group it sits at.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GPath {
    pub start: usize,
    pub syllables: Vec<Word>,
    pub steps: Vec<Step>,
}

pub type GElement = GPath;

impl GPath {
    pub fn identity(vertex: usize) -> GPath {
        GPath { start: vertex, syllables: vec![Word::empty()], steps: Vec::new() }
    }

    pub fn vertex_element(vertex: usize, w: Word) -> GPath {
        GPath { start: vertex, syllables: vec![w.reduced()], steps: Vec::new() }
    }

    pub fn step_count(&self) -> usize {
        self.steps.len()
    }

    pub fn is_trivial_syntactically(&self) -> bool {
        self.steps.is_empty() && self.syllables[0].is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementKind {
    Elliptic,
    Hyperbolic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementClass {
    pub kind: ElementKind,
    pub translation_length: usize,
    pub vertex: Option<usize>,
}

/// `el = prefix · core · prefix⁻¹` with `core` a cyclically reduced loop at
/// `prefix`'s end. Hyperbolic cores end with an empty syllable; elliptic
/// cores are a single cyclically reduced syllable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CyclicForm {
    pub prefix: GPath,
    pub core: GPath,
}

impl CyclicForm {
    pub fn vertex(&self) -> usize {
        self.core.start
    }

    pub fn translation_length(&self) -> usize {
        self.core.steps.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeCleanCertificate {
    pub edge: usize,
    pub side: Side,
    pub certificate: FreeFactorCertificate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanReport {
    pub clean: bool,
    pub edges: Vec<EdgeCleanCertificate>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcylindricityWitness {
    pub vertex: usize,
    pub first: EdgeEnd,
    pub second: EdgeEnd,
    pub conjugator: Word,
    pub element: Word,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcylindricityReport {
    pub acylindrical: bool,
    pub witness: Option<AcylindricityWitness>,
}

#[derive(Debug)]
struct SideData {
    graph: SubgroupGraph,
    coords: CoordinateGraph,
}

#[derive(Debug)]
pub struct GraphOfGroups {
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
    tree: Vec<bool>,
    sides: Vec<[SideData; 2]>,
    tau: Vec<GPath>,
    offsets: Vec<usize>,
    stable: Vec<Option<usize>>,
    stable_edges: Vec<usize>,
    names: Option<Vec<char>>,
    acylindrical: OnceLock<Result<AcylindricityReport, StallingsError>>,
}

impl Clone for GraphOfGroups {
    fn clone(&self) -> Self {
        GraphOfGroups::new(self.vertices.clone(), self.edges.clone(), Some(self.tree_edges()))
            .expect("already validated")
    }
}

impl PartialEq for GraphOfGroups {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices && self.edges == other.edges && self.tree == other.tree
    }
}

const VERTEX_POOL: &str = "xyzwabcdefghijklmnopquv";
const STABLE_POOL: &str = "tsrqponmlkjihgfedcbavuwzyx";

fn local_alphabet(v: &Vertex) -> Alphabet {
    match &v.names {
        Some(n) => Alphabet::with_names(n.clone()).unwrap_or_else(|_| Alphabet::unnamed(v.rank)),
        None => Alphabet::unnamed(v.rank),
    }
}

fn format_local(a: &Alphabet, w: &Word) -> WordSpec {
    match a.names() {
        Some(_) => WordSpec::Text(a.format(w)),
        None => WordSpec::Letters(w.letters().to_vec()),
    }
}

fn parse_names(s: &str) -> Vec<char> {
    s.chars().filter(|c| !c.is_whitespace() && *c != ',').collect()
}

/// Fills in default single-letter names where none were given; falls back
/// to no names at all when the pools run out or names clash.
fn assign_names(vertices: &mut [Vertex], edges: &mut [Edge], tree: &[bool]) -> Option<Vec<char>> {
    let mut used: Vec<char> = vertices
        .iter()
        .flat_map(|v| v.names.clone().unwrap_or_default())
        .chain(edges.iter().filter_map(|e| e.name))
        .collect();
    let mut ok = true;
    for v in vertices.iter_mut() {
        if v.names.is_none() {
            let mut names = Vec::new();
            for c in VERTEX_POOL.chars() {
                if names.len() == v.rank {
                    break;
                }
                if !used.contains(&c) {
                    names.push(c);
                    used.push(c);
                }
            }
            if names.len() == v.rank {
                v.names = Some(names);
            } else {
                ok = false;
            }
        }
    }
    for (e, edge) in edges.iter_mut().enumerate() {
        if !tree[e] && edge.name.is_none() {
            match STABLE_POOL.chars().find(|c| !used.contains(c)) {
                Some(c) => {
                    edge.name = Some(c);
                    used.push(c);
                }
                None => ok = false,
            }
        }
    }
    let mut all: Vec<char> = vertices.iter().flat_map(|v| v.names.clone().unwrap_or_default()).collect();
    all.extend(edges.iter().enumerate().filter(|(e, _)| !tree[*e]).filter_map(|(_, ed)| ed.name));
    let mut sorted = all.clone();
    sorted.sort_unstable();
    sorted.dedup();
    (ok && sorted.len() == all.len() && all.iter().all(|c| c.is_ascii_lowercase())).then_some(all)
}

impl GraphOfGroups {
    pub fn new(vertices: Vec<Vertex>, edges: Vec<Edge>, tree: Option<Vec<usize>>) -> Result<Self, GogError> {
        let mut vertices = vertices;
        let mut edges = edges;
        if vertices.is_empty() {
            return Err(GogError::NoVertices);
        }
        for (i, v) in vertices.iter().enumerate() {
            if v.rank == 0 {
                return Err(GogError::ZeroRank(i));
            }
            if let Some(n) = &v.names {
                if n.len() != v.rank {
                    return Err(GogError::Names(format!("vertex {i} has {} names for rank {}", n.len(), v.rank)));
                }
                Alphabet::with_names(n.clone()).map_err(|e| GogError::Names(e.to_string()))?;
            }
        }
        let n = vertices.len();
        for (i, e) in edges.iter().enumerate() {
            for v in [e.from, e.to] {
                if v >= n {
                    return Err(GogError::MissingVertex { edge: i, vertex: v });
                }
            }
        }
        let tree_flags = match tree {
            Some(t) => check_tree(n, &edges, &t)?,
            None => bfs_tree(n, &edges)?,
        };
        let mut sides = Vec::with_capacity(edges.len());
        for (i, e) in edges.iter().enumerate() {
            sides.push([side_data(&vertices, e, i, Side::From)?, side_data(&vertices, e, i, Side::To)?]);
        }
        let names = assign_names(&mut vertices, &mut edges, &tree_flags);
        let mut offsets = Vec::with_capacity(n);
        let mut total = 0;
        for v in &vertices {
            offsets.push(total);
            total += v.rank;
        }
        let mut stable = vec![None; edges.len()];
        let mut stable_edges = Vec::new();
        for e in 0..edges.len() {
            if !tree_flags[e] {
                stable[e] = Some(total + stable_edges.len());
                stable_edges.push(e);
            }
        }
        let tau = tree_paths(n, &edges, &tree_flags);
        Ok(GraphOfGroups {
            vertices,
            edges,
            tree: tree_flags,
            sides,
            tau,
            offsets,
            stable,
            stable_edges,
            names,
            acylindrical: OnceLock::new(),
        })
    }

    pub fn from_json(j: &GraphOfGroupsJson) -> Result<Self, GogError> {
        let vertices: Vec<Vertex> =
            j.vertices.iter().map(|v| Vertex { rank: v.rank, names: v.names.as_deref().map(parse_names) }).collect();
        let mut edges = Vec::with_capacity(j.edges.len());
        for (i, e) in j.edges.iter().enumerate() {
            let mut maps = [Vec::new(), Vec::new()];
            for (side, specs) in [(Side::From, &e.map_from), (Side::To, &e.map_to)] {
                let vid = if side == Side::From { e.from } else { e.to };
                let v = vertices.get(vid).ok_or(GogError::MissingVertex { edge: i, vertex: vid })?;
                if specs.len() != e.edge_rank {
                    return Err(GogError::Invalid {
                        edge: i,
                        side,
                        reason: format!("{} words given for edge rank {}", specs.len(), e.edge_rank),
                    });
                }
                let alphabet = local_alphabet(v);
                for s in specs {
                    maps[side.index()].push(s.resolve(&alphabet).map_err(|err| GogError::Invalid {
                        edge: i,
                        side,
                        reason: err.to_string(),
                    })?);
                }
            }
            let [map_from, map_to] = maps;
            let name = match &e.name {
                None => None,
                Some(s) => {
                    let mut it = s.chars();
                    match (it.next(), it.next()) {
                        (Some(c), None) if c.is_ascii_lowercase() => Some(c),
                        _ => return Err(GogError::Names(format!("stable letter name {s:?}"))),
                    }
                }
            };
            edges.push(Edge { from: e.from, to: e.to, map_from, map_to, name });
        }
        GraphOfGroups::new(vertices, edges, j.spanning_tree.clone())
    }

    pub fn to_json(&self) -> GraphOfGroupsJson {
        GraphOfGroupsJson {
            vertices: self
                .vertices
                .iter()
                .map(|v| VertexJson { rank: v.rank, names: v.names.as_ref().map(|n| n.iter().collect()) })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| {
                    let af = local_alphabet(&self.vertices[e.from]);
                    let at = local_alphabet(&self.vertices[e.to]);
                    EdgeJson {
                        from: e.from,
                        to: e.to,
                        edge_rank: e.rank(),
                        map_from: e.map_from.iter().map(|w| format_local(&af, w)).collect(),
                        map_to: e.map_to.iter().map(|w| format_local(&at, w)).collect(),
                        name: e.name.map(|c| c.to_string()),
                    }
                })
                .collect(),
            spanning_tree: Some(self.tree_edges()),
        }
    }

    /// HNN extension of `F(names)` with one stable letter `t` and
    /// `t · from[i] · t⁻¹ = to[i]`.
    pub fn hnn(names: &str, from: &[&str], to: &[&str]) -> Result<Self, GogError> {
        let names = parse_names(names);
        let alphabet = Alphabet::with_names(names.clone())?;
        let parse = |ws: &[&str]| ws.iter().map(|w| alphabet.parse(w)).collect::<Result<Vec<_>, _>>();
        GraphOfGroups::new(
            vec![Vertex { rank: names.len(), names: Some(names.clone()) }],
            vec![Edge { from: 0, to: 0, map_from: parse(from)?, map_to: parse(to)?, name: None }],
            None,
        )
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn tree_edges(&self) -> Vec<usize> {
        (0..self.edges.len()).filter(|&e| self.tree[e]).collect()
    }

    pub fn is_tree_edge(&self, e: usize) -> bool {
        self.tree[e]
    }

    pub fn image(&self, end: EdgeEnd) -> &SubgroupGraph {
        &self.sides[end.edge][end.side.index()].graph
    }

    pub fn vertex_alphabet(&self, v: usize) -> Alphabet {
        local_alphabet(&self.vertices[v])
    }

    /// Edge-ends at `v` in edge order, the from side before the to side.
    pub fn incident(&self, v: usize) -> Vec<EdgeEnd> {
        let mut out = Vec::new();
        for (i, e) in self.edges.iter().enumerate() {
            if e.from == v {
                out.push(EdgeEnd { edge: i, side: Side::From });
            }
            if e.to == v {
                out.push(EdgeEnd { edge: i, side: Side::To });
            }
        }
        out
    }

    pub fn depart(&self, s: Step) -> usize {
        self.edges[s.edge].vertex(s.depart_side())
    }

    pub fn arrive(&self, s: Step) -> usize {
        self.edges[s.edge].vertex(s.arrive_side())
    }

    /// Expresses `h` in the basis of an edge-end image.
    pub fn edge_coordinates(&self, end: EdgeEnd, h: &Word) -> Option<Word> {
        self.sides[end.edge][end.side.index()].coords.coordinates(h)
    }

    /// Moves `h` from one end of an edge to the other.
    pub fn transfer(&self, end: EdgeEnd, h: &Word) -> Option<Word> {
        let c = self.edge_coordinates(end, h)?;
        Some(c.substitute(self.edges[end.edge].map(end.side.other())).reduced())
    }

    /// `s · h · s⁻¹` for `h` in the image at the arrival vertex of `s`.
    pub fn pinch(&self, s: Step, h: &Word) -> Option<Word> {
        self.transfer(EdgeEnd { edge: s.edge, side: s.arrive_side() }, h)
    }

    /// `s⁻¹ · z · s` for `z` in the image at the departure vertex of `s`.
    pub fn push_across(&self, s: Step, z: &Word) -> Option<Word> {
        self.transfer(EdgeEnd { edge: s.edge, side: s.depart_side() }, z)
    }

    pub fn end(&self, p: &GPath) -> usize {
        p.steps.last().map_or(p.start, |&s| self.arrive(s))
    }

    pub fn tree_path(&self, v: usize) -> &GPath {
        &self.tau[v]
    }

    /// Concatenation without reduction.
    pub fn concat(&self, a: &GPath, b: &GPath) -> GPath {
        assert_eq!(self.end(a), b.start, "paths do not compose");
        let mut syllables = a.syllables.clone();
        let last = syllables.pop().unwrap();
        syllables.push(last.mul(&b.syllables[0]));
        syllables.extend(b.syllables[1..].iter().cloned());
        let mut steps = a.steps.clone();
        steps.extend(b.steps.iter().copied());
        GPath { start: a.start, syllables, steps }
    }

    pub fn mul(&self, a: &GPath, b: &GPath) -> GPath {
        self.reduce(&self.concat(a, b))
    }

    pub fn mul_all<'a>(&self, parts: impl IntoIterator<Item = &'a GPath>) -> GPath {
        let mut it = parts.into_iter();
        let first = it.next().expect("at least one path").clone();
        let joined = it.fold(first, |acc, p| self.concat(&acc, p));
        self.reduce(&joined)
    }

    pub fn inverse(&self, p: &GPath) -> GPath {
        GPath {
            start: self.end(p),
            syllables: p.syllables.iter().rev().map(Word::inverse).collect(),
            steps: p.steps.iter().rev().map(|s| s.reverse()).collect(),
        }
    }

    pub fn pow(&self, p: &GPath, n: i64) -> GPath {
        let base = if n < 0 { self.inverse(p) } else { p.clone() };
        let mut acc = GPath::identity(p.start);
        for _ in 0..n.unsigned_abs() {
            acc = self.concat(&acc, &base);
        }
        self.reduce(&acc)
    }

    /// Britton reduction: removes every pinch `s h s⁻¹` with `h` in the
    /// attached image.
    pub fn reduce(&self, p: &GPath) -> GPath {
        let mut syllables: Vec<Word> = vec![p.syllables[0].reduced()];
        let mut steps: Vec<Step> = Vec::new();
        for (i, &s) in p.steps.iter().enumerate() {
            let next = &p.syllables[i + 1];
            if let Some(&prev) = steps.last() {
                if prev == s.reverse() {
                    if let Some(crossed) = self.pinch(prev, syllables.last().unwrap()) {
                        steps.pop();
                        syllables.pop();
                        let top = syllables.pop().unwrap();
                        syllables.push(Word::mul_all([&top, &crossed, next]));
                        continue;
                    }
                }
            }
            steps.push(s);
            syllables.push(next.reduced());
        }
        GPath { start: p.start, syllables, steps }
    }

    pub fn is_trivial(&self, p: &GPath) -> bool {
        self.reduce(p).is_trivial_syntactically()
    }

    pub fn equal(&self, a: &GPath, b: &GPath) -> bool {
        a.start == b.start && self.end(a) == self.end(b) && self.is_trivial(&self.concat(a, &self.inverse(b)))
    }

    pub fn conjugate(&self, w: &GPath, el: &GPath) -> GPath {
        self.mul_all([w, el, &self.inverse(w)])
    }

    /// Generator names of the fundamental group presentation.
    pub fn generator_names(&self) -> Vec<String> {
        let total = self.offsets.last().copied().unwrap_or(0)
            + self.vertices.last().map_or(0, |v| v.rank)
            + self.stable_edges.len();
        match &self.names {
            Some(n) => n.iter().map(|c| c.to_string()).collect(),
            None => (1..=total).map(|i| format!("g{i}")).collect(),
        }
    }

    pub fn alphabet(&self) -> Alphabet {
        match &self.names {
            Some(n) => Alphabet::with_names(n.clone()).expect("names validated"),
            None => Alphabet::unnamed(self.generator_names().len()),
        }
    }

    /// Vertex generators in vertex order, then one stable letter per
    /// non-tree edge in edge order.
    pub fn present_fundamental_group(&self) -> Presentation {
        let global = |v: usize, w: &Word| {
            Word::from_letters(w.letters().iter().map(|&l| l.signum() * (self.offsets[v] as i32 + l.abs())).collect())
        };
        let mut relators = Vec::new();
        for (i, e) in self.edges.iter().enumerate() {
            for (a, b) in e.map_from.iter().zip(&e.map_to) {
                let a = global(e.from, a);
                let b = global(e.to, b);
                let r = match self.stable[i] {
                    None => a.mul(&b.inverse()),
                    Some(k) => {
                        let t = Word::letter(k as i32 + 1);
                        Word::mul_all([&t, &a, &t.inverse(), &b.inverse()])
                    }
                };
                relators.push(r);
            }
        }
        Presentation::new(self.generator_names(), relators).expect("generated presentation is valid")
    }

    /// Loop at vertex 0 for a word in the presentation generators.
    pub fn element_from_word(&self, w: &Word) -> Result<GPath, GogError> {
        let total = self.generator_names().len();
        Alphabet::unnamed(total).check(w)?;
        let mut acc = GPath::identity(0);
        for &l in w.letters() {
            let g = l.unsigned_abs() as usize - 1;
            let piece = if let Some(k) = self.stable_edges.get(g.wrapping_sub(self.vertex_generator_count())) {
                let e = &self.edges[*k];
                let step = GPath {
                    start: e.to,
                    syllables: vec![Word::empty(), Word::empty()],
                    steps: vec![Step { edge: *k, positive: true }],
                };
                let t = self.concat(&self.concat(&self.tau[e.to], &step), &self.inverse(&self.tau[e.from]));
                if l > 0 {
                    t
                } else {
                    self.inverse(&t)
                }
            } else {
                let v = self.offsets.partition_point(|&o| o <= g) - 1;
                let local = (g - self.offsets[v]) as i32 + 1;
                let z = GPath::vertex_element(v, Word::letter(l.signum() * local));
                self.concat(&self.concat(&self.tau[v], &z), &self.inverse(&self.tau[v]))
            };
            acc = self.concat(&acc, &piece);
        }
        Ok(self.reduce(&acc))
    }

    fn vertex_generator_count(&self) -> usize {
        self.offsets.last().copied().unwrap_or(0) + self.vertices.last().map_or(0, |v| v.rank)
    }

    pub fn parse_element(&self, s: &str) -> Result<GPath, GogError> {
        let w = crate::free_words::parse_word_arg(&self.alphabet(), s)?;
        self.element_from_word(&w)
    }

    /// Word in the presentation generators for a path `a → b`, read as
    /// the loop `τ_a · p · τ_b⁻¹`.
    pub fn element_to_word(&self, p: &GPath) -> Word {
        let mut letters = Vec::new();
        let mut v = p.start;
        for (i, syl) in p.syllables.iter().enumerate() {
            letters.extend(syl.letters().iter().map(|&l| l.signum() * (self.offsets[v] as i32 + l.abs())));
            if let Some(&s) = p.steps.get(i) {
                if let Some(k) = self.stable[s.edge] {
                    letters.push(if s.positive { k as i32 + 1 } else { -(k as i32 + 1) });
                }
                v = self.arrive(s);
            }
        }
        Word::from_letters(letters).reduced()
    }

    pub fn format_element(&self, p: &GPath) -> String {
        self.alphabet().format(&self.element_to_word(p))
    }

    pub fn cyclic_form(&self, el: &GPath) -> CyclicForm {
        let mut core = self.reduce(el);
        let mut prefix = GPath::identity(core.start);
        loop {
            let k = core.steps.len();
            let u = core.start;
            if k == 0 {
                let (c, conj) = cyclic_core(&core.syllables[0]);
                prefix = self.concat(&prefix, &GPath::vertex_element(u, conj));
                core = GPath::vertex_element(u, c);
                break;
            }
            let (first, last) = (core.steps[0], core.steps[k - 1]);
            if k >= 2 && last == first.reverse() {
                let h = core.syllables[k].mul(&core.syllables[0]);
                if self.edge_coordinates(EdgeEnd { edge: last.edge, side: last.arrive_side() }, &h).is_some() {
                    let q = GPath {
                        start: u,
                        syllables: vec![core.syllables[0].clone(), Word::empty()],
                        steps: vec![first],
                    };
                    core = self.mul_all([&self.inverse(&q), &core, &q]);
                    prefix = self.concat(&prefix, &q);
                    continue;
                }
            }
            // move the closing syllable to the front
            let gk = GPath::vertex_element(u, core.syllables[k].clone());
            core = self.mul_all([&gk, &core, &self.inverse(&gk)]);
            prefix = self.concat(&prefix, &self.inverse(&gk));
            break;
        }
        CyclicForm { prefix: self.reduce(&prefix), core }
    }

    pub fn classify(&self, el: &GPath) -> ElementClass {
        let f = self.cyclic_form(el);
        let k = f.translation_length();
        ElementClass {
            kind: if k == 0 { ElementKind::Elliptic } else { ElementKind::Hyperbolic },
            translation_length: k,
            vertex: (k == 0).then_some(f.vertex()),
        }
    }

    /// `a ∈ G_u` with `a · c · a⁻¹ = d`, for reduced loops `c`, `d` at the
    /// same vertex with the same step sequence.
    pub fn solve_conjugator(&self, c: &GPath, d: &GPath) -> Option<Word> {
        if c.start != d.start || c.steps != d.steps || c.steps.is_empty() {
            return None;
        }
        let (c2, d2) = if c.steps.len() == 1 { (self.pow(c, 2), self.pow(d, 2)) } else { (c.clone(), d.clone()) };
        let (s1, s2) = (c2.steps[0], c2.steps[1]);
        let arr = self.image(EdgeEnd { edge: s1.edge, side: s1.arrive_side() });
        let dep = self.image(EdgeEnd { edge: s2.edge, side: s2.depart_side() });
        let b1 = coset_intersection(arr, &d2.syllables[1], dep, &c2.syllables[1].inverse())?;
        let beta = self.pinch(s1, &b1)?;
        let a = Word::mul_all([&d2.syllables[0], &beta, &c2.syllables[0].inverse()]);
        let av = GPath::vertex_element(c.start, a.clone());
        let lhs = self.mul_all([&av, c, &self.inverse(&av)]);
        self.equal(&lhs, d).then_some(a)
    }

    /// Maximal root: `root^exponent = el`.
    pub fn root(&self, el: &GPath) -> Result<(GPath, u32), GogError> {
        match self.acylindricity() {
            Ok(r) if r.acylindrical => {}
            _ => return Err(GogError::NotAcylindrical),
        }
        let f = self.cyclic_form(el);
        let u = f.vertex();
        let back = |d: &GPath| self.mul_all([&f.prefix, d, &self.inverse(&f.prefix)]);
        let m = f.translation_length();
        if m == 0 {
            let (r, n) = primitive_root(&f.core.syllables[0]).map_err(|_| GogError::TrivialElement)?;
            return Ok((back(&GPath::vertex_element(u, r)), n));
        }
        let c = &f.core;
        for d in (1..=m).filter(|d| m.is_multiple_of(*d)) {
            if (d..m).any(|i| c.steps[i] != c.steps[i - d]) {
                continue;
            }
            let j = (m / d) as u32;
            let mut syl = c.syllables[..d].to_vec();
            syl.push(Word::empty());
            let pd = GPath { start: u, syllables: syl, steps: c.steps[..d].to_vec() };
            let rot = self.mul_all([&self.inverse(&pd), c, &pd]);
            let a = if j == 1 { Some(Word::empty()) } else { self.solve_conjugator(c, &rot) };
            if let Some(a) = a {
                let dd = self.concat(&pd, &GPath::vertex_element(u, a));
                if self.equal(&self.pow(&dd, j as i64), c) {
                    return Ok((back(&dd), j));
                }
            }
        }
        unreachable!("the exponent-one root always verifies")
    }

    pub fn is_clean(&self) -> Result<CleanReport, GogError> {
        let mut edges = Vec::new();
        let mut clean = true;
        for e in 0..self.edges.len() {
            for side in [Side::From, Side::To] {
                let certificate = is_free_factor(self.image(EdgeEnd { edge: e, side }))?;
                clean &= certificate.verdict;
                edges.push(EdgeCleanCertificate { edge: e, side, certificate });
            }
        }
        Ok(CleanReport { clean, edges })
    }

    pub fn is_1_acylindrical(&self) -> Result<AcylindricityReport, GogError> {
        self.acylindricity().clone().map_err(GogError::from)
    }

    fn acylindricity(&self) -> &Result<AcylindricityReport, StallingsError> {
        self.acylindrical.get_or_init(|| {
            for v in 0..self.vertices.len() {
                let ends = self.incident(v);
                let family: Vec<SubgroupGraph> = ends.iter().map(|&e| self.image(e).clone()).collect();
                let verdict = is_malnormal_family(&family)?;
                if let Some(w) = verdict.witness {
                    return Ok(AcylindricityReport {
                        acylindrical: false,
                        witness: Some(AcylindricityWitness {
                            vertex: v,
                            first: ends[w.first],
                            second: ends[w.second],
                            conjugator: w.conjugator,
                            element: w.element,
                        }),
                    });
                }
            }
            Ok(AcylindricityReport { acylindrical: true, witness: None })
        })
    }
}

fn side_data(vertices: &[Vertex], e: &Edge, i: usize, side: Side) -> Result<SideData, GogError> {
    let v = &vertices[e.vertex(side)];
    let words = e.map(side);
    let invalid = |reason: String| GogError::Invalid { edge: i, side, reason };
    if e.map_from.len() != e.map_to.len() {
        return Err(invalid("map_from and map_to have different lengths".into()));
    }
    if words.is_empty() {
        return Err(invalid("edge rank must be positive".into()));
    }
    for w in words {
        if w.max_generator() > v.rank {
            return Err(invalid(format!("word uses a generator beyond vertex rank {}", v.rank)));
        }
    }
    let words: Vec<Word> = words.iter().map(Word::reduced).collect();
    let graph = SubgroupGraph::from_generators(v.rank, &words);
    if graph.subgroup_rank() != words.len() {
        return Err(invalid(format!(
            "tuple generates a subgroup of rank {} instead of {}",
            graph.subgroup_rank(),
            words.len()
        )));
    }
    let coords = CoordinateGraph::new(v.rank, &words).map_err(|_| invalid("tuple is not a free basis".into()))?;
    Ok(SideData { graph, coords })
}

fn bfs_tree(n: usize, edges: &[Edge]) -> Result<Vec<bool>, GogError> {
    let mut seen = vec![false; n];
    let mut tree = vec![false; edges.len()];
    seen[0] = true;
    let mut queue = VecDeque::from([0]);
    while let Some(u) = queue.pop_front() {
        for (i, e) in edges.iter().enumerate() {
            let other = if e.from == u {
                e.to
            } else if e.to == u {
                e.from
            } else {
                continue;
            };
            if !seen[other] {
                seen[other] = true;
                tree[i] = true;
                queue.push_back(other);
            }
        }
    }
    if seen.iter().all(|&s| s) {
        Ok(tree)
    } else {
        Err(GogError::Disconnected)
    }
}

fn check_tree(n: usize, edges: &[Edge], t: &[usize]) -> Result<Vec<bool>, GogError> {
    let mut tree = vec![false; edges.len()];
    for &e in t {
        if e >= edges.len() || tree[e] {
            return Err(GogError::BadTree(format!("edge {e} is missing or repeated")));
        }
        tree[e] = true;
    }
    if t.len() + 1 != n {
        return Err(GogError::BadTree(format!("{} edges for {n} vertices", t.len())));
    }
    let tree_edges: Vec<Edge> = edges.iter().enumerate().filter(|(i, _)| tree[*i]).map(|(_, e)| e.clone()).collect();
    bfs_tree(n, &tree_edges).map_err(|_| GogError::BadTree("tree edges do not connect all vertices".into()))?;
    bfs_tree(n, edges)?;
    Ok(tree)
}

/// Paths from vertex 0 along tree edges.
fn tree_paths(n: usize, edges: &[Edge], tree: &[bool]) -> Vec<GPath> {
    let mut paths: Vec<Option<GPath>> = vec![None; n];
    paths[0] = Some(GPath::identity(0));
    let mut queue = VecDeque::from([0]);
    while let Some(u) = queue.pop_front() {
        for (i, e) in edges.iter().enumerate() {
            if !tree[i] {
                continue;
            }
            let (other, positive) = if e.to == u {
                (e.from, true)
            } else if e.from == u {
                (e.to, false)
            } else {
                continue;
            };
            if paths[other].is_none() {
                let mut p = paths[u].clone().unwrap();
                p.steps.push(Step { edge: i, positive });
                p.syllables.push(Word::empty());
                paths[other] = Some(p);
                queue.push_back(other);
            }
        }
    }
    paths.into_iter().map(|p| p.expect("tree spans")).collect()
}
