//! Homomorphisms of finitely presented groups into symmetric groups, and
//! searches for finite quotients that separate elements.
//!
//! Homomorphisms are enumerated as tuples of permutations in lexicographic
//! order of their one-line notations, degree by degree. Partial
//! permutations are extended slot by slot; after each choice every relator
//! is traced from every point and single gaps are filled by deduction.

use std::collections::{BTreeMap, HashSet};
use std::ops::ControlFlow;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::free_words::Word;
use crate::graph_of_groups::{GogError, GraphOfGroups};
use crate::perm::{closure, conjugacy_class, evaluate, Perm};
use crate::presentation::Presentation;
use crate::stallings::{characteristic_core, Index, StallingsError, SubgroupGraph};

pub const DEFAULT_MAX_N: usize = 6;
const NONE: u32 = u32::MAX;
const GROUP_CAP: usize = 800_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QuotientError {
    #[error("degree {n} exceeds the configured bound {max_n}")]
    DegreeBound { n: usize, max_n: usize },
    #[error("word uses generator {0}, beyond the presentation")]
    BadWord(usize),
    #[error("no suitable quotient of degree at most {0}")]
    NotFound(usize),
    #[error("subgroup is not normal of finite index in its vertex group")]
    NotNormalFiniteIndex,
    #[error("vertex {0} does not exist")]
    NoVertex(usize),
    #[error("graph of groups is not clean")]
    NotClean,
    #[error("desk-scale bound exceeded: {0}")]
    Bound(String),
    #[error(transparent)]
    Stallings(#[from] StallingsError),
    #[error(transparent)]
    Graph(#[from] GogError),
    #[error("malformed quotient: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub max_n: usize,
    pub workers: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { max_n: DEFAULT_MAX_N, workers: std::thread::available_parallelism().map_or(1, |n| n.get()) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteQuotient {
    pub degree: usize,
    pub images: Vec<Perm>,
    pub image_group_order: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiniteQuotientJson {
    pub n: usize,
    pub images: BTreeMap<String, Vec<u32>>,
    pub image_group_order: usize,
}

impl FiniteQuotient {
    fn new(images: Vec<Perm>, degree: usize) -> Self {
        let order = closure(&images, degree, GROUP_CAP).map_or(0, |g| g.len());
        FiniteQuotient { degree, images, image_group_order: order }
    }

    pub fn apply(&self, w: &Word) -> Perm {
        evaluate(&self.images, w, self.degree)
    }

    pub fn satisfies(&self, p: &Presentation) -> bool {
        p.relators().iter().all(|r| self.apply(r).is_identity())
    }

    pub fn image_group(&self) -> Vec<Perm> {
        closure(&self.images, self.degree, GROUP_CAP).unwrap_or_default()
    }

    /// The same action on one more point, fixing it.
    pub fn extend(&self) -> FiniteQuotient {
        FiniteQuotient {
            degree: self.degree + 1,
            images: self.images.iter().map(Perm::extend).collect(),
            image_group_order: self.image_group_order,
        }
    }

    pub fn to_json(&self, p: &Presentation) -> FiniteQuotientJson {
        FiniteQuotientJson {
            n: self.degree,
            images: p.generators().iter().cloned().zip(self.images.iter().map(Perm::one_line)).collect(),
            image_group_order: self.image_group_order,
        }
    }

    pub fn from_json(j: &FiniteQuotientJson, p: &Presentation) -> Result<Self, QuotientError> {
        let mut images = Vec::with_capacity(p.rank());
        for g in p.generators() {
            let line = j.images.get(g).ok_or_else(|| QuotientError::Malformed(format!("no image for {g}")))?;
            if line.len() != j.n {
                return Err(QuotientError::Malformed(format!("image of {g} has wrong degree")));
            }
            images.push(Perm::from_one_line(line).ok_or_else(|| QuotientError::Malformed(format!("image of {g}")))?);
        }
        let q = FiniteQuotient::new(images, j.n);
        if q.image_group_order != j.image_group_order {
            return Err(QuotientError::Malformed("image group order does not match".into()));
        }
        Ok(q)
    }
}

struct Search<'a> {
    n: usize,
    relators: &'a [Vec<i32>],
    fwd: Vec<Vec<u32>>,
    bwd: Vec<Vec<u32>>,
    trail: Vec<(usize, u32)>,
    deadline: Option<Instant>,
    ticks: u32,
}

impl<'a> Search<'a> {
    fn new(rank: usize, n: usize, relators: &'a [Vec<i32>]) -> Self {
        Search {
            n,
            relators,
            fwd: vec![vec![NONE; n]; rank],
            bwd: vec![vec![NONE; n]; rank],
            trail: Vec::new(),
            deadline: None,
            ticks: 0,
        }
    }

    fn assign(&mut self, g: usize, i: u32, j: u32) -> bool {
        let cur = self.fwd[g][i as usize];
        if cur == j {
            return true;
        }
        if cur != NONE || self.bwd[g][j as usize] != NONE {
            return false;
        }
        self.fwd[g][i as usize] = j;
        self.bwd[g][j as usize] = i;
        self.trail.push((g, i));
        true
    }

    fn undo(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let (g, i) = self.trail.pop().unwrap();
            let j = self.fwd[g][i as usize];
            self.fwd[g][i as usize] = NONE;
            self.bwd[g][j as usize] = NONE;
        }
    }

    #[inline]
    fn forward(&self, p: u32, l: i32) -> u32 {
        let g = l.unsigned_abs() as usize - 1;
        if l > 0 {
            self.fwd[g][p as usize]
        } else {
            self.bwd[g][p as usize]
        }
    }

    /// Traces relators from every point, filling single gaps, until nothing
    /// changes. Returns false on a contradiction.
    fn propagate(&mut self) -> bool {
        loop {
            let mut changed = false;
            for r in self.relators {
                let len = r.len();
                for p in 0..self.n as u32 {
                    let mut cur = p;
                    let mut k = 0;
                    while k < len {
                        let t = self.forward(cur, r[k]);
                        if t == NONE {
                            break;
                        }
                        cur = t;
                        k += 1;
                    }
                    if k == len {
                        if cur != p {
                            return false;
                        }
                        continue;
                    }
                    let mut back = p;
                    let mut m = len;
                    while m > k {
                        let t = self.forward(back, -r[m - 1]);
                        if t == NONE {
                            break;
                        }
                        back = t;
                        m -= 1;
                    }
                    if m == k {
                        return false;
                    }
                    if m == k + 1 {
                        let l = r[k];
                        let g = l.unsigned_abs() as usize - 1;
                        let ok = if l > 0 { self.assign(g, cur, back) } else { self.assign(g, back, cur) };
                        if !ok {
                            return false;
                        }
                        changed = true;
                    }
                }
            }
            if !changed {
                return true;
            }
        }
    }

    fn next_slot(&self) -> Option<(usize, u32)> {
        for (g, row) in self.fwd.iter().enumerate() {
            if let Some(i) = row.iter().position(|&t| t == NONE) {
                return Some((g, i as u32));
            }
        }
        None
    }

    /// Depth-first extension; `Break(None)` means the deadline passed.
    fn run<B>(&mut self, visit: &mut dyn FnMut(&[Vec<u32>]) -> ControlFlow<B>) -> ControlFlow<Option<B>> {
        self.ticks = self.ticks.wrapping_add(1);
        if self.ticks.is_multiple_of(256) && self.deadline.is_some_and(|d| Instant::now() >= d) {
            return ControlFlow::Break(None);
        }
        let Some((g, i)) = self.next_slot() else {
            return match visit(&self.fwd) {
                ControlFlow::Break(b) => ControlFlow::Break(Some(b)),
                ControlFlow::Continue(()) => ControlFlow::Continue(()),
            };
        };
        for j in 0..self.n as u32 {
            if self.bwd[g][j as usize] != NONE {
                continue;
            }
            let mark = self.trail.len();
            if self.assign(g, i, j) && self.propagate() {
                self.run(visit)?;
            }
            self.undo(mark);
        }
        ControlFlow::Continue(())
    }
}

fn to_perms(table: &[Vec<u32>]) -> Vec<Perm> {
    table.iter().map(|row| Perm::from_images(row.clone()).expect("complete table")).collect()
}

fn relator_letters(p: &Presentation) -> Vec<Vec<i32>> {
    p.relators().iter().filter(|r| !r.is_empty()).map(|r| r.letters().to_vec()).collect()
}

/// Visits every homomorphism to `Sym(n)` in canonical order.
pub fn for_each_hom<B>(p: &Presentation, n: usize, mut visit: impl FnMut(&[Perm]) -> ControlFlow<B>) -> ControlFlow<B> {
    let rels = relator_letters(p);
    let mut s = Search::new(p.rank(), n, &rels);
    if !s.propagate() {
        return ControlFlow::Continue(());
    }
    match s.run(&mut |t: &[Vec<u32>]| visit(&to_perms(t))) {
        ControlFlow::Break(b) => ControlFlow::Break(b.expect("no deadline")),
        ControlFlow::Continue(()) => ControlFlow::Continue(()),
    }
}

pub fn enumerate_homs(p: &Presentation, n: usize, cfg: &SearchConfig) -> Result<Vec<FiniteQuotient>, QuotientError> {
    if n == 0 || n > cfg.max_n {
        return Err(QuotientError::DegreeBound { n, max_n: cfg.max_n });
    }
    let mut out = Vec::new();
    let _ = for_each_hom::<()>(p, n, |imgs| {
        out.push(FiniteQuotient::new(imgs.to_vec(), n));
        ControlFlow::Continue(())
    });
    Ok(out)
}

pub fn count_homs(p: &Presentation, n: usize) -> u64 {
    let mut c = 0;
    let _ = for_each_hom::<()>(p, n, |_| {
        c += 1;
        ControlFlow::Continue(())
    });
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimedOut;

/// First homomorphism of degree `n` (canonical order) accepted by `pred`.
/// The search is split on the image of the first point under the first
/// generator and the lowest branch with a hit wins, so the answer does not
/// depend on the number of workers.
pub fn first_hom<T: Send>(
    p: &Presentation,
    n: usize,
    workers: usize,
    pred: impl Fn(&[Perm]) -> Option<T> + Sync,
) -> Option<(Vec<Perm>, T)> {
    first_hom_until(p, n, workers, None, pred).expect("no deadline")
}

/// As [`first_hom`], giving up at `deadline`. A timeout is reported only
/// when it could hide an earlier hit, so completed answers stay canonical.
pub fn first_hom_until<T: Send>(
    p: &Presentation,
    n: usize,
    workers: usize,
    deadline: Option<Instant>,
    pred: impl Fn(&[Perm]) -> Option<T> + Sync,
) -> Result<Option<(Vec<Perm>, T)>, TimedOut> {
    let rels = relator_letters(p);
    let mut root = Search::new(p.rank(), n, &rels);
    if !root.propagate() {
        return Ok(None);
    }
    let branch = |first: Option<u32>| -> Option<Result<(Vec<Perm>, T), TimedOut>> {
        let mut s = Search::new(p.rank(), n, &rels);
        s.deadline = deadline;
        if !s.propagate() {
            return None;
        }
        if let (Some(j), Some((g, i))) = (first, s.next_slot()) {
            if !(s.assign(g, i, j) && s.propagate()) {
                return None;
            }
        }
        match s.run(&mut |t: &[Vec<u32>]| {
            let perms = to_perms(t);
            match pred(&perms) {
                Some(x) => ControlFlow::Break((perms, x)),
                None => ControlFlow::Continue(()),
            }
        }) {
            ControlFlow::Break(Some(hit)) => Some(Ok(hit)),
            ControlFlow::Break(None) => Some(Err(TimedOut)),
            ControlFlow::Continue(()) => None,
        }
    };
    let Some((g, _)) = root.next_slot() else {
        return branch(None).transpose();
    };
    let candidates: Vec<u32> = (0..n as u32).filter(|&j| root.bwd[g][j as usize] == NONE).collect();
    if workers <= 1 {
        return candidates.into_iter().find_map(|j| branch(Some(j))).transpose();
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().expect("thread pool");
    pool.install(|| candidates.par_iter().find_map_first(|&j| branch(Some(j)))).transpose()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WitnessQuery {
    /// `element ∉ ⟨subgroup⟩` in the quotient.
    Separability { subgroup: Vec<Word>, element: Word },
    /// `u`, `v` not conjugate in the image group.
    Conjugacy { u: Word, v: Word },
    /// `element` not conjugate into `⟨subgroup⟩` in the image group.
    ConjugacyIntoSubgroup { subgroup: Vec<Word>, element: Word },
    /// `element ∉ ⟨left⟩ · middle · ⟨right⟩` in the quotient.
    DoubleCoset { left: Vec<Word>, middle: Word, right: Vec<Word>, element: Word },
}

impl WitnessQuery {
    fn words(&self) -> Vec<&Word> {
        match self {
            WitnessQuery::Separability { subgroup, element }
            | WitnessQuery::ConjugacyIntoSubgroup { subgroup, element } => {
                subgroup.iter().chain(std::iter::once(element)).collect()
            }
            WitnessQuery::Conjugacy { u, v } => vec![u, v],
            WitnessQuery::DoubleCoset { left, middle, right, element } => {
                left.iter().chain(right).chain([middle, element]).collect()
            }
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            WitnessQuery::Separability { .. } => "sep",
            WitnessQuery::Conjugacy { .. } => "conj",
            WitnessQuery::ConjugacyIntoSubgroup { .. } => "conj-into",
            WitnessQuery::DoubleCoset { .. } => "double-coset",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub image_group_order: usize,
    pub relators_checked: usize,
    /// Size of the set the element was shown to avoid.
    pub avoided_set_size: usize,
    pub statement: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WitnessReport {
    pub query: WitnessQuery,
    pub quotient: FiniteQuotient,
    pub transcript: Transcript,
}

fn subgroup_set(gens: &[Perm], n: usize) -> Vec<Perm> {
    closure(gens, n, GROUP_CAP).unwrap_or_default()
}

/// Evaluates the query in a quotient; `Some(size)` when the quotient is a
/// witness, with the size of the set the element avoids.
fn judge(query: &WitnessQuery, imgs: &[Perm], n: usize) -> Option<usize> {
    let ev = |w: &Word| evaluate(imgs, w, n);
    match query {
        WitnessQuery::Separability { subgroup, element } => {
            let h: Vec<Perm> = subgroup.iter().map(ev).collect();
            let g = ev(element);
            if g.is_identity() {
                return None;
            }
            let set = subgroup_set(&h, n);
            (!set.contains(&g)).then_some(set.len())
        }
        WitnessQuery::Conjugacy { u, v } => {
            let (pu, pv) = (ev(u), ev(v));
            if pu.cycle_type() != pv.cycle_type() {
                return Some(conjugacy_class(&pu, imgs).len());
            }
            let class = conjugacy_class(&pu, imgs);
            (!class.contains(&pv)).then_some(class.len())
        }
        WitnessQuery::ConjugacyIntoSubgroup { subgroup, element } => {
            let g = ev(element);
            if g.is_identity() {
                return None;
            }
            let h: HashSet<Perm> = subgroup_set(&subgroup.iter().map(ev).collect::<Vec<_>>(), n).into_iter().collect();
            let class = conjugacy_class(&g, imgs);
            class.iter().all(|c| !h.contains(c)).then_some(class.len())
        }
        WitnessQuery::DoubleCoset { left, middle, right, element } => {
            let a = subgroup_set(&left.iter().map(ev).collect::<Vec<_>>(), n);
            let b = subgroup_set(&right.iter().map(ev).collect::<Vec<_>>(), n);
            let (m, q) = (ev(middle), ev(element));
            let mut set = HashSet::new();
            for x in &a {
                let xm = x.then(&m);
                for y in &b {
                    set.insert(xm.then(y));
                }
            }
            (!set.contains(&q)).then_some(set.len())
        }
    }
}

fn statement(query: &WitnessQuery) -> String {
    match query {
        WitnessQuery::Separability { .. } => "image of the element lies outside the image subgroup".into(),
        WitnessQuery::Conjugacy { .. } => "images are not conjugate in the image group".into(),
        WitnessQuery::ConjugacyIntoSubgroup { .. } => {
            "no conjugate of the image, within the image group, lies in the image subgroup".into()
        }
        WitnessQuery::DoubleCoset { .. } => "image of the element lies outside the image double coset".into(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchOutcome {
    pub report: Option<WitnessReport>,
    /// Highest degree fully searched.
    pub degree_reached: usize,
    pub timed_out: bool,
}

/// First witness in canonical order (degree ascending), if any up to `cfg.max_n`.
pub fn find_witness(
    p: &Presentation,
    query: &WitnessQuery,
    cfg: &SearchConfig,
) -> Result<Option<WitnessReport>, QuotientError> {
    Ok(search_witness(p, query, cfg, None)?.report)
}

pub fn search_witness(
    p: &Presentation,
    query: &WitnessQuery,
    cfg: &SearchConfig,
    deadline: Option<Instant>,
) -> Result<SearchOutcome, QuotientError> {
    for w in query.words() {
        if w.max_generator() > p.rank() {
            return Err(QuotientError::BadWord(w.max_generator()));
        }
    }
    let mut degree_reached = 0;
    for n in 1..=cfg.max_n {
        match first_hom_until(p, n, cfg.workers, deadline, |imgs| judge(query, imgs, n)) {
            Ok(Some((imgs, size))) => {
                return Ok(SearchOutcome {
                    report: Some(report(p, query, imgs, n, size)),
                    degree_reached: n,
                    timed_out: false,
                })
            }
            Ok(None) => degree_reached = n,
            Err(TimedOut) => return Ok(SearchOutcome { report: None, degree_reached, timed_out: true }),
        }
    }
    Ok(SearchOutcome { report: None, degree_reached, timed_out: false })
}

fn report(p: &Presentation, query: &WitnessQuery, imgs: Vec<Perm>, n: usize, size: usize) -> WitnessReport {
    let quotient = FiniteQuotient::new(imgs, n);
    WitnessReport {
        query: query.clone(),
        transcript: Transcript {
            image_group_order: quotient.image_group_order,
            relators_checked: p.relators().len(),
            avoided_set_size: size,
            statement: statement(query),
        },
        quotient,
    }
}

pub fn witness_at(p: &Presentation, query: &WitnessQuery, n: usize, workers: usize) -> Option<WitnessReport> {
    let (imgs, size) = first_hom(p, n, workers, |imgs| judge(query, imgs, n))?;
    Some(report(p, query, imgs, n, size))
}

/// Independent re-check: relators, then the defining property against an
/// explicit listing of the image group.
pub fn verify_witness(p: &Presentation, report: &WitnessReport) -> bool {
    let q = &report.quotient;
    if !q.satisfies(p) {
        return false;
    }
    let group: Vec<Perm> = q.image_group();
    if group.len() != q.image_group_order {
        return false;
    }
    let ev = |w: &Word| q.apply(w);
    let sub = |gens: &[Word]| -> HashSet<Perm> {
        let hs: Vec<Perm> = gens.iter().map(ev).collect();
        subgroup_set(&hs, q.degree).into_iter().collect()
    };
    match &report.query {
        WitnessQuery::Separability { subgroup, element } => !sub(subgroup).contains(&ev(element)),
        WitnessQuery::Conjugacy { u, v } => {
            let (a, b) = (ev(u), ev(v));
            group.iter().all(|g| a.conjugate_by(g) != b)
        }
        WitnessQuery::ConjugacyIntoSubgroup { subgroup, element } => {
            let h = sub(subgroup);
            let a = ev(element);
            group.iter().all(|g| !h.contains(&a.conjugate_by(g)))
        }
        WitnessQuery::DoubleCoset { left, middle, right, element } => {
            let (a, b) = (sub(left), sub(right));
            let (m, e) = (ev(middle), ev(element));
            !a.iter().any(|x| b.iter().any(|y| x.then(&m).then(y) == e))
        }
    }
}

/// Quotient of the fundamental group that is injective on `G_v / B_v` for a
/// normal finite-index `B_v ⊆ N_v`, built from a characteristic core of the
/// Hall completion of `N_v` in the free product of the vertex groups.
pub fn induced_quotient(
    g: &GraphOfGroups,
    v: usize,
    nv: &SubgroupGraph,
    cfg: &SearchConfig,
) -> Result<InducedQuotient, QuotientError> {
    let vertices = g.vertices();
    let vert = vertices.get(v).ok_or(QuotientError::NoVertex(v))?;
    if nv.rank() != vert.rank || !nv.is_cover() || !nv.is_normal() {
        return Err(QuotientError::NotNormalFiniteIndex);
    }
    if !g.is_clean()?.clean {
        return Err(QuotientError::NotClean);
    }
    let offsets: Vec<usize> = vertices
        .iter()
        .scan(0, |acc, x| {
            let o = *acc;
            *acc += x.rank;
            Some(o)
        })
        .collect();
    let total: usize = vertices.iter().map(|x| x.rank).sum();
    let shift = |w: &Word, off: usize| {
        Word::from_letters(w.letters().iter().map(|&l| l.signum() * (l.abs() + off as i32)).collect())
    };
    let embedded =
        SubgroupGraph::from_generators(total, &nv.basis().iter().map(|w| shift(w, offsets[v])).collect::<Vec<_>>());
    let b = embedded.hall_completion();
    let Index::Finite(m) = b.index() else { unreachable!("Hall completion is a cover") };
    if m > 4 {
        return Err(QuotientError::Bound(format!("Hall completion index {m} exceeds 4")));
    }
    let core = characteristic_core(total, m)?;
    let mut relators: Vec<Word> = g.present_fundamental_group().relators().to_vec();
    let mut vertex_indices = Vec::new();
    for (u, x) in vertices.iter().enumerate() {
        let letters: Vec<i32> = (1..=x.rank as i32).map(|i| i + offsets[u] as i32).collect();
        let restricted = restrict(&core, &letters);
        if u == v {
            let Index::Finite(k) = restricted.index() else { unreachable!("restriction of a cover") };
            vertex_indices.push(k);
        }
        relators.extend(restricted.basis().iter().map(|w| {
            Word::from_letters(
                w.letters().iter().map(|&l| l.signum() * letters[l.unsigned_abs() as usize - 1]).collect(),
            )
        }));
    }
    let base = g.present_fundamental_group();
    let presentation = Presentation::new(base.generators().to_vec(), relators).expect("valid relators");
    let target = vertex_indices[0];
    let vgens: Vec<usize> = (offsets[v]..offsets[v] + vert.rank).collect();
    for n in 1..=cfg.max_n {
        let hit = first_hom(&presentation, n, cfg.workers, |imgs| {
            let sub: Vec<Perm> = vgens.iter().map(|&i| imgs[i].clone()).collect();
            let order = closure(&sub, n, target + 1).map_or(usize::MAX, |s| s.len());
            (order == target).then_some(())
        });
        if let Some((imgs, ())) = hit {
            let quotient = FiniteQuotient::new(imgs, n);
            return Ok(InducedQuotient {
                quotient,
                hall_index: m,
                core_index: core.vertex_count(),
                vertex_index: target,
                presentation,
            });
        }
    }
    Err(QuotientError::NotFound(cfg.max_n))
}

#[derive(Debug, Clone)]
pub struct InducedQuotient {
    pub quotient: FiniteQuotient,
    pub hall_index: usize,
    pub core_index: usize,
    /// `[G_v : B_v]`, the order of the image of the vertex group.
    pub vertex_index: usize,
    /// The fundamental group presentation with the vertex-group cores killed.
    pub presentation: Presentation,
}

/// Subgroup of a cover read with only the given letters, relabelled 1, 2, ….
fn restrict(cover: &SubgroupGraph, letters: &[i32]) -> SubgroupGraph {
    let graph = cover.graph();
    let n = graph.vertex_count();
    let table: Vec<Vec<u32>> = (0..n as u32)
        .map(|v| letters.iter().map(|&l| graph.step(v, l).expect("cover is complete")).collect())
        .collect();
    // the letters act by permutations, so forward search finds the whole component
    let mut seen = vec![u32::MAX; n];
    seen[0] = 0;
    let mut order = vec![0u32];
    let mut i = 0;
    while i < order.len() {
        let v = order[i] as usize;
        for &t in &table[v] {
            if seen[t as usize] == u32::MAX {
                seen[t as usize] = order.len() as u32;
                order.push(t);
            }
        }
        i += 1;
    }
    let sub: Vec<Vec<u32>> =
        order.iter().map(|&v| table[v as usize].iter().map(|&t| seen[t as usize]).collect()).collect();
    SubgroupGraph::from_table(letters.len(), &sub)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::free_words::Alphabet;
    use crate::presentation::PresentationJson;

    fn pres(json: &str) -> Presentation {
        Presentation::from_json(&serde_json::from_str::<PresentationJson>(json).unwrap()).unwrap()
    }

    fn hnn() -> Presentation {
        pres(r#"{"generators":["x","y","t"],"relators":["txTY"]}"#)
    }

    fn cfg(workers: usize) -> SearchConfig {
        SearchConfig { max_n: 6, workers }
    }

    /// Brute force over all tuples of permutations.
    fn brute_count(p: &Presentation, n: usize) -> usize {
        let all: Vec<Perm> = {
            let gens: Vec<Perm> = if n >= 2 {
                let mut c: Vec<u32> = (1..n as u32).collect();
                c.push(0);
                let mut t: Vec<u32> = (0..n as u32).collect();
                t.swap(0, 1);
                vec![Perm::from_images(c).unwrap(), Perm::from_images(t).unwrap()]
            } else {
                vec![]
            };
            closure(&gens, n, 10_000).unwrap()
        };
        let mut count = 0;
        let k = p.rank();
        let mut idx = vec![0usize; k];
        loop {
            let imgs: Vec<Perm> = idx.iter().map(|&i| all[i].clone()).collect();
            if p.relators().iter().all(|r| evaluate(&imgs, r, n).is_identity()) {
                count += 1;
            }
            let mut j = 0;
            loop {
                if j == k {
                    return count;
                }
                idx[j] += 1;
                if idx[j] < all.len() {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
        }
    }

    #[test]
    fn hom_counts() {
        assert_eq!(enumerate_homs(&hnn(), 2, &cfg(1)).unwrap().len(), 4);
        let free = pres(r#"{"generators":["x","y"]}"#);
        assert_eq!(enumerate_homs(&free, 3, &cfg(1)).unwrap().len(), 36);
        let a = pres(r#"{"generators":["a"],"relators":["a"]}"#);
        for n in 1..=5 {
            assert_eq!(count_homs(&a, n), 1);
        }
        for (p, n) in [(hnn(), 3), (pres(r#"{"generators":["a","b"],"relators":["abab","aaa"]}"#), 4)] {
            assert_eq!(count_homs(&p, n) as usize, brute_count(&p, n));
        }
        assert!(matches!(enumerate_homs(&free, 7, &cfg(1)), Err(QuotientError::DegreeBound { .. })));
    }

    #[test]
    fn homs_in_lexicographic_order() {
        let qs = enumerate_homs(&hnn(), 3, &cfg(1)).unwrap();
        let keys: Vec<Vec<Vec<u32>>> = qs.iter().map(|q| q.images.iter().map(Perm::one_line).collect()).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert!(qs.iter().all(|q| q.satisfies(&hnn())));
    }

    #[test]
    fn conjugacy_witness_examples() {
        let p = hnn();
        let a = p.alphabet();
        let q = WitnessQuery::Conjugacy { u: a.parse("x").unwrap(), v: a.parse("X").unwrap() };
        let r = find_witness(&p, &q, &SearchConfig { max_n: 4, workers: 1 }).unwrap().unwrap();
        assert!(r.quotient.degree <= 4);
        assert!(verify_witness(&p, &r));
        let q = WitnessQuery::Conjugacy { u: a.parse("x").unwrap(), v: a.parse("y").unwrap() };
        assert!(find_witness(&p, &q, &SearchConfig { max_n: 4, workers: 1 }).unwrap().is_none());
        let q = WitnessQuery::Conjugacy { u: a.parse("x").unwrap(), v: a.parse("x").unwrap() };
        assert!(find_witness(&p, &q, &SearchConfig { max_n: 2, workers: 1 }).unwrap().is_none());
    }

    #[test]
    fn four_cycle_quotient_is_a_witness() {
        let p = hnn();
        let c = Perm::from_one_line(&[2, 3, 4, 1]).unwrap();
        let quotient = FiniteQuotient::new(vec![c.clone(), c, Perm::identity(4)], 4);
        assert_eq!(quotient.image_group_order, 4);
        let a = p.alphabet();
        let query = WitnessQuery::Conjugacy { u: a.parse("x").unwrap(), v: a.parse("X").unwrap() };
        let report = WitnessReport {
            query,
            quotient,
            transcript: Transcript {
                image_group_order: 4,
                relators_checked: 1,
                avoided_set_size: 1,
                statement: String::new(),
            },
        };
        assert!(verify_witness(&p, &report));
    }

    #[test]
    fn separability_examples() {
        let free = pres(r#"{"generators":["x","y"]}"#);
        let a = free.alphabet();
        let q = WitnessQuery::Separability {
            subgroup: vec![a.parse("xx").unwrap(), a.parse("y").unwrap()],
            element: a.parse("x").unwrap(),
        };
        let r = find_witness(&free, &q, &cfg(1)).unwrap().unwrap();
        assert_eq!(r.quotient.degree, 2);
        assert_eq!(r.quotient.images, vec![Perm::from_one_line(&[2, 1]).unwrap(), Perm::identity(2)]);
        let q =
            WitnessQuery::Separability { subgroup: vec![a.parse("xy").unwrap()], element: a.parse("xyxy").unwrap() };
        assert!(find_witness(&free, &q, &SearchConfig { max_n: 3, workers: 1 }).unwrap().is_none());
        let p = hnn();
        let b = p.alphabet();
        let q = WitnessQuery::Separability {
            subgroup: vec![b.parse("x").unwrap(), b.parse("y").unwrap()],
            element: b.parse("t").unwrap(),
        };
        let r = find_witness(&p, &q, &cfg(1)).unwrap().unwrap();
        assert_eq!(r.quotient.degree, 2);
        assert_eq!(
            r.quotient.images,
            vec![Perm::identity(2), Perm::identity(2), Perm::from_one_line(&[2, 1]).unwrap()]
        );
    }

    #[test]
    fn conjugacy_into_examples() {
        let free = pres(r#"{"generators":["x","y"]}"#);
        let a = free.alphabet();
        let h = vec![a.parse("x").unwrap()];
        let q = WitnessQuery::ConjugacyIntoSubgroup { subgroup: h.clone(), element: a.parse("xy").unwrap() };
        let r = find_witness(&free, &q, &SearchConfig { max_n: 4, workers: 1 }).unwrap().unwrap();
        assert!(r.quotient.degree <= 4);
        assert!(verify_witness(&free, &r));
        for g in ["yxY", "xxx"] {
            let q = WitnessQuery::ConjugacyIntoSubgroup { subgroup: h.clone(), element: a.parse(g).unwrap() };
            assert!(find_witness(&free, &q, &SearchConfig { max_n: 4, workers: 1 }).unwrap().is_none());
        }
    }

    #[test]
    fn double_coset_witness() {
        let free = pres(r#"{"generators":["x","y"]}"#);
        let a = free.alphabet();
        let q = WitnessQuery::DoubleCoset {
            left: vec![a.parse("x").unwrap()],
            middle: a.parse("y").unwrap(),
            right: vec![a.parse("y").unwrap()],
            element: a.parse("yx").unwrap(),
        };
        let r = find_witness(&free, &q, &cfg(1)).unwrap().unwrap();
        assert!(verify_witness(&free, &r));
    }

    #[test]
    fn parallel_search_is_deterministic() {
        let p = hnn();
        let a = p.alphabet();
        let q = WitnessQuery::ConjugacyIntoSubgroup {
            subgroup: vec![a.parse("xy").unwrap()],
            element: a.parse("xt").unwrap(),
        };
        let r1 = find_witness(&p, &q, &cfg(1)).unwrap().unwrap();
        let r4 = find_witness(&p, &q, &cfg(4)).unwrap().unwrap();
        assert_eq!(r1.quotient, r4.quotient);
    }

    #[test]
    fn quotient_json_round_trip() {
        let p = hnn();
        let qs = enumerate_homs(&p, 3, &cfg(1)).unwrap();
        for q in qs {
            let j = q.to_json(&p);
            let text = serde_json::to_string(&j).unwrap();
            let back = FiniteQuotient::from_json(&serde_json::from_str(&text).unwrap(), &p).unwrap();
            assert_eq!(back, q);
        }
    }

    #[test]
    fn induced_quotient_examples() {
        let g = GraphOfGroups::hnn("xy", &["x"], &["y"]).unwrap();
        let a = Alphabet::new(2);
        // kernel of x, y ↦ 1 in Z/2
        let nv = SubgroupGraph::from_generators(
            2,
            &[a.parse("xx").unwrap(), a.parse("xy").unwrap(), a.parse("xY").unwrap()],
        );
        assert_eq!(nv.index(), Index::Finite(2));
        let iq = induced_quotient(&g, 0, &nv, &cfg(1)).unwrap();
        let q = &iq.quotient;
        assert!(q.satisfies(&g.present_fundamental_group()));
        assert!(!q.apply(&a.parse("x").unwrap()).is_identity());
        assert!(!q.apply(&a.parse("xy").unwrap()).is_identity());
        let kernel_in_nv = [a.parse("x").unwrap(), a.parse("y").unwrap()].iter().all(|w| !q.apply(w).is_identity());
        assert!(kernel_in_nv);
        let whole = SubgroupGraph::rose(2);
        let iq = induced_quotient(&g, 0, &whole, &cfg(1)).unwrap();
        assert_eq!(iq.quotient.degree, 1);
    }
}
