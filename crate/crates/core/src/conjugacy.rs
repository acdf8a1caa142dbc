//! Conjugacy in fundamental groups of graphs of free groups.
//!
//! Conjugators come from a structural search: cyclic rotations plus a
//! vertex-group solve for hyperbolic pairs, and a chain search through edge
//! identifications for elliptic pairs. Non-conjugacy is certified by a
//! translation-length mismatch or by a finite quotient, and otherwise by the
//! structural search running to exhaustion.

use std::collections::{HashSet, VecDeque};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::free_words::{cmp_words, cyclic_core, cyclic_reduce, Word};
use crate::graph_of_groups::{EdgeEnd, GPath, GogError, GraphOfGroups, Side, Step};
use crate::quotients::{search_witness, QuotientError, SearchConfig, WitnessQuery, WitnessReport};
use crate::stallings::SubgroupGraph;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConjugacyError {
    #[error("element is not a loop at the base vertex")]
    NotLoop,
    #[error(transparent)]
    Graph(#[from] GogError),
    #[error(transparent)]
    Quotient(#[from] QuotientError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConjugacyConfig {
    pub max_n: usize,
    pub workers: usize,
    pub budget: Duration,
    /// Cap on states visited by the elliptic chain search.
    pub chain_limit: usize,
}

impl Default for ConjugacyConfig {
    fn default() -> Self {
        let q = SearchConfig::default();
        ConjugacyConfig { max_n: q.max_n, workers: q.workers, budget: Duration::from_secs(60), chain_limit: 10_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Conjugate,
    NonConjugate,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "search", rename_all = "kebab-case")]
pub enum Exhaustion {
    /// Every vertex-group conjugacy class reachable through edge
    /// identifications was visited.
    EllipticChain { states: usize },
    /// No cyclic rotation is conjugate by a vertex element; complete on
    /// 1-acylindrical graphs, where the solve is unique.
    HyperbolicRotations { rotations: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConjugacyWitness {
    /// `w` with `w · u · w⁻¹ = v`.
    Conjugator(GPath),
    TranslationLength {
        u: usize,
        v: usize,
    },
    /// Exactly one of the two reduces to the identity.
    Triviality {
        u_trivial: bool,
    },
    Quotient(Box<WitnessReport>),
    Exhausted(Exhaustion),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Effort {
    pub certified: bool,
    pub chain_states: usize,
    pub rotations_tried: usize,
    pub degree_reached: usize,
    pub budget_exhausted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConjugacyVerdict {
    pub outcome: Outcome,
    pub witness: Option<ConjugacyWitness>,
    pub effort: Effort,
}

impl ConjugacyVerdict {
    pub fn conjugate(&self) -> Option<bool> {
        match self.outcome {
            Outcome::Conjugate => Some(true),
            Outcome::NonConjugate => Some(false),
            Outcome::Inconclusive => None,
        }
    }

    pub fn conjugator(&self) -> Option<&GPath> {
        match &self.witness {
            Some(ConjugacyWitness::Conjugator(w)) => Some(w),
            _ => None,
        }
    }
}

/// All `c` with `c w c⁻¹ ∈ H`, one per closed reading of a rotation of the
/// cyclically reduced `w` in the graph of `H`.
pub fn conjugates_into(w: &Word, h: &SubgroupGraph) -> Vec<Word> {
    if w.is_empty() {
        return vec![Word::empty()];
    }
    let graph = h.graph();
    let geo = graph.geodesics(0);
    let mut out = Vec::new();
    for (p, gp) in geo.iter().enumerate() {
        let Some(gp) = gp else { continue };
        for k in 0..w.len() {
            if graph.read(p as u32, &w.rotate(k)) == Some(p as u32) {
                let head = Word::from_letters(w.letters()[..k].to_vec());
                out.push(gp.mul(&head.inverse()));
            }
        }
    }
    out
}

/// Shortest `c` (then least in word order) with `c g c⁻¹ ∈ H`.
pub fn conjugate_into_subgroup_free(g: &Word, h: &SubgroupGraph) -> Option<Word> {
    let (core, conj) = cyclic_core(g);
    let conj_inv = conj.inverse();
    let best = conjugates_into(&core, h).into_iter().map(|c| c.mul(&conj_inv)).min_by(cmp_words)?;
    debug_assert!(h.contains(&best.conjugate(g)));
    Some(best)
}

struct Decision<'a> {
    g: &'a GraphOfGroups,
    cfg: &'a ConjugacyConfig,
    deadline: Instant,
    effort: Effort,
}

impl Decision<'_> {
    fn verified(&self, w: GPath, u: &GPath, v: &GPath) -> Option<GPath> {
        let w = self.g.reduce(&w);
        self.g.equal(&self.g.conjugate(&w, u), v).then_some(w)
    }

    /// `Ok(Some(w))` on a conjugator, `Ok(None)` when the search was
    /// exhaustive, `Err(())` when it was cut short.
    fn elliptic(&mut self, u: &GPath, v: &GPath) -> Result<Option<GPath>, ()> {
        let g = self.g;
        let start = |el: &GPath| {
            let f = g.cyclic_form(el);
            let (cw, k) = cyclic_reduce(&f.core.syllables[0]);
            let x = g.concat(&f.prefix, &GPath::vertex_element(f.vertex(), k));
            (f.vertex(), cw.word().clone(), x)
        };
        let (p, wu, xu) = start(u);
        let (q, wv, yv) = start(v);
        let found = |a: usize, w: &Word, x: &GPath| -> Option<GPath> {
            (a == q && *w == wv).then(|| g.concat(&yv, &g.inverse(x)))
        };
        let mut seen: HashSet<(usize, Word)> = HashSet::new();
        let mut queue = VecDeque::new();
        seen.insert((p, wu.clone()));
        if let Some(w) = found(p, &wu, &xu) {
            return Ok(self.verified(w, u, v));
        }
        queue.push_back((p, wu, xu));
        while let Some((a, w, x)) = queue.pop_front() {
            self.effort.chain_states = seen.len();
            if seen.len() > self.cfg.chain_limit || Instant::now() >= self.deadline {
                return Err(());
            }
            for end in g.incident(a) {
                let s = Step { edge: end.edge, positive: end.side == Side::To };
                debug_assert_eq!(g.depart(s), a);
                for c in conjugates_into(&w, g.image(end)) {
                    let h = c.conjugate(&w);
                    let pushed = g.push_across(s, &h).expect("h lies in the edge image");
                    let b = g.arrive(s);
                    let (cw, k) = cyclic_reduce(&pushed);
                    let step = GPath { start: a, syllables: vec![c.inverse(), k], steps: vec![s] };
                    let x2 = g.concat(&x, &step);
                    let key = (b, cw.word().clone());
                    if seen.contains(&key) {
                        continue;
                    }
                    if let Some(wit) = found(b, &key.1, &x2) {
                        return Ok(self.verified(wit, u, v));
                    }
                    seen.insert(key.clone());
                    queue.push_back((b, key.1, x2));
                }
            }
        }
        self.effort.chain_states = seen.len();
        Ok(None)
    }

    fn hyperbolic(&mut self, u: &GPath, v: &GPath) -> Option<GPath> {
        let g = self.g;
        let (fu, fv) = (g.cyclic_form(u), g.cyclic_form(v));
        let (cu, cv) = (&fu.core, &fv.core);
        for i in 0..cu.steps.len() {
            let mut syllables = cu.syllables[..i].to_vec();
            syllables.push(Word::empty());
            let pi = GPath { start: cu.start, syllables, steps: cu.steps[..i].to_vec() };
            let rot = g.mul_all([&g.inverse(&pi), cu, &pi]);
            self.effort.rotations_tried += 1;
            if rot.start != cv.start || rot.steps != cv.steps {
                continue;
            }
            if let Some(a) = g.solve_conjugator(&rot, cv) {
                let av = GPath::vertex_element(cv.start, a);
                let w = g.mul_all([&fv.prefix, &av, &g.inverse(&pi), &g.inverse(&fu.prefix)]);
                return self.verified(w, u, v);
            }
        }
        None
    }
}

/// Decides whether `u` and `v` (loops at vertex 0) are conjugate. Outside
/// certified clean, 1-acylindrical graphs the answer may be inconclusive.
pub fn decide_conjugate(
    g: &GraphOfGroups,
    u: &GPath,
    v: &GPath,
    cfg: &ConjugacyConfig,
) -> Result<ConjugacyVerdict, ConjugacyError> {
    for el in [u, v] {
        if el.start != 0 || g.end(el) != 0 {
            return Err(ConjugacyError::NotLoop);
        }
    }
    let certified = g.is_clean()?.clean && g.is_1_acylindrical()?.acylindrical;
    let mut d =
        Decision { g, cfg, deadline: Instant::now() + cfg.budget, effort: Effort { certified, ..Effort::default() } };
    let (u, v) = (g.reduce(u), g.reduce(v));
    let verdict = |outcome, witness, effort| Ok(ConjugacyVerdict { outcome, witness: Some(witness), effort });
    match (u.is_trivial_syntactically(), v.is_trivial_syntactically()) {
        (true, true) => return verdict(Outcome::Conjugate, ConjugacyWitness::Conjugator(GPath::identity(0)), d.effort),
        (a, b) if a != b => {
            return verdict(Outcome::NonConjugate, ConjugacyWitness::Triviality { u_trivial: a }, d.effort)
        }
        _ => {}
    }
    let (lu, lv) = (g.classify(&u).translation_length, g.classify(&v).translation_length);
    if lu != lv {
        return verdict(Outcome::NonConjugate, ConjugacyWitness::TranslationLength { u: lu, v: lv }, d.effort);
    }
    let proof = if lu == 0 {
        match d.elliptic(&u, &v) {
            Ok(Some(w)) => return verdict(Outcome::Conjugate, ConjugacyWitness::Conjugator(w), d.effort),
            Ok(None) => Some(Exhaustion::EllipticChain { states: d.effort.chain_states }),
            Err(()) => None,
        }
    } else {
        if let Some(w) = d.hyperbolic(&u, &v) {
            return verdict(Outcome::Conjugate, ConjugacyWitness::Conjugator(w), d.effort);
        }
        certified.then_some(Exhaustion::HyperbolicRotations { rotations: d.effort.rotations_tried })
    };
    let p = g.present_fundamental_group();
    let query = WitnessQuery::Conjugacy { u: g.element_to_word(&u), v: g.element_to_word(&v) };
    let search =
        search_witness(&p, &query, &SearchConfig { max_n: cfg.max_n, workers: cfg.workers }, Some(d.deadline))?;
    d.effort.degree_reached = search.degree_reached;
    d.effort.budget_exhausted = search.timed_out;
    if let Some(r) = search.report {
        d.effort.degree_reached = r.quotient.degree;
        return verdict(Outcome::NonConjugate, ConjugacyWitness::Quotient(Box::new(r)), d.effort);
    }
    Ok(match proof {
        Some(e) => ConjugacyVerdict {
            outcome: Outcome::NonConjugate,
            witness: Some(ConjugacyWitness::Exhausted(e)),
            effort: d.effort,
        },
        None => ConjugacyVerdict { outcome: Outcome::Inconclusive, witness: None, effort: d.effort },
    })
}

/// Every edge end at `v` whose image contains a conjugate of `w`.
pub fn conjugate_edge_ends(g: &GraphOfGroups, v: usize, w: &Word) -> Vec<EdgeEnd> {
    let (core, _) = cyclic_core(w);
    g.incident(v).into_iter().filter(|&e| !conjugates_into(&core, g.image(e)).is_empty()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::free_words::Alphabet;

    fn hnn() -> GraphOfGroups {
        GraphOfGroups::hnn("xy", &["x"], &["y"]).unwrap()
    }

    fn cfg() -> ConjugacyConfig {
        ConjugacyConfig { max_n: 4, workers: 1, ..ConjugacyConfig::default() }
    }

    #[test]
    fn into_subgroup_examples() {
        let a = Alphabet::new(2);
        let h = SubgroupGraph::from_generators(2, &[a.parse("x").unwrap()]);
        assert_eq!(conjugate_into_subgroup_free(&a.parse("yxY").unwrap(), &h), Some(a.parse("Y").unwrap()));
        assert_eq!(conjugate_into_subgroup_free(&a.parse("xy").unwrap(), &h), None);
        assert_eq!(conjugate_into_subgroup_free(&a.parse("xxx").unwrap(), &h), Some(Word::empty()));
        let h = SubgroupGraph::from_generators(2, &[a.parse("xyy").unwrap(), a.parse("yx").unwrap()]);
        for (c, w) in [("", "yyx"), ("Y", "xyyyx"), ("xx", "yxyx"), ("yxY", "YYX")] {
            let g = a.parse(c).unwrap().conjugate(&a.parse(w).unwrap());
            let c = conjugate_into_subgroup_free(&g, &h).unwrap();
            assert!(h.contains(&c.conjugate(&g)));
        }
    }

    #[test]
    fn hnn_examples() {
        let g = hnn();
        let el = |s: &str| g.parse_element(s).unwrap();
        let r = decide_conjugate(&g, &el("x"), &el("y"), &cfg()).unwrap();
        assert_eq!(r.outcome, Outcome::Conjugate);
        assert_eq!(g.format_element(r.conjugator().unwrap()), "t");
        let r = decide_conjugate(&g, &el("x"), &el("X"), &cfg()).unwrap();
        assert_eq!(r.outcome, Outcome::NonConjugate);
        let Some(ConjugacyWitness::Quotient(q)) = &r.witness else { panic!("{r:?}") };
        assert!(q.quotient.degree <= 4);
        let r = decide_conjugate(&g, &el("t"), &el("x"), &cfg()).unwrap();
        assert_eq!(r.witness, Some(ConjugacyWitness::TranslationLength { u: 1, v: 0 }));
    }

    #[test]
    fn hyperbolic_pairs() {
        let g = hnn();
        let el = |s: &str| g.parse_element(s).unwrap();
        for (u, h) in [("tx", "y"), ("txty", "yt"), ("tyTTx", "xtY")] {
            let u = el(u);
            let v = g.conjugate(&el(h), &u);
            let r = decide_conjugate(&g, &u, &v, &cfg()).unwrap();
            assert_eq!(r.outcome, Outcome::Conjugate, "{r:?}");
            let w = r.conjugator().unwrap();
            assert!(g.equal(&g.conjugate(w, &u), &v));
        }
        let r = decide_conjugate(&g, &el("tx"), &el("tX"), &cfg()).unwrap();
        assert_eq!(r.outcome, Outcome::NonConjugate);
    }

    #[test]
    fn elliptic_chain_through_edges() {
        let g = hnn();
        let el = |s: &str| g.parse_element(s).unwrap();
        let u = el("xx");
        let v = g.conjugate(&el("tyt"), &u);
        let r = decide_conjugate(&g, &u, &v, &cfg()).unwrap();
        assert_eq!(r.outcome, Outcome::Conjugate);
        let r = decide_conjugate(&g, &el("xy"), &el("yx"), &cfg()).unwrap();
        assert_eq!(r.outcome, Outcome::Conjugate);
        let r = decide_conjugate(&g, &el("xy"), &el("xY"), &cfg()).unwrap();
        assert_eq!(r.outcome, Outcome::NonConjugate);
    }
}
