//! The Rips construction over a small-cancellation word table, its HNN
//! splitting, and a verifier for the properties the construction promises.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::free_words::Word;
use crate::graph_of_groups::{AcylindricityReport, Edge, GogError, GraphOfGroups, Vertex};
use crate::presentation::Presentation;
use crate::small_cancellation::{check_c_prime, generate_positive_c16_family, CPrimeVerdict, Ratio, RelatorSet};
use crate::stallings::SubgroupGraph;

/// Names of the per-generator words, in table order.
pub const GENERATOR_WORDS: [&str; 12] = ["A", "B", "D", "E", "J", "K", "L", "M", "S", "T", "U", "V"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RipsError {
    #[error("Q has no generators, so the splitting degenerates to the free group on x, y, t")]
    Degenerate,
    #[error(transparent)]
    Graph(#[from] GogError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamedWord {
    pub name: String,
    /// Positive word in x = 1, y = 2.
    pub word: Word,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RipsOutput {
    pub q: Presentation,
    pub gamma: Presentation,
    pub normal_gens: [String; 3],
    pub word_table: Vec<NamedWord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplittingSides {
    pub left: Vec<Word>,
    pub right: Vec<Word>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Splitting {
    Hnn {
        graph: Box<GraphOfGroups>,
        sides: SplittingSides,
    },
    /// No Q-generators: Γ is free on x, y, t and there is no edge to split along.
    Degenerate,
}

impl RipsOutput {
    pub fn r(&self) -> usize {
        self.q.rank()
    }

    pub fn s(&self) -> usize {
        self.q.relators().len()
    }

    pub fn word(&self, name: &str, index: usize) -> &Word {
        let key = format!("{name}{}", index + 1);
        &self.word_table.iter().find(|w| w.name == key).expect("word in table").word
    }

    fn lift(&self, w: &Word) -> Word {
        let r = self.r() as i32;
        Word::from_letters(w.letters().iter().map(|&l| l.signum() * (l.abs() + r)).collect())
    }

    fn lifted(&self, name: &str, index: usize) -> Word {
        self.lift(self.word(name, index))
    }
}

fn gen(i: usize) -> Word {
    Word::letter(i as i32 + 1)
}

/// Γ-generator names: Q's names when they avoid x, y, t, otherwise a1, a2, ….
fn gamma_names(q: &Presentation) -> Vec<String> {
    let clash = q.generators().iter().any(|g| ["x", "y", "t"].contains(&g.as_str()));
    let mut names: Vec<String> =
        if clash { (1..=q.rank()).map(|i| format!("a{i}")).collect() } else { q.generators().to_vec() };
    names.extend(["x", "y", "t"].map(String::from));
    names
}

fn table_names(r: usize, s: usize) -> Vec<String> {
    let mut names = Vec::with_capacity(12 * r + 2 * s);
    for i in 1..=r {
        names.extend(GENERATOR_WORDS.iter().map(|n| format!("{n}{i}")));
    }
    for j in 1..=s {
        names.push(format!("Y{j}"));
        names.push(format!("Z{j}"));
    }
    names
}

fn build(q: &Presentation, table: Vec<Word>) -> RipsOutput {
    let (r, s) = (q.rank(), q.relators().len());
    let word_table = table_names(r, s).into_iter().zip(table).map(|(name, word)| NamedWord { name, word }).collect();
    let mut out = RipsOutput {
        q: q.clone(),
        gamma: Presentation::free(Vec::new()).unwrap(),
        normal_gens: ["x", "y", "t"].map(String::from),
        word_table,
    };
    let (x, y, t) = (gen(r), gen(r + 1), gen(r + 2));
    let ti = t.inverse();
    let mut relators = Vec::with_capacity(s + 6 * r);
    for (j, rel) in q.relators().iter().enumerate() {
        let (yj, zj) = (out.lifted("Y", j), out.lifted("Z", j));
        relators.push(Word::mul_all([rel, &t, &zj.inverse(), &ti, &yj.inverse()]));
    }
    for i in 0..r {
        let a = gen(i);
        let ai = a.inverse();
        // u^a = a u a⁻¹ = P t Q t⁻¹
        for (u, conj, p, qn) in [(&x, &a, "A", "B"), (&x, &ai, "D", "E"), (&y, &a, "J", "K"), (&y, &ai, "L", "M")] {
            let (pw, qw) = (out.lifted(p, i), out.lifted(qn, i));
            relators.push(Word::mul_all([&conj.conjugate(u), &t, &qw.inverse(), &ti, &pw.inverse()]));
        }
        let (sw, tw, uw, vw) = (out.lifted("S", i), out.lifted("T", i), out.lifted("U", i), out.lifted("V", i));
        relators.push(Word::mul_all([&a.conjugate(&t), &tw.inverse(), &ti, &sw.inverse()]));
        relators.push(Word::mul_all([&ai.conjugate(&t), &vw.inverse(), &ti, &uw.inverse()]));
    }
    out.gamma = Presentation::new(gamma_names(q), relators).expect("relators use Γ's generators");
    out
}

/// Γ's relators, provided they are cyclically reduced and distinct.
fn composed(out: &RipsOutput) -> Option<RelatorSet> {
    RelatorSet::new(out.gamma.relators().to_vec()).ok()
}

/// Builds Γ. The table length grows until both the table and the composed
/// relators satisfy C'(1/6).
pub fn rips_construct(q: &Presentation) -> RipsOutput {
    let (r, s) = (q.rank(), q.relators().len());
    let count = 12 * r + 2 * s;
    if count == 0 {
        return build(q, Vec::new());
    }
    let mut min_length = 0;
    loop {
        let table = generate_positive_c16_family(count, min_length);
        let shortest = table.relators().iter().map(Word::len).min().unwrap_or(0);
        let out = build(q, table.relators().to_vec());
        if composed(&out).is_some_and(|rs| check_c_prime(&rs, Ratio::SIXTH).holds) {
            tracing::debug!(shortest, "rips word table");
            return out;
        }
        min_length = shortest + 1;
    }
}

pub fn splitting_sides(out: &RipsOutput) -> SplittingSides {
    let (r, s) = (out.r(), out.s());
    let (x, y) = (gen(r), gen(r + 1));
    let mut left = Vec::with_capacity(s + 6 * r);
    let mut right = Vec::with_capacity(s + 6 * r);
    for (j, rel) in out.q.relators().iter().enumerate() {
        left.push(out.lifted("Z", j));
        right.push(out.lifted("Y", j).inverse().mul(rel));
    }
    for i in 0..r {
        let a = gen(i);
        let ai = a.inverse();
        for (u, conj, p, qn) in [(&x, &a, "A", "B"), (&x, &ai, "D", "E"), (&y, &a, "J", "K"), (&y, &ai, "L", "M")] {
            left.push(out.lifted(qn, i));
            right.push(out.lifted(p, i).inverse().mul(&conj.conjugate(u)));
        }
        left.push(out.lifted("T", i).mul(&a));
        right.push(out.lifted("S", i).inverse().mul(&a));
        left.push(a.mul(&out.lifted("V", i).inverse()));
        right.push(a.mul(&out.lifted("U", i)));
    }
    SplittingSides { left, right }
}

/// Single vertex free on the Q-generators and x, y; one loop with stable
/// letter t and `t·left·t⁻¹ = right`.
pub fn hnn_splitting(out: &RipsOutput) -> Result<Splitting, RipsError> {
    if out.r() == 0 {
        return Ok(Splitting::Degenerate);
    }
    let sides = splitting_sides(out);
    let names = gamma_names(&out.q);
    let chars: Option<Vec<char>> = names[..names.len() - 1]
        .iter()
        .map(|n| {
            let mut it = n.chars();
            match (it.next(), it.next()) {
                (Some(c), None) if c.is_ascii_lowercase() => Some(c),
                _ => None,
            }
        })
        .collect();
    let graph = GraphOfGroups::new(
        vec![Vertex { rank: out.r() + 2, names: chars }],
        vec![Edge { from: 0, to: 0, map_from: sides.left.clone(), map_to: sides.right.clone(), name: Some('t') }],
        None,
    )?;
    Ok(Splitting::Hnn { graph: Box::new(graph), sides })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SideRanks {
    pub expected: usize,
    pub left: usize,
    pub right: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RipsReport {
    pub table_c16: CPrimeVerdict,
    /// The same condition on Γ's relators; absent if they are not a valid
    /// relator set.
    pub composed_c16: Option<CPrimeVerdict>,
    pub sides: SideRanks,
    pub acylindricity: AcylindricityReport,
    pub recovered: Vec<Word>,
    pub recovery_ok: bool,
}

impl RipsReport {
    pub fn c16_ok(&self) -> bool {
        self.table_c16.holds && self.composed_c16.as_ref().is_some_and(|v| v.holds)
    }

    pub fn sides_ok(&self) -> bool {
        self.sides.left == self.sides.expected && self.sides.right == self.sides.expected
    }

    pub fn passed(&self) -> bool {
        self.c16_ok() && self.sides_ok() && self.acylindricity.acylindrical && self.recovery_ok
    }
}

/// Runs the four checks. A repeated or non-reduced table word fails the
/// first check with a full-relator piece or an invalid set.
pub fn verify_rips(out: &RipsOutput) -> Result<RipsReport, RipsError> {
    let Splitting::Hnn { graph, sides } = hnn_splitting(out)? else {
        return Err(RipsError::Degenerate);
    };
    let words: Vec<Word> = out.word_table.iter().map(|w| w.word.clone()).collect();
    let table_c16 = match RelatorSet::new(words.clone()) {
        Ok(rs) => check_c_prime(&rs, Ratio::SIXTH),
        Err(_) => check_c_prime(&RelatorSet::new(dedup_for_witness(&words)).expect("nonempty"), Ratio::SIXTH),
    };
    let composed_c16 = composed(out).map(|rs| check_c_prime(&rs, Ratio::SIXTH));
    let rank = out.r() + 2;
    let sides_report = SideRanks {
        expected: out.s() + 6 * out.r(),
        left: free_rank(rank, &sides.left),
        right: free_rank(rank, &sides.right),
    };
    let acylindricity = graph.is_1_acylindrical()?;
    let r = out.r() as i32;
    let recovered: Vec<Word> = out
        .gamma
        .relators()
        .iter()
        .map(|w| Word::from_letters(w.letters().iter().copied().filter(|l| l.abs() <= r).collect()).reduced())
        .filter(|w| !w.is_empty())
        .collect();
    let expected: Vec<Word> = out.q.relators().iter().filter(|w| !w.is_empty()).cloned().collect();
    let recovery_ok = recovered == expected;
    Ok(RipsReport { table_c16, composed_c16, sides: sides_report, acylindricity, recovered, recovery_ok })
}

/// For a table with repeats, the set keeps one copy and doubles it as a
/// proper square so that the repeat shows up as a full-length piece.
fn dedup_for_witness(words: &[Word]) -> Vec<Word> {
    let mut out: Vec<Word> = Vec::new();
    for w in words.iter().filter(|w| !w.is_empty()) {
        if out.contains(w) {
            let i = out.iter().position(|u| u == w).unwrap();
            out[i] = w.pow(2);
        } else if !out.contains(&w.pow(2)) {
            out.push(w.clone());
        }
    }
    out
}

/// Number of words if they freely generate, otherwise the rank of the
/// subgroup they generate (which is then smaller).
fn free_rank(rank: usize, words: &[Word]) -> usize {
    if words.iter().any(Word::is_empty) {
        return 0;
    }
    SubgroupGraph::from_generators(rank, words).subgroup_rank()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presentation::PresentationJson;

    fn pres(json: &str) -> Presentation {
        Presentation::from_json(&serde_json::from_str::<PresentationJson>(json).unwrap()).unwrap()
    }

    #[test]
    fn counts() {
        let out = rips_construct(&pres(r#"{"generators":["a"]}"#));
        assert_eq!((out.gamma.rank(), out.gamma.relators().len()), (4, 6));
        assert_eq!(out.word_table.len(), 12);
        let out = rips_construct(&pres(r#"{"generators":["a"],"relators":["aa"]}"#));
        assert_eq!((out.gamma.rank(), out.gamma.relators().len()), (4, 7));
        let out = rips_construct(&pres(r#"{"generators":[]}"#));
        assert_eq!(out.gamma.rank(), 3);
        assert!(out.gamma.relators().is_empty());
        assert!(matches!(hnn_splitting(&out).unwrap(), Splitting::Degenerate));
    }

    #[test]
    fn relator_shapes() {
        let out = rips_construct(&pres(r#"{"generators":["a"],"relators":["aa"]}"#));
        let g = &out.gamma;
        // x^a = A t B t⁻¹
        let lhs = g.parse_word("axA").unwrap();
        let rhs = Word::mul_all([&out.lifted("A", 0), &gen(3), &out.lifted("B", 0), &gen(3).inverse()]);
        assert!(g.relators().contains(&lhs.mul(&rhs.inverse())));
        // R = Y t Z t⁻¹
        let rhs = Word::mul_all([&out.lifted("Y", 0), &gen(3), &out.lifted("Z", 0), &gen(3).inverse()]);
        assert_eq!(g.relators()[0], g.parse_word("aa").unwrap().mul(&rhs.inverse()));
        // t^a = S t T
        let rhs = Word::mul_all([&out.lifted("S", 0), &gen(3), &out.lifted("T", 0)]);
        assert!(g.relators().contains(&g.parse_word("atA").unwrap().mul(&rhs.inverse())));
    }

    #[test]
    fn sides_conjugate_by_t() {
        let out = rips_construct(&pres(r#"{"generators":["a"],"relators":["aa"]}"#));
        let sides = splitting_sides(&out);
        let t = gen(3);
        // t·left·t⁻¹·right⁻¹ is a cyclic permutation of a relator or its inverse
        for (l, r) in sides.left.iter().zip(&sides.right) {
            let w = t.conjugate(l).mul(&r.inverse());
            let hit = out.gamma.relators().iter().any(|rel| {
                (0..rel.len()).any(|k| {
                    let rot = rel.rotate(k);
                    rot == w || rot.inverse() == w
                })
            });
            assert!(hit, "{w:?}");
        }
    }

    #[test]
    fn verify_single_generator() {
        let out = rips_construct(&pres(r#"{"generators":["a"]}"#));
        let report = verify_rips(&out).unwrap();
        assert!(report.passed(), "{report:?}");
        let out = rips_construct(&pres(r#"{"generators":["a"],"relators":["aa"]}"#));
        let report = verify_rips(&out).unwrap();
        assert!(report.passed(), "{report:?}");
        assert_eq!(report.recovered, vec![out.q.parse_word("aa").unwrap()]);
    }

    #[test]
    fn tampered_table_fails() {
        let mut out = rips_construct(&pres(r#"{"generators":["a"]}"#));
        out.word_table[1].word = out.word_table[0].word.clone();
        let rebuilt = build(&out.q, out.word_table.iter().map(|w| w.word.clone()).collect());
        let report = verify_rips(&rebuilt).unwrap();
        assert!(!report.table_c16.holds);
        assert!(report.table_c16.violation.is_some());
    }

    #[test]
    fn deterministic() {
        let q = pres(r#"{"generators":["a","b"],"relators":["abab"]}"#);
        assert_eq!(rips_construct(&q), rips_construct(&q));
    }

    #[test]
    fn generator_names_avoid_clashes() {
        let out = rips_construct(&pres(r#"{"generators":["x"]}"#));
        assert_eq!(out.gamma.generators(), &["a1", "x", "y", "t"]);
    }
}
