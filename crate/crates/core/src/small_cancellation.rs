//! Pieces and the metric small-cancellation condition C'(λ).
//!
//! A piece is a common prefix of two distinct members of the symmetrized
//! closure (all rotations of the relators and their inverses). Members are
//! indexed by position, so a proper power contributes a piece of full length.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::free_words::{cyclic_reduce, is_positive, letter_key, CyclicWord, Word};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RelatorError {
    #[error("relator set is empty")]
    Empty,
    #[error("relator {0} is empty")]
    EmptyRelator(usize),
    #[error("relator {0} is not cyclically reduced")]
    NotCyclicallyReduced(usize),
    #[error("relators {0} and {1} agree up to rotation or inversion")]
    Duplicate(usize, usize),
    #[error("invalid ratio {0:?}")]
    BadRatio(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelatorSet {
    relators: Vec<Word>,
}

impl RelatorSet {
    pub fn new(relators: Vec<Word>) -> Result<Self, RelatorError> {
        if relators.is_empty() {
            return Err(RelatorError::Empty);
        }
        let mut classes: Vec<(CyclicWord, CyclicWord)> = Vec::with_capacity(relators.len());
        for (i, r) in relators.iter().enumerate() {
            if r.is_empty() {
                return Err(RelatorError::EmptyRelator(i));
            }
            if !r.is_reduced() || !r.is_cyclically_reduced() {
                return Err(RelatorError::NotCyclicallyReduced(i));
            }
            let c = cyclic_reduce(r).0;
            let ci = cyclic_reduce(&r.inverse()).0;
            if let Some(j) = classes.iter().position(|(d, di)| *d == c || *di == c || *d == ci) {
                return Err(RelatorError::Duplicate(j, i));
            }
            classes.push((c, ci));
        }
        Ok(RelatorSet { relators })
    }

    pub fn relators(&self) -> &[Word] {
        &self.relators
    }

    pub fn len(&self) -> usize {
        self.relators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relators.is_empty()
    }

    pub fn total_length(&self) -> usize {
        self.relators.iter().map(Word::len).sum()
    }
}

/// Positive rational, parsed from `p/q` or a decimal integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub const SIXTH: Ratio = Ratio { num: 1, den: 6 };

    pub fn new(num: u64, den: u64) -> Result<Self, RelatorError> {
        if num == 0 || den == 0 {
            return Err(RelatorError::BadRatio(format!("{num}/{den}")));
        }
        Ok(Ratio { num, den })
    }
}

impl FromStr for Ratio {
    type Err = RelatorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || RelatorError::BadRatio(s.to_string());
        let (n, d) = match s.trim().split_once('/') {
            Some((n, d)) => (n.trim(), d.trim()),
            None => (s.trim(), "1"),
        };
        Ratio::new(n.parse().map_err(|_| bad())?, d.parse().map_err(|_| bad())?)
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// A member of the symmetrized closure: rotation by `offset` of relator
/// `relator`, or of its inverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Occurrence {
    pub relator: usize,
    pub inverse: bool,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PieceWitness {
    pub piece: Word,
    pub first: Occurrence,
    pub second: Occurrence,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelatorPieces {
    pub relator_length: usize,
    pub max_piece_length: usize,
    pub witness: Option<PieceWitness>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PieceReport {
    pub max_piece_length: usize,
    pub per_relator: Vec<RelatorPieces>,
    /// Index of the relator with the largest piece-to-length ratio.
    pub extremal: usize,
}

impl PieceReport {
    pub fn witness(&self) -> Option<&PieceWitness> {
        self.per_relator[self.extremal].witness.as_ref()
    }
}

fn member(rs: &RelatorSet, o: Occurrence) -> Word {
    let r = &rs.relators[o.relator];
    let w = if o.inverse { r.inverse() } else { r.clone() };
    w.rotate(o.offset)
}

/// Suffix array by prefix doubling, with Kasai's LCP array.
fn suffix_array(s: &[u32]) -> (Vec<usize>, Vec<usize>) {
    let n = s.len();
    if n == 0 {
        return (Vec::new(), Vec::new());
    }
    let mut sa: Vec<usize> = (0..n).collect();
    let mut rank: Vec<usize> = s.iter().map(|&c| c as usize).collect();
    let mut tmp = vec![0usize; n];
    let mut k = 1;
    loop {
        let key = |i: usize, rank: &[usize]| (rank[i], if i + k < n { rank[i + k] + 1 } else { 0 });
        sa.sort_unstable_by_key(|&i| key(i, &rank));
        tmp[sa[0]] = 0;
        for w in 1..n {
            tmp[sa[w]] = tmp[sa[w - 1]] + usize::from(key(sa[w - 1], &rank) != key(sa[w], &rank));
        }
        std::mem::swap(&mut rank, &mut tmp);
        if rank[sa[n - 1]] == n - 1 {
            break;
        }
        k *= 2;
    }
    let mut lcp = vec![0usize; n];
    let mut h = 0;
    for i in 0..n {
        if rank[i] > 0 {
            let j = sa[rank[i] - 1];
            while i + h < n && j + h < n && s[i + h] == s[j + h] {
                h += 1;
            }
            lcp[rank[i]] = h;
            h = h.saturating_sub(1);
        } else {
            h = 0;
        }
    }
    (sa, lcp)
}

/// Exact piece statistics for every relator.
pub fn pieces(rs: &RelatorSet) -> PieceReport {
    let rank_letters = rs.relators.iter().map(Word::max_generator).max().unwrap_or(0) as u32;
    let mut text: Vec<u32> = Vec::new();
    // (start in text, occurrence template, length)
    let mut blocks: Vec<(usize, Occurrence, usize)> = Vec::new();
    let mut sep = 2 * rank_letters;
    for (i, r) in rs.relators.iter().enumerate() {
        for inverse in [false, true] {
            let w = if inverse { r.inverse() } else { r.clone() };
            blocks.push((text.len(), Occurrence { relator: i, inverse, offset: 0 }, w.len()));
            for _ in 0..2 {
                text.extend(w.letters().iter().map(|&l| letter_key(l)));
            }
            text.push(sep);
            sep += 1;
        }
    }
    // position -> (block, offset) for rotation starts
    let mut owner: Vec<Option<(usize, usize)>> = vec![None; text.len()];
    for (b, &(start, _, len)) in blocks.iter().enumerate() {
        for k in 0..len {
            owner[start + k] = Some((b, k));
        }
    }
    let (sa, lcp) = suffix_array(&text);
    let n = sa.len();
    let mut per: Vec<RelatorPieces> = rs
        .relators
        .iter()
        .map(|r| RelatorPieces { relator_length: r.len(), max_piece_length: 0, witness: None })
        .collect();
    let mut best: Vec<(usize, usize, usize)> = vec![(0, usize::MAX, usize::MAX); rs.len()];
    for idx in 0..n {
        let Some((b, _)) = owner[sa[idx]] else { continue };
        let len_a = blocks[b].2;
        let rel = blocks[b].1.relator;
        for dir in [false, true] {
            let mut run = usize::MAX;
            let mut j = idx;
            loop {
                if dir {
                    if j + 1 >= n {
                        break;
                    }
                    run = run.min(lcp[j + 1]);
                    j += 1;
                } else {
                    if j == 0 {
                        break;
                    }
                    run = run.min(lcp[j]);
                    j -= 1;
                }
                if run <= best[rel].0 {
                    break;
                }
                let Some((b2, _)) = owner[sa[j]] else { continue };
                let piece = run.min(len_a).min(blocks[b2].2);
                if piece > best[rel].0 {
                    best[rel] = (piece, sa[idx], sa[j]);
                }
            }
        }
    }
    let occurrence = |pos: usize| {
        let (b, k) = owner[pos].unwrap();
        Occurrence { offset: k, ..blocks[b].1 }
    };
    for (i, &(len, p, q)) in best.iter().enumerate() {
        per[i].max_piece_length = len;
        if len > 0 {
            let first = occurrence(p);
            let second = occurrence(q);
            let w = member(rs, first);
            per[i].witness =
                Some(PieceWitness { piece: Word::from_letters(w.letters()[..len].to_vec()), first, second });
        }
    }
    let extremal = (0..per.len())
        .max_by(|&a, &b| {
            let (pa, la) = (per[a].max_piece_length, per[a].relator_length);
            let (pb, lb) = (per[b].max_piece_length, per[b].relator_length);
            (pa * lb).cmp(&(pb * la)).then(b.cmp(&a))
        })
        .unwrap_or(0);
    PieceReport {
        max_piece_length: per.iter().map(|p| p.max_piece_length).max().unwrap_or(0),
        per_relator: per,
        extremal,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CPrimeVerdict {
    pub holds: bool,
    pub lambda: Ratio,
    /// The violating piece and the relator it lives in.
    pub violation: Option<(usize, PieceWitness)>,
    pub report: PieceReport,
}

/// C'(λ): every piece `p` of relator `r` has `|p| < λ·|r|`.
pub fn check_c_prime(rs: &RelatorSet, lambda: Ratio) -> CPrimeVerdict {
    let report = pieces(rs);
    let fails = |p: &RelatorPieces| {
        p.max_piece_length as u128 * lambda.den as u128 >= lambda.num as u128 * p.relator_length as u128
    };
    let violation = if fails(&report.per_relator[report.extremal]) {
        let i = report.extremal;
        Some((i, report.per_relator[i].witness.clone().expect("a failing relator has a piece")))
    } else {
        None
    };
    CPrimeVerdict { holds: violation.is_none(), lambda, violation, report }
}

/// Binary de Bruijn sequence of order `m` (FKM algorithm).
fn de_bruijn(m: usize) -> Vec<u8> {
    let mut a = vec![0u8; m + 1];
    let mut out = Vec::with_capacity(1 << m);
    fn db(t: usize, p: usize, m: usize, a: &mut [u8], out: &mut Vec<u8>) {
        if t > m {
            if m.is_multiple_of(p) {
                out.extend_from_slice(&a[1..=p]);
            }
        } else {
            a[t] = a[t - p];
            db(t + 1, p, m, a, out);
            for j in a[t - p] + 1..2 {
                a[t] = j;
                db(t + 1, t, m, a, out);
            }
        }
    }
    db(1, 1, m, &mut a, &mut out);
    out
}

/// `count` distinct positive words in x, y, each of length at least
/// `min_length`, jointly satisfying C'(1/6). Consecutive chunks of a binary
/// de Bruijn sequence; the order and chunk length grow until the check passes.
pub fn generate_positive_c16_family(count: usize, min_length: usize) -> RelatorSet {
    assert!(count >= 1, "count must be positive");
    let mut m = 4;
    loop {
        let seq = de_bruijn(m);
        let start = min_length.max(6 * m);
        let stop = seq.len() / count;
        for len in start..=stop {
            // skip the leading run of zeros, which is the longest repeated block
            for shift in [m, 0] {
                if shift + count * len > seq.len() {
                    continue;
                }
                let words: Vec<Word> = (0..count)
                    .map(|i| {
                        let chunk = &seq[shift + i * len..shift + (i + 1) * len];
                        Word::from_letters(chunk.iter().map(|&b| b as i32 + 1).collect())
                    })
                    .collect();
                if let Ok(rs) = RelatorSet::new(words) {
                    if check_c_prime(&rs, Ratio::SIXTH).holds {
                        debug_assert!(rs.relators.iter().all(is_positive));
                        return rs;
                    }
                }
            }
        }
        m += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::free_words::Alphabet;

    fn rs(words: &[&str]) -> RelatorSet {
        let a = Alphabet::new(2);
        RelatorSet::new(words.iter().map(|w| a.parse(w).unwrap()).collect()).unwrap()
    }

    /// Every pair of symmetrized members, compared directly.
    pub(crate) fn brute_max_pieces(rs: &RelatorSet) -> Vec<usize> {
        let mut members = Vec::new();
        for (i, r) in rs.relators().iter().enumerate() {
            for inverse in [false, true] {
                for offset in 0..r.len() {
                    let o = Occurrence { relator: i, inverse, offset };
                    members.push((i, member(rs, o)));
                }
            }
        }
        let mut best = vec![0; rs.len()];
        for (a, (i, u)) in members.iter().enumerate() {
            for (b, (_, v)) in members.iter().enumerate() {
                if a != b {
                    let p = u.letters().iter().zip(v.letters()).take_while(|(x, y)| x == y).count();
                    best[*i] = best[*i].max(p);
                }
            }
        }
        best
    }

    #[test]
    fn commutator_pieces() {
        let r = rs(&["xyXY"]);
        let p = pieces(&r);
        assert_eq!(p.max_piece_length, 1);
        assert!(!check_c_prime(&r, Ratio::SIXTH).holds);
        let w = p.witness().unwrap();
        assert_eq!(w.piece.len(), 1);
        assert_ne!(w.first, w.second);
    }

    #[test]
    fn single_letter_and_powers() {
        assert_eq!(pieces(&rs(&["x"])).max_piece_length, 0);
        assert!(check_c_prime(&rs(&["x"]), Ratio::SIXTH).holds);
        let p7 = rs(&["x^7"]);
        assert_eq!(pieces(&p7).max_piece_length, 7);
        assert!(!check_c_prime(&p7, Ratio::SIXTH).holds);
        assert_eq!(pieces(&rs(&["xyxy"])).max_piece_length, 4);
    }

    #[test]
    fn rejects_bad_sets() {
        let a = Alphabet::new(2);
        let p = |s| a.parse(s).unwrap();
        assert_eq!(RelatorSet::new(vec![]), Err(RelatorError::Empty));
        assert_eq!(RelatorSet::new(vec![p("xyX")]), Err(RelatorError::NotCyclicallyReduced(0)));
        assert_eq!(RelatorSet::new(vec![p("xy"), p("YX")]), Err(RelatorError::Duplicate(0, 1)));
        assert_eq!(RelatorSet::new(vec![p("xy"), p("yx")]), Err(RelatorError::Duplicate(0, 1)));
    }

    #[test]
    fn agrees_with_brute_force() {
        let cases: &[&[&str]] =
            &[&["xyXY"], &["xxyxyyy", "xyyxxxy"], &["xyxYYx", "yyyx", "xxxxy"], &["xxyxxyxy"], &["xyXYxxy", "XXyyX"]];
        for c in cases {
            let r = rs(c);
            let got: Vec<usize> = pieces(&r).per_relator.iter().map(|p| p.max_piece_length).collect();
            assert_eq!(got, brute_max_pieces(&r), "{c:?}");
        }
    }

    #[test]
    fn ratio_parsing() {
        assert_eq!("1/6".parse::<Ratio>().unwrap(), Ratio::SIXTH);
        assert_eq!("2".parse::<Ratio>().unwrap(), Ratio { num: 2, den: 1 });
        assert!("0/3".parse::<Ratio>().is_err());
        assert!("a/b".parse::<Ratio>().is_err());
    }

    #[test]
    fn de_bruijn_windows_unique() {
        for m in 1..8 {
            let s = de_bruijn(m);
            assert_eq!(s.len(), 1 << m);
            let mut seen = std::collections::HashSet::new();
            for i in 0..s.len() {
                let win: Vec<u8> = (0..m).map(|k| s[(i + k) % s.len()]).collect();
                assert!(seen.insert(win));
            }
        }
    }

    #[test]
    fn generated_families_pass() {
        for (count, len) in [(1, 6), (14, 40), (3, 10)] {
            let f = generate_positive_c16_family(count, len);
            assert_eq!(f.len(), count);
            assert!(f.relators().iter().all(|w| is_positive(w) && w.len() >= len));
            assert!(check_c_prime(&f, Ratio::SIXTH).holds);
        }
        assert_eq!(generate_positive_c16_family(5, 20), generate_positive_c16_family(5, 20));
    }
}
