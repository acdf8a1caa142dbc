//! Words in a finitely generated free group.
//!
//! A letter is a nonzero `i32`: `k` is the `k`-th generator (1-based) and
//! `-k` its inverse. Words are kept as plain letter vectors; every operation
//! that produces a group element returns the freely reduced form.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WordError {
    #[error("letter {letter} is outside an alphabet of rank {rank}")]
    OutOfRange { letter: i32, rank: usize },
    #[error("letter 0 is not a generator")]
    ZeroLetter,
    #[error("unknown symbol {0:?} in word")]
    UnknownSymbol(char),
    #[error("alphabet has no symbolic names; use the integer form")]
    Unnamed,
    #[error("alphabets differ (rank {0} vs rank {1})")]
    AlphabetMismatch(usize, usize),
    #[error("the empty word has no root")]
    EmptyWord,
    #[error("invalid alphabet: {0}")]
    InvalidAlphabet(String),
}

/// Rank plus optional one-character generator names. Lowercase names are
/// required for the compact string syntax (uppercase is the inverse).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Alphabet {
    rank: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    names: Option<Vec<char>>,
}

const DEFAULT_SMALL: [char; 4] = ['x', 'y', 'z', 'w'];

impl Alphabet {
    /// Alphabet with default names: `x y z w` up to rank 4, `a b c ...` up to 26.
    pub fn new(rank: usize) -> Self {
        let names = if rank <= 4 {
            Some(DEFAULT_SMALL[..rank].to_vec())
        } else if rank <= 26 {
            Some((0..rank as u8).map(|i| (b'a' + i) as char).collect())
        } else {
            None
        };
        Alphabet { rank, names }
    }

    pub fn unnamed(rank: usize) -> Self {
        Alphabet { rank, names: None }
    }

    pub fn with_names(names: Vec<char>) -> Result<Self, WordError> {
        if names.is_empty() {
            return Err(WordError::InvalidAlphabet("rank must be at least 1".into()));
        }
        for (i, c) in names.iter().enumerate() {
            if !c.is_ascii_lowercase() {
                return Err(WordError::InvalidAlphabet(format!("generator name {c:?} is not a lowercase letter")));
            }
            if names[..i].contains(c) {
                return Err(WordError::InvalidAlphabet(format!("duplicate name {c:?}")));
            }
        }
        Ok(Alphabet { rank: names.len(), names: Some(names) })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn names(&self) -> Option<&[char]> {
        self.names.as_deref()
    }

    pub fn name(&self, generator: usize) -> Option<char> {
        self.names.as_ref().map(|n| n[generator - 1])
    }

    pub fn check(&self, w: &Word) -> Result<(), WordError> {
        for &l in w.letters() {
            if l == 0 {
                return Err(WordError::ZeroLetter);
            }
            if l.unsigned_abs() as usize > self.rank {
                return Err(WordError::OutOfRange { letter: l, rank: self.rank });
            }
        }
        Ok(())
    }

    pub fn word(&self, letters: Vec<i32>) -> Result<Word, WordError> {
        let w = Word(letters);
        self.check(&w)?;
        Ok(w.reduced())
    }

    /// Parses the compact syntax: `xyX` is x y x⁻¹. Also accepts `x^-1`,
    /// `x⁻¹`, `x^3`, whitespace, `*`, and `1`/`e`/`ε` for the identity.
    pub fn parse(&self, s: &str) -> Result<Word, WordError> {
        let names = self.names.as_ref().ok_or(WordError::Unnamed)?;
        let chars: Vec<char> = s.chars().collect();
        let mut out: Vec<i32> = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            i += 1;
            if c.is_whitespace() || c == '*' || c == '·' || c == 'ε' || c == '1' {
                continue;
            }
            let (lower, mut sign) = if c.is_ascii_uppercase() { (c.to_ascii_lowercase(), -1) } else { (c, 1) };
            let g = names.iter().position(|&n| n == lower).ok_or(WordError::UnknownSymbol(c))? as i32 + 1;
            let mut exp: i64 = 1;
            if i < chars.len() && chars[i] == '⁻' && chars.get(i + 1) == Some(&'¹') {
                sign = -sign;
                i += 2;
            } else if i < chars.len() && chars[i] == '^' {
                i += 1;
                let mut neg = false;
                if chars.get(i) == Some(&'-') {
                    neg = true;
                    i += 1;
                }
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                if start == i {
                    return Err(WordError::UnknownSymbol('^'));
                }
                exp = chars[start..i].iter().collect::<String>().parse().unwrap_or(1);
                if neg {
                    sign = -sign;
                }
            } else {
                let start = i;
                while i < chars.len() && "⁰¹²³⁴⁵⁶⁷⁸⁹".contains(chars[i]) {
                    i += 1;
                }
                if start < i {
                    exp = chars[start..i]
                        .iter()
                        .map(|d| "⁰¹²³⁴⁵⁶⁷⁸⁹".chars().position(|x| x == *d).unwrap() as i64)
                        .fold(0, |acc, d| acc * 10 + d);
                }
            }
            for _ in 0..exp {
                out.push(sign * g);
            }
        }
        Ok(Word(out).reduced())
    }

    /// Compact string form, or the integer-array form when unnamed.
    pub fn format(&self, w: &Word) -> String {
        match &self.names {
            Some(names) => {
                if w.is_empty() {
                    return "1".to_string();
                }
                w.letters()
                    .iter()
                    .map(|&l| {
                        let c = names[l.unsigned_abs() as usize - 1];
                        if l < 0 {
                            c.to_ascii_uppercase()
                        } else {
                            c
                        }
                    })
                    .collect()
            }
            None => serde_json::to_string(w.letters()).unwrap(),
        }
    }
}

/// A word given either in compact string syntax or as signed integers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WordSpec {
    Letters(Vec<i32>),
    Text(String),
}

impl WordSpec {
    pub fn resolve(&self, alphabet: &Alphabet) -> Result<Word, WordError> {
        match self {
            WordSpec::Letters(l) => alphabet.word(l.clone()),
            WordSpec::Text(s) => alphabet.parse(s),
        }
    }
}

/// Parses a word from a CLI argument: JSON integer array or compact text.
pub fn parse_word_arg(alphabet: &Alphabet, s: &str) -> Result<Word, WordError> {
    let t = s.trim();
    if t.starts_with('[') {
        if let Ok(v) = serde_json::from_str::<Vec<i32>>(t) {
            return alphabet.word(v);
        }
    }
    alphabet.parse(t)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Word(Vec<i32>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    /// Raw letters, not reduced.
    pub fn from_letters(letters: Vec<i32>) -> Self {
        Word(letters)
    }

    pub fn letter(l: i32) -> Self {
        Word(vec![l])
    }

    pub fn letters(&self) -> &[i32] {
        &self.0
    }

    pub fn into_letters(self) -> Vec<i32> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_generator(&self) -> usize {
        self.0.iter().map(|l| l.unsigned_abs() as usize).max().unwrap_or(0)
    }

    pub fn is_reduced(&self) -> bool {
        self.0.windows(2).all(|p| p[0] != -p[1])
    }

    pub fn reduced(&self) -> Word {
        let mut out: Vec<i32> = Vec::with_capacity(self.0.len());
        for &l in &self.0 {
            if out.last() == Some(&-l) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        Word(out)
    }

    pub fn inverse(&self) -> Word {
        Word(self.0.iter().rev().map(|l| -l).collect())
    }

    /// Reduced product `self · other`.
    pub fn mul(&self, other: &Word) -> Word {
        let mut out = self.reduced().0;
        for &l in &other.0 {
            if out.last() == Some(&-l) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        Word(out)
    }

    pub fn mul_all<'a>(words: impl IntoIterator<Item = &'a Word>) -> Word {
        words.into_iter().fold(Word::empty(), |acc, w| acc.mul(w))
    }

    pub fn pow(&self, n: i64) -> Word {
        let base = if n < 0 { self.inverse() } else { self.clone() };
        let mut out = Word::empty();
        for _ in 0..n.unsigned_abs() {
            out = out.mul(&base);
        }
        out
    }

    /// `self · w · self⁻¹`, the conjugate `w^self`.
    pub fn conjugate(&self, w: &Word) -> Word {
        Word::mul_all([self, w, &self.inverse()])
    }

    pub fn substitute(&self, images: &[Word]) -> Word {
        let mut out = Word::empty();
        for &l in &self.0 {
            let img = &images[l.unsigned_abs() as usize - 1];
            out = if l > 0 { out.mul(img) } else { out.mul(&img.inverse()) };
        }
        out
    }

    pub fn is_cyclically_reduced(&self) -> bool {
        self.is_reduced() && (self.0.len() < 2 || self.0[0] != -self.0[self.0.len() - 1])
    }

    pub fn rotate(&self, k: usize) -> Word {
        if self.0.is_empty() {
            return Word::empty();
        }
        let k = k % self.0.len();
        let mut v = self.0[k..].to_vec();
        v.extend_from_slice(&self.0[..k]);
        Word(v)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        for &l in &self.0 {
            let g = l.unsigned_abs() as usize;
            let c = if g <= 4 { DEFAULT_SMALL[g - 1] } else { '?' };
            if g > 4 {
                write!(f, "[{l}]")?;
            } else if l < 0 {
                write!(f, "{}", c.to_ascii_uppercase())?;
            } else {
                write!(f, "{c}")?;
            }
        }
        Ok(())
    }
}

/// Sort key realizing the letter order x < x⁻¹ < y < y⁻¹ < …
pub fn letter_key(l: i32) -> u32 {
    2 * (l.unsigned_abs() - 1) + u32::from(l < 0)
}

pub fn cmp_words(a: &Word, b: &Word) -> std::cmp::Ordering {
    a.len()
        .cmp(&b.len())
        .then_with(|| a.letters().iter().map(|&l| letter_key(l)).cmp(b.letters().iter().map(|&l| letter_key(l))))
}

/// Cyclically reduced word stored in its least rotation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CyclicWord {
    letters: Word,
}

impl CyclicWord {
    /// `w` must be cyclically reduced.
    fn from_cyclically_reduced(w: &Word) -> (CyclicWord, usize) {
        let k = least_rotation(w.letters());
        (CyclicWord { letters: w.rotate(k) }, k)
    }

    pub fn word(&self) -> &Word {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }
}

/// Booth's algorithm under `letter_key` order.
fn least_rotation(s: &[i32]) -> usize {
    let n = s.len();
    if n == 0 {
        return 0;
    }
    let key = |i: usize| letter_key(s[i % n]);
    let mut f: Vec<isize> = vec![-1; 2 * n];
    let mut k: usize = 0;
    for j in 1..2 * n {
        let sj = key(j);
        let mut i = f[j - k - 1];
        while i != -1 && sj != key(k + i as usize + 1) {
            if sj < key(k + i as usize + 1) {
                k = j - i as usize - 1;
            }
            i = f[i as usize];
        }
        if i == -1 && sj != key(k + i.wrapping_add(1) as usize) {
            if sj < key(k) {
                k = j;
            }
            f[j - k] = -1;
        } else {
            f[j - k] = i + 1;
        }
    }
    k % n
}

/// Returns `(core, conjugator)` with `w = conjugator · core · conjugator⁻¹`.
pub fn cyclic_reduce(w: &Word) -> (CyclicWord, Word) {
    let (core, conj) = cyclic_core(w);
    let (cw, k) = CyclicWord::from_cyclically_reduced(&core);
    // rotating core by k conjugates by its prefix of length k
    let prefix = Word(core.letters()[..k].to_vec());
    (cw, conj.mul(&prefix))
}

/// Cyclically reduced core without canonical rotation.
pub fn cyclic_core(w: &Word) -> (Word, Word) {
    let r = w.reduced();
    let l = r.letters();
    let mut i = 0;
    while 2 * i + 1 < l.len() && l[i] == -l[l.len() - 1 - i] {
        i += 1;
    }
    (Word(l[i..l.len() - i].to_vec()), Word(l[..i].to_vec()))
}

/// Returns `g` with `g · u · g⁻¹ = v` when `u` and `v` are conjugate.
pub fn is_conjugate_free(u: &Word, v: &Word) -> Option<Word> {
    let (cu, pu) = cyclic_reduce(u);
    let (cv, pv) = cyclic_reduce(v);
    if cu != cv {
        return None;
    }
    // u = pu c pu⁻¹, v = pv c pv⁻¹; conjugators form a coset of the
    // centralizer pu⟨ρ⟩pu⁻¹ with ρ the root of c. Report the shortest nearby.
    let g0 = pv.mul(&pu.inverse());
    if cu.is_empty() {
        return Some(Word::empty());
    }
    let p = smallest_period(cu.word().letters());
    let rho = pu.conjugate(&Word(cu.word().letters()[..p].to_vec()));
    (-2..=2).map(|k| g0.mul(&rho.pow(k))).min_by(cmp_words)
}

/// Checked variant: both words must lie in the same alphabet.
pub fn is_conjugate_in(alphabet: &Alphabet, u: &Word, v: &Word) -> Result<Option<Word>, WordError> {
    alphabet.check(u)?;
    alphabet.check(v)?;
    Ok(is_conjugate_free(u, v))
}

/// `w = root^exponent` with the exponent maximal.
pub fn primitive_root(w: &Word) -> Result<(Word, u32), WordError> {
    let (core, conj) = cyclic_core(w);
    if core.is_empty() {
        return Err(WordError::EmptyWord);
    }
    let p = smallest_period(core.letters());
    let n = core.len();
    let root = conj.conjugate(&Word(core.letters()[..p].to_vec()));
    Ok((root, (n / p) as u32))
}

/// Least `p` dividing `len` with `s` a power of its length-`p` prefix.
pub(crate) fn smallest_period<T: PartialEq>(s: &[T]) -> usize {
    let n = s.len();
    let mut fail = vec![0usize; n + 1];
    let mut k = 0;
    for i in 1..n {
        while k > 0 && s[i] != s[k] {
            k = fail[k];
        }
        if s[i] == s[k] {
            k += 1;
        }
        fail[i + 1] = k;
    }
    let p = n - fail[n];
    if n.is_multiple_of(p) {
        p
    } else {
        n
    }
}

pub fn is_positive(w: &Word) -> bool {
    w.reduced().letters().iter().all(|&l| l > 0)
}
