//! Finite presentations with named generators.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::free_words::{Alphabet, Word, WordError, WordSpec};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PresentationError {
    #[error("duplicate generator name {0:?}")]
    DuplicateName(String),
    #[error("empty generator name")]
    EmptyName,
    #[error("relator {index}: {source}")]
    Relator { index: usize, source: WordError },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Presentation {
    generators: Vec<String>,
    relators: Vec<Word>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresentationJson {
    pub generators: Vec<String>,
    #[serde(default)]
    pub relators: Vec<WordSpec>,
}

/// Single lowercase letters get compact word syntax; anything else falls
/// back to integer words.
fn alphabet_for(names: &[String]) -> Alphabet {
    let chars: Option<Vec<char>> = names
        .iter()
        .map(|n| {
            let mut it = n.chars();
            match (it.next(), it.next()) {
                (Some(c), None) if c.is_ascii_lowercase() => Some(c),
                _ => None,
            }
        })
        .collect();
    chars.and_then(|c| Alphabet::with_names(c).ok()).unwrap_or_else(|| Alphabet::unnamed(names.len()))
}

impl Presentation {
    pub fn new(generators: Vec<String>, relators: Vec<Word>) -> Result<Self, PresentationError> {
        for (i, g) in generators.iter().enumerate() {
            if g.is_empty() {
                return Err(PresentationError::EmptyName);
            }
            if generators[..i].contains(g) {
                return Err(PresentationError::DuplicateName(g.clone()));
            }
        }
        let alphabet = Alphabet::unnamed(generators.len());
        let relators = relators
            .into_iter()
            .enumerate()
            .map(|(index, r)| {
                alphabet.check(&r).map(|_| r.reduced()).map_err(|source| PresentationError::Relator { index, source })
            })
            .collect::<Result<_, _>>()?;
        Ok(Presentation { generators, relators })
    }

    /// Free group on the given names.
    pub fn free(generators: Vec<String>) -> Result<Self, PresentationError> {
        Presentation::new(generators, Vec::new())
    }

    pub fn generators(&self) -> &[String] {
        &self.generators
    }

    pub fn relators(&self) -> &[Word] {
        &self.relators
    }

    pub fn rank(&self) -> usize {
        self.generators.len()
    }

    pub fn alphabet(&self) -> Alphabet {
        alphabet_for(&self.generators)
    }

    pub fn parse_word(&self, s: &str) -> Result<Word, WordError> {
        crate::free_words::parse_word_arg(&self.alphabet(), s)
    }

    pub fn format_word(&self, w: &Word) -> String {
        self.alphabet().format(w)
    }

    pub fn from_json(j: &PresentationJson) -> Result<Self, PresentationError> {
        let alphabet = alphabet_for(&j.generators);
        let relators = j
            .relators
            .iter()
            .enumerate()
            .map(|(index, r)| r.resolve(&alphabet).map_err(|source| PresentationError::Relator { index, source }))
            .collect::<Result<Vec<_>, _>>()?;
        Presentation::new(j.generators.clone(), relators)
    }

    pub fn to_json(&self) -> PresentationJson {
        let alphabet = self.alphabet();
        PresentationJson {
            generators: self.generators.clone(),
            relators: self
                .relators
                .iter()
                .map(|r| match alphabet.names() {
                    Some(_) => WordSpec::Text(alphabet.format(r)),
                    None => WordSpec::Letters(r.letters().to_vec()),
                })
                .collect(),
        }
    }

    /// Relation matrix of the abelianization: exponent sums per relator.
    pub fn relation_matrix(&self) -> Vec<Vec<i64>> {
        self.relators
            .iter()
            .map(|r| {
                let mut row = vec![0i64; self.rank()];
                for &l in r.letters() {
                    row[l.unsigned_abs() as usize - 1] += l.signum() as i64;
                }
                row
            })
            .collect()
    }

    /// Torsion-free rank of the abelianization.
    pub fn abelianization_rank(&self) -> usize {
        self.rank() - matrix_rank(self.relation_matrix())
    }
}

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Rank over the rationals by integer row reduction.
pub fn matrix_rank(rows: Vec<Vec<i64>>) -> usize {
    let mut m: Vec<Vec<i128>> = rows.into_iter().map(|r| r.into_iter().map(i128::from).collect()).collect();
    let cols = m.first().map_or(0, Vec::len);
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..m.len()).find(|&i| m[i][c] != 0) else { continue };
        m.swap(rank, p);
        for i in 0..m.len() {
            if i != rank && m[i][c] != 0 {
                let (a, b) = (m[rank][c], m[i][c]);
                let pivot = m[rank].clone();
                let row = &mut m[i];
                for (x, y) in row.iter_mut().zip(&pivot) {
                    *x = *x * a - *y * b;
                }
                let g = row.iter().fold(0, |g, &x| gcd(g, x));
                if g > 1 {
                    row.iter_mut().for_each(|x| *x /= g);
                }
            }
        }
        rank += 1;
    }
    rank
}
