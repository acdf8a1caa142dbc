//! Permutations of `{0, …, n-1}` acting on the right: `a.then(b)` applies
//! `a` first. Words evaluate letter by letter from the left, matching how a
//! coset table is read.

use std::collections::{HashSet, VecDeque};
use std::fmt;

use crate::free_words::Word;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Perm(Vec<u32>);

impl Perm {
    pub fn identity(n: usize) -> Self {
        Perm((0..n as u32).collect())
    }

    /// Images must form a permutation of `0..n`.
    pub fn from_images(images: Vec<u32>) -> Option<Self> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &i in &images {
            if i as usize >= n || seen[i as usize] {
                return None;
            }
            seen[i as usize] = true;
        }
        Some(Perm(images))
    }

    /// One-line notation with 1-based points.
    pub fn from_one_line(images: &[u32]) -> Option<Self> {
        if images.contains(&0) {
            return None;
        }
        Perm::from_images(images.iter().map(|i| i - 1).collect())
    }

    pub fn one_line(&self) -> Vec<u32> {
        self.0.iter().map(|i| i + 1).collect()
    }

    pub fn images(&self) -> &[u32] {
        &self.0
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    pub fn apply(&self, i: u32) -> u32 {
        self.0[i as usize]
    }

    pub fn then(&self, other: &Perm) -> Perm {
        Perm(self.0.iter().map(|&i| other.0[i as usize]).collect())
    }

    pub fn inverse(&self) -> Perm {
        let mut inv = vec![0; self.0.len()];
        for (i, &j) in self.0.iter().enumerate() {
            inv[j as usize] = i as u32;
        }
        Perm(inv)
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &j)| i as u32 == j)
    }

    /// `g⁻¹ · self · g` in `then` order, i.e. relabel points by `g`.
    pub fn conjugate_by(&self, g: &Perm) -> Perm {
        g.inverse().then(self).then(g)
    }

    /// Sorted cycle lengths (fixed points included).
    pub fn cycle_type(&self) -> Vec<usize> {
        let n = self.0.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for s in 0..n {
            if seen[s] {
                continue;
            }
            let mut len = 0;
            let mut i = s;
            while !seen[i] {
                seen[i] = true;
                i = self.0[i] as usize;
                len += 1;
            }
            out.push(len);
        }
        out.sort_unstable();
        out
    }

    /// Same permutation on one more point, fixing the new point.
    pub fn extend(&self) -> Perm {
        let mut v = self.0.clone();
        v.push(v.len() as u32);
        Perm(v)
    }
}

impl fmt::Debug for Perm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.one_line())
    }
}

/// Image of `w` under generator images (right action).
pub fn evaluate(images: &[Perm], w: &Word, degree: usize) -> Perm {
    let mut pts: Vec<u32> = (0..degree as u32).collect();
    for &l in w.letters() {
        let p = &images[l.unsigned_abs() as usize - 1];
        if l > 0 {
            for x in pts.iter_mut() {
                *x = p.apply(*x);
            }
        } else {
            let inv = p.inverse();
            for x in pts.iter_mut() {
                *x = inv.apply(*x);
            }
        }
    }
    Perm(pts)
}

/// All elements of the group generated by `gens`, identity first, BFS order.
/// Returns `None` past `cap` elements.
pub fn closure(gens: &[Perm], degree: usize, cap: usize) -> Option<Vec<Perm>> {
    let id = Perm::identity(degree);
    let mut seen: HashSet<Perm> = HashSet::new();
    let mut order = vec![id.clone()];
    seen.insert(id);
    let mut i = 0;
    while i < order.len() {
        for g in gens {
            let next = order[i].then(g);
            if seen.insert(next.clone()) {
                if order.len() >= cap {
                    return None;
                }
                order.push(next);
            }
        }
        i += 1;
    }
    Some(order)
}

/// Conjugacy class of `x` inside the group generated by `gens`.
pub fn conjugacy_class(x: &Perm, gens: &[Perm]) -> HashSet<Perm> {
    let mut seen = HashSet::new();
    seen.insert(x.clone());
    let mut queue = VecDeque::from([x.clone()]);
    while let Some(y) = queue.pop_front() {
        for g in gens {
            let z = y.conjugate_by(g);
            if seen.insert(z.clone()) {
                queue.push_back(z);
            }
        }
    }
    seen
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composition_is_left_to_right() {
        let a = Perm::from_one_line(&[2, 1, 3]).unwrap();
        let b = Perm::from_one_line(&[1, 3, 2]).unwrap();
        // 1 -a-> 2 -b-> 3
        assert_eq!(a.then(&b).apply(0), 2);
        assert!(a.then(&a).is_identity());
        assert_eq!(a.then(&b).inverse().then(&a.then(&b)), Perm::identity(3));
    }

    #[test]
    fn s3_closure_and_classes() {
        let c = Perm::from_one_line(&[2, 3, 1]).unwrap();
        let t = Perm::from_one_line(&[2, 1, 3]).unwrap();
        let g = closure(&[c.clone(), t.clone()], 3, 100).unwrap();
        assert_eq!(g.len(), 6);
        assert_eq!(conjugacy_class(&t, &[c.clone(), t.clone()]).len(), 3);
        // in the cyclic group ⟨c⟩ the class of c is a singleton
        assert_eq!(conjugacy_class(&c, std::slice::from_ref(&c)).len(), 1);
        assert_eq!(c.cycle_type(), vec![3]);
        assert!(closure(&[c, t], 3, 4).is_none());
    }

    #[test]
    fn rejects_non_permutations() {
        assert!(Perm::from_one_line(&[1, 1]).is_none());
        assert!(Perm::from_one_line(&[0, 1]).is_none());
        assert!(Perm::from_images(vec![0, 2]).is_none());
    }
}
