#![allow(dead_code)]

use std::collections::{HashSet, VecDeque};

use conjsep::free_words::Word;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Freely reduces with a plain stack, independent of the library.
pub fn reduce(letters: &[i32]) -> Vec<i32> {
    let mut out: Vec<i32> = Vec::with_capacity(letters.len());
    for &l in letters {
        if out.last() == Some(&-l) {
            out.pop();
        } else {
            out.push(l);
        }
    }
    out
}

pub fn mul(a: &[i32], b: &[i32]) -> Vec<i32> {
    let mut v = a.to_vec();
    v.extend_from_slice(b);
    reduce(&v)
}

pub fn inv(a: &[i32]) -> Vec<i32> {
    a.iter().rev().map(|l| -l).collect()
}

pub fn word(v: &[i32]) -> Word {
    Word::from_letters(v.to_vec())
}

/// Every reduced word of length at most `len` over `rank` generators.
pub fn ball(rank: usize, len: usize) -> Vec<Vec<i32>> {
    let letters: Vec<i32> = (1..=rank as i32).flat_map(|g| [g, -g]).collect();
    let mut out = vec![Vec::new()];
    let mut layer = vec![Vec::new()];
    for _ in 0..len {
        let mut next = Vec::new();
        for w in &layer {
            for &l in &letters {
                if w.last() != Some(&-l) {
                    let mut u: Vec<i32> = w.clone();
                    u.push(l);
                    next.push(u);
                }
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// Elements of `⟨gens⟩` reachable from the identity by right multiplication
/// by generators without leaving the ball of radius `radius`.
pub fn closure(gens: &[Vec<i32>], radius: usize) -> HashSet<Vec<i32>> {
    let mut steps: Vec<Vec<i32>> = Vec::new();
    for g in gens {
        let g = reduce(g);
        if !g.is_empty() {
            steps.push(inv(&g));
            steps.push(g);
        }
    }
    let mut seen = HashSet::new();
    seen.insert(Vec::new());
    let mut queue = VecDeque::from([Vec::new()]);
    while let Some(w) = queue.pop_front() {
        for s in &steps {
            let u = mul(&w, s);
            if u.len() <= radius && !seen.contains(&u) {
                seen.insert(u.clone());
                queue.push_back(u);
            }
        }
    }
    seen
}

pub fn random_word(rng: &mut ChaCha8Rng, rank: usize, len: usize) -> Vec<i32> {
    let mut w: Vec<i32> = Vec::with_capacity(len);
    while w.len() < len {
        let g = rng.gen_range(1..=rank as i32);
        let l = if rng.gen_bool(0.5) { g } else { -g };
        if w.last() != Some(&-l) {
            w.push(l);
        }
    }
    w
}

/// Transitive actions of `F_rank` on `0..n` with `0` as base, counted by
/// running over all tuples of permutations. Each index-`n` subgroup arises
/// from exactly `(n-1)!` of them.
pub fn count_index_subgroups(rank: usize, n: usize) -> usize {
    let perms = permutations(n);
    let mut transitive = 0usize;
    let mut idx = vec![0usize; rank];
    loop {
        let tuple: Vec<&Vec<usize>> = idx.iter().map(|&i| &perms[i]).collect();
        let mut seen = vec![false; n];
        seen[0] = true;
        let mut stack = vec![0];
        while let Some(p) = stack.pop() {
            for s in &tuple {
                for q in [s[p], s.iter().position(|&x| x == p).unwrap()] {
                    if !seen[q] {
                        seen[q] = true;
                        stack.push(q);
                    }
                }
            }
        }
        if seen.iter().all(|&b| b) {
            transitive += 1;
        }
        let mut k = 0;
        loop {
            if k == rank {
                return transitive / (1..n).product::<usize>().max(1);
            }
            idx[k] += 1;
            if idx[k] < perms.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..n {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}
