//! A linear automorphism of the discrete torus `(ℤ/n)²`, used as an exact
//! test bed for the orbit search.

use std::cmp::Ordering;

use super::search::{search, Dynamics, SearchOutcome, SearchParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridPermutation {
    pub n: usize,
    /// Integer matrix with determinant ±1 mod `n`.
    pub matrix: [[i64; 2]; 2],
}

impl GridPermutation {
    /// `(i, j) ↦ (2i + j, i + j) mod n`.
    pub fn cat_map(n: usize) -> Self {
        GridPermutation { n, matrix: [[2, 1], [1, 1]] }
    }

    pub fn apply(&self, (i, j): (usize, usize)) -> (usize, usize) {
        let n = self.n as i64;
        let [[a, b], [c, d]] = self.matrix;
        let (i, j) = (i as i64, j as i64);
        (((a * i + b * j).rem_euclid(n)) as usize, ((c * i + d * j).rem_euclid(n)) as usize)
    }

    pub fn cells(&self) -> Vec<(usize, usize)> {
        (0..self.n).flat_map(|i| (0..self.n).map(move |j| (i, j))).collect()
    }

    /// Cycles of period at most `max_period` found by the shared search
    /// with every cell as a seed and zero tolerance.
    pub fn find_cycles(&self, max_period: usize) -> SearchOutcome<(usize, usize)> {
        search(self, &self.cells(), SearchParams { max_period, tol: 0.0, radius: 0.0 }, |_| Vec::new())
    }
}

impl Dynamics for GridPermutation {
    type State = (usize, usize);

    fn step(&self, x: &Self::State) -> Option<Self::State> {
        Some(self.apply(*x))
    }

    fn distance(&self, a: &Self::State, b: &Self::State) -> f64 {
        if a == b {
            0.0
        } else {
            1.0
        }
    }

    fn solve(&self, seed: &Self::State, period: usize, _tol: f64) -> Option<Self::State> {
        let mut x = *seed;
        for _ in 0..period {
            x = self.apply(x);
        }
        (x == *seed).then_some(x)
    }

    fn order(&self, a: &Self::State, b: &Self::State) -> Ordering {
        a.cmp(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    /// Cycle decomposition by walking each unvisited cell.
    fn brute_force(g: &GridPermutation, max_period: usize) -> BTreeSet<Vec<(usize, usize)>> {
        let mut seen = vec![false; g.n * g.n];
        let mut out = BTreeSet::new();
        for start in g.cells() {
            if seen[start.0 * g.n + start.1] {
                continue;
            }
            let mut cycle = vec![start];
            seen[start.0 * g.n + start.1] = true;
            let mut x = g.apply(start);
            while x != start {
                seen[x.0 * g.n + x.1] = true;
                cycle.push(x);
                x = g.apply(x);
            }
            if cycle.len() <= max_period {
                let k = (0..cycle.len()).min_by_key(|&k| cycle[k]).unwrap();
                cycle.rotate_left(k);
                out.insert(cycle);
            }
        }
        out
    }

    #[test]
    fn cat_map_cycles_match_enumeration() {
        let g = GridPermutation::cat_map(64);
        let max_period = 48;
        let found = g.find_cycles(max_period);
        let expect = brute_force(&g, max_period);
        let got: BTreeSet<_> = found.orbits.iter().cloned().collect();
        assert_eq!(got.len(), found.orbits.len());
        assert_eq!(got, expect);
        assert_eq!(found.stats.accepted, expect.len());
    }
}
