//! Closed difference-bound matrices over rational offsets.

use dip_symalg::Q;
use num_traits::{Signed, Zero};

/// Constraints `x_u − x_w ≤ m[u][w]` over nodes `0..n`, node 0 being the
/// constant zero. Kept shortest-path closed, so equal regions have equal
/// matrices and implied bounds can be read off directly.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub(crate) struct Dbm {
    n: usize,
    alive: Vec<bool>,
    m: Vec<Option<Q>>,
}

impl Dbm {
    /// Unconstrained over `n` nodes.
    pub fn new(n: usize) -> Self {
        let mut m = vec![None; n * n];
        for i in 0..n {
            m[i * n + i] = Some(Q::zero());
        }
        Dbm { n, alive: vec![true; n], m }
    }

    pub fn get(&self, u: usize, w: usize) -> Option<&Q> {
        self.m[u * self.n + w].as_ref()
    }

    pub fn alive(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(|&i| self.alive[i])
    }

    /// Add `x_u − x_w ≤ c` and restore closure. Returns false when the
    /// system became infeasible.
    pub fn add(&mut self, u: usize, w: usize, c: &Q) -> bool {
        if let Some(old) = self.get(u, w) {
            if old <= c {
                return true;
            }
        }
        if u == w {
            return !c.is_negative();
        }
        if let Some(back) = self.get(w, u) {
            if (back + c).is_negative() {
                return false;
            }
        }
        let nodes: Vec<usize> = self.alive().collect();
        let to_u: Vec<Option<Q>> = nodes.iter().map(|&i| self.get(i, u).cloned()).collect();
        let from_w: Vec<Option<Q>> = nodes.iter().map(|&j| self.get(w, j).cloned()).collect();
        for (a, &i) in nodes.iter().enumerate() {
            let Some(iu) = &to_u[a] else { continue };
            let base = iu + c;
            for (b, &j) in nodes.iter().enumerate() {
                let Some(wj) = &from_w[b] else { continue };
                let cand = &base + wj;
                let slot = &mut self.m[i * self.n + j];
                match slot {
                    Some(cur) if *cur <= cand => {}
                    _ => *slot = Some(cand),
                }
            }
        }
        true
    }

    /// Drop a node; the rest stays closed.
    pub fn remove(&mut self, v: usize) {
        self.alive[v] = false;
        for i in 0..self.n {
            self.m[i * self.n + v] = None;
            self.m[v * self.n + i] = None;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use dip_symalg::q;

    #[test]
    fn closure_and_infeasibility() {
        let mut d = Dbm::new(3);
        assert!(d.add(1, 2, &q(1, 1)));
        assert!(d.add(2, 0, &q(2, 1)));
        assert_eq!(d.get(1, 0), Some(&q(3, 1)));
        assert!(d.add(0, 1, &q(-3, 1)));
        assert!(!d.clone().add(0, 1, &q(-7, 2)));
        let mut e = Dbm::new(3);
        assert!(e.add(2, 0, &q(2, 1)));
        assert!(e.add(1, 2, &q(1, 1)));
        assert!(e.add(0, 1, &q(-3, 1)));
        assert_eq!(d, e);
        d.remove(2);
        assert_eq!(d.get(1, 0), Some(&q(3, 1)));
        assert_eq!(d.get(1, 2), None);
    }
}
