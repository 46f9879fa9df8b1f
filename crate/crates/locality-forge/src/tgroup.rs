//! Small finite groups presented by explicit multiplication tables, with
//! subgroup closure, quotients, abelianization (with discrete logarithms) and
//! the transfer map. Used for orbit automorphism groups of biset restrictions.

use crate::zlin::{AbElt, FinAb, Int};
use std::collections::HashMap;
use std::hash::Hash;

/// A finite group on elements 0..n with full multiplication table.
#[derive(Clone, Debug)]
pub struct TableGroup {
    pub n: usize,
    pub mul: Vec<Vec<usize>>,
    pub inv: Vec<usize>,
    pub id: usize,
}

impl TableGroup {
    /// Build from a closed element list and a multiplication closure.
    pub fn from_mult<T: Eq + Hash + Clone>(
        elems: Vec<T>,
        mult: impl Fn(&T, &T) -> T,
    ) -> (TableGroup, Vec<T>) {
        let index: HashMap<T, usize> =
            elems.iter().enumerate().map(|(i, e)| (e.clone(), i)).collect();
        let n = elems.len();
        let mut mul = vec![vec![0usize; n]; n];
        for i in 0..n {
            for j in 0..n {
                let prod = mult(&elems[i], &elems[j]);
                mul[i][j] = *index.get(&prod).expect("element list not closed");
            }
        }
        let id = (0..n)
            .find(|&e| (0..n).all(|i| mul[e][i] == i && mul[i][e] == i))
            .expect("no identity");
        let inv = (0..n)
            .map(|i| (0..n).find(|&j| mul[i][j] == id).expect("no inverse"))
            .collect();
        (TableGroup { n, mul, inv, id }, elems)
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn elem_order(&self, x: usize) -> usize {
        let mut acc = x;
        let mut k = 1;
        while acc != self.id {
            acc = self.mul[acc][x];
            k += 1;
        }
        k
    }

    pub fn is_abelian(&self) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| self.mul[i][j] == self.mul[j][i]))
    }

    pub fn power(&self, x: usize, k: usize) -> usize {
        let mut acc = self.id;
        for _ in 0..k {
            acc = self.mul[acc][x];
        }
        acc
    }

    /// Closure of a generating set (sorted element list).
    pub fn closure(&self, gens: &[usize]) -> Vec<usize> {
        let mut in_set = vec![false; self.n];
        in_set[self.id] = true;
        let mut out = vec![self.id];
        let mut stack = vec![self.id];
        while let Some(x) = stack.pop() {
            for &g in gens {
                for y in [self.mul[x][g], self.mul[g][x]] {
                    if !in_set[y] {
                        in_set[y] = true;
                        out.push(y);
                        stack.push(y);
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// The commutator subgroup (sorted element list).
    pub fn commutator_subgroup(&self) -> Vec<usize> {
        let mut comms = Vec::new();
        for i in 0..self.n {
            for j in 0..self.n {
                let c = self.mul[self.mul[self.mul[i][j]][self.inv[i]]][self.inv[j]];
                comms.push(c);
            }
        }
        comms.sort_unstable();
        comms.dedup();
        self.closure(&comms)
    }

    /// Quotient by a normal subgroup: returns the quotient group and the
    /// projection element -> quotient element.
    pub fn quotient(&self, normal: &[usize]) -> (TableGroup, Vec<usize>) {
        let in_n: Vec<bool> = {
            let mut v = vec![false; self.n];
            for &x in normal {
                v[x] = true;
            }
            v
        };
        // normality check
        for x in 0..self.n {
            for &k in normal {
                let c = self.mul[self.mul[x][k]][self.inv[x]];
                assert!(in_n[c], "subgroup not normal");
            }
        }
        // cosets by canonical (minimal) representative
        let mut coset_rep = vec![usize::MAX; self.n];
        let mut reps = Vec::new();
        for x in 0..self.n {
            if coset_rep[x] != usize::MAX {
                continue;
            }
            let mut members: Vec<usize> = normal.iter().map(|&k| self.mul[x][k]).collect();
            members.sort_unstable();
            let rep = members[0];
            let ri = reps.len();
            reps.push(rep);
            for m in members {
                coset_rep[m] = ri;
            }
        }
        let q_elems: Vec<usize> = (0..reps.len()).collect();
        let (tg, _) = TableGroup::from_mult(q_elems, |&a, &b| {
            coset_rep[self.mul[reps[a]][reps[b]]]
        });
        (tg, coset_rep)
    }

    /// Direct-product cyclic decomposition of an abelian group: generators,
    /// orders, and a full discrete-log table (element -> exponent vector).
    pub fn cyclic_decomposition(&self) -> (Vec<usize>, Vec<usize>, Vec<Vec<i64>>) {
        assert!(self.is_abelian());
        let mut gens: Vec<usize> = Vec::new();
        let mut orders: Vec<usize> = Vec::new();
        let mut h: Vec<bool> = vec![false; self.n];
        h[self.id] = true;
        let mut h_count = 1usize;
        while h_count < self.n {
            // element of maximal coset order
            let mut best: Option<(usize, usize)> = None;
            for x in 0..self.n {
                if h[x] {
                    continue;
                }
                let mut k = 1;
                let mut acc = x;
                while !h[acc] {
                    acc = self.mul[acc][x];
                    k += 1;
                }
                if best.map_or(true, |(_, bk)| k > bk) {
                    best = Some((x, k));
                }
            }
            let (x, k) = best.unwrap();
            // adjust inside the coset family x·H to get exact order k
            let members: Vec<usize> = (0..self.n).filter(|&e| h[e]).collect();
            let y = members
                .iter()
                .map(|&t| self.mul[x][t])
                .find(|&y| self.elem_order(y) == k)
                .expect("pure generator exists in an abelian group");
            gens.push(y);
            orders.push(k);
            // extend H by y
            let mut new_h = h.clone();
            for &e in &members {
                let mut acc = e;
                for _ in 0..k {
                    acc = self.mul[acc][y];
                    new_h[acc] = true;
                }
            }
            h = new_h;
            h_count = h.iter().filter(|&&b| b).count();
        }
        // log table by exponent-tuple enumeration
        let mut log = vec![Vec::new(); self.n];
        let mut filled = vec![false; self.n];
        let mut tuple = vec![0i64; gens.len()];
        loop {
            let mut acc = self.id;
            for (i, &g) in gens.iter().enumerate() {
                acc = self.mul[acc][self.power(g, tuple[i] as usize)];
            }
            assert!(!filled[acc], "decomposition not direct");
            filled[acc] = true;
            log[acc] = tuple.clone();
            let mut i = 0;
            loop {
                if i == gens.len() {
                    assert!(filled.iter().all(|&b| b));
                    return (gens, orders, log);
                }
                tuple[i] += 1;
                if (tuple[i] as usize) < orders[i] {
                    break;
                }
                tuple[i] = 0;
                i += 1;
            }
        }
    }

    /// Abelianization: the group ab(G) = G/[G,G] as a FinAb, plus the class
    /// map element -> AbElt.
    pub fn abelianization(&self) -> (FinAb, Vec<AbElt>) {
        let comm = self.commutator_subgroup();
        let (q, proj) = self.quotient(&comm);
        let (_gens, orders, log) = q.cyclic_decomposition();
        let fin = FinAb::cyclic_product(&orders.iter().map(|&o| o as Int).collect::<Vec<_>>());
        let classes = (0..self.n)
            .map(|x| {
                let l = &log[proj[x]];
                fin.from_raw(&l.iter().map(|&e| e as Int).collect::<Vec<_>>())
            })
            .collect();
        (fin, classes)
    }

    /// The transfer (Verlagerung) G -> ab(H) for a subgroup H, returned as
    /// per-element values in ab(H) together with ab(H) and H's class map.
    pub fn transfer(&self, h: &[usize]) -> (FinAb, Vec<AbElt>, Vec<AbElt>) {
        let in_h: Vec<bool> = {
            let mut v = vec![false; self.n];
            for &x in h {
                v[x] = true;
            }
            v
        };
        let h_pos: HashMap<usize, usize> = h.iter().enumerate().map(|(i, &x)| (x, i)).collect();
        // ab(H): build the subgroup as its own table group
        let (h_grp, h_elems) = TableGroup::from_mult(h.to_vec(), |&a, &b| self.mul[a][b]);
        let (ab_h, h_classes) = h_grp.abelianization();
        // left coset representatives of H
        let mut reps = Vec::new();
        let mut covered = vec![false; self.n];
        for x in 0..self.n {
            if covered[x] {
                continue;
            }
            reps.push(x);
            for &k in h {
                covered[self.mul[x][k]] = true;
            }
        }
        // Ver(g) = sum over reps r of class(r_{g,r}^{-1} · g · r) with the
        // standard left-coset recipe: g·r = r' · h, value += class(h)
        let mut values = Vec::new();
        for g in 0..self.n {
            let mut acc = ab_h.zero();
            for &r in &reps {
                let gr = self.mul[g][r];
                // find r' in reps with gr ∈ r'H
                let rp = *reps
                    .iter()
                    .find(|&&rp| in_h[self.mul[self.inv[rp]][gr]])
                    .expect("cosets partition");
                let hh = self.mul[self.inv[rp]][gr];
                acc = ab_h.add(&acc, &h_classes[h_pos[&hh]]);
            }
            values.push(acc);
        }
        let _ = h_elems;
        (ab_h, values, h_classes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// S3 as a table group via permutations of 3 points.
    fn s3() -> (TableGroup, Vec<Vec<usize>>) {
        let perms: Vec<Vec<usize>> = vec![
            vec![0, 1, 2],
            vec![1, 0, 2],
            vec![0, 2, 1],
            vec![2, 1, 0],
            vec![1, 2, 0],
            vec![2, 0, 1],
        ];
        TableGroup::from_mult(perms, |a, b| (0..3).map(|i| a[b[i]]).collect())
    }

    #[test]
    fn s3_structure() {
        let (g, _) = s3();
        assert_eq!(g.order(), 6);
        assert!(!g.is_abelian());
        let comm = g.commutator_subgroup();
        assert_eq!(comm.len(), 3);
        let (ab, classes) = g.abelianization();
        assert_eq!(ab.order(), 2);
        // transpositions map to the nonzero class
        let nonzero = classes.iter().filter(|c| !ab.is_zero(c)).count();
        assert_eq!(nonzero, 3);
    }

    #[test]
    fn quotient_s3_by_a3() {
        let (g, _) = s3();
        let a3 = g.commutator_subgroup();
        let (q, proj) = g.quotient(&a3);
        assert_eq!(q.order(), 2);
        assert_eq!(proj.len(), 6);
    }

    #[test]
    fn cyclic_decomposition_c6() {
        // C6 as Z/6 addition
        let (g, _) = TableGroup::from_mult((0..6).collect(), |&a, &b| (a + b) % 6);
        let (gens, orders, log) = g.cyclic_decomposition();
        assert_eq!(orders.iter().product::<usize>(), 6);
        assert_eq!(log.len(), 6);
        let _ = gens;
    }

    #[test]
    fn cyclic_decomposition_c2xc4() {
        let (g, _) = TableGroup::from_mult(
            (0..8).collect(),
            |&a: &usize, &b: &usize| {
                let (a1, a2) = (a % 2, a / 2);
                let (b1, b2) = (b % 2, b / 2);
                (a1 + b1) % 2 + 2 * ((a2 + b2) % 4)
            },
        );
        let (_, mut orders, _) = g.cyclic_decomposition();
        orders.sort_unstable();
        assert_eq!(orders, vec![2, 4]);
    }

    #[test]
    fn transfer_s3_to_c2() {
        let (g, _) = s3();
        // H = a transposition subgroup {id, (01)} = indices 0,1
        let (ab_h, values, _) = g.transfer(&[0, 1]);
        assert_eq!(ab_h.order(), 2);
        // transfer of an element of A3: products land in H evenly; the
        // transfer of a 3-cycle must vanish (|G:H| = 3 cosets permuted 3-cyclically)
        assert!(ab_h.is_zero(&values[4]));
        assert!(ab_h.is_zero(&values[5]));
    }
}
