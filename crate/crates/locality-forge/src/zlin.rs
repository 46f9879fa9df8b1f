//! Exact integer linear algebra: dense matrices over Z, Smith normal form with
//! unimodular transforms, integer linear solving, and finitely generated
//! (here: finite) abelian groups presented by generators and relations.
//!
//! Everything downstream (wreath abelianizations, locality kernels, cochain
//! complexes) reduces to this module; all arithmetic is integral, no modular
//! shortcuts.

use std::fmt;

/// Matrix entry type. Desk-scale inputs keep entries tiny, but Smith reduction
/// can grow intermediates; i128 plus overflow checks (enabled in release) is
/// comfortably safe here.
pub type Int = i128;

/// Dense row-major integer matrix.
#[derive(Clone, PartialEq, Eq)]
pub struct ZMat {
    pub rows: usize,
    pub cols: usize,
    data: Vec<Int>,
}

impl fmt::Debug for ZMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ZMat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", &self.data[i * self.cols..(i + 1) * self.cols])?;
        }
        write!(f, "]")
    }
}

impl ZMat {
    pub fn zero(rows: usize, cols: usize) -> ZMat {
        ZMat { rows, cols, data: vec![0; rows * cols] }
    }

    pub fn identity(n: usize) -> ZMat {
        let mut m = ZMat::zero(n, n);
        for i in 0..n {
            m[(i, i)] = 1;
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Int>>) -> ZMat {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let mut m = ZMat::zero(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged rows");
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Diagonal matrix from the given entries.
    pub fn diag(d: &[Int]) -> ZMat {
        let mut m = ZMat::zero(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn col(&self, j: usize) -> Vec<Int> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_col(&mut self, j: usize, v: &[Int]) {
        assert_eq!(v.len(), self.rows);
        for i in 0..self.rows {
            self[(i, j)] = v[i];
        }
    }

    /// Horizontal concatenation [self | other].
    pub fn hcat(&self, other: &ZMat) -> ZMat {
        assert_eq!(self.rows, other.rows);
        let mut m = ZMat::zero(self.rows, self.cols + other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m[(i, j)] = self[(i, j)];
            }
            for j in 0..other.cols {
                m[(i, self.cols + j)] = other[(i, j)];
            }
        }
        m
    }

    pub fn mul(&self, other: &ZMat) -> ZMat {
        assert_eq!(self.cols, other.rows, "dimension mismatch in mul");
        let mut m = ZMat::zero(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0 {
                    continue;
                }
                for j in 0..other.cols {
                    m[(i, j)] += a * other[(k, j)];
                }
            }
        }
        m
    }

    pub fn mul_vec(&self, v: &[Int]) -> Vec<Int> {
        assert_eq!(self.cols, v.len(), "dimension mismatch in mul_vec");
        let mut out = vec![0; self.rows];
        for i in 0..self.rows {
            let mut acc = 0;
            for j in 0..self.cols {
                acc += self[(i, j)] * v[j];
            }
            out[i] = acc;
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == 0)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for i in 0..self.rows {
            self.data.swap(i * self.cols + a, i * self.cols + b);
        }
    }

    /// row[a] += f * row[b]
    fn add_row(&mut self, a: usize, b: usize, f: Int) {
        if f == 0 {
            return;
        }
        for j in 0..self.cols {
            let v = self.data[b * self.cols + j];
            self.data[a * self.cols + j] += f * v;
        }
    }

    /// col[a] += f * col[b]
    fn add_col(&mut self, a: usize, b: usize, f: Int) {
        if f == 0 {
            return;
        }
        for i in 0..self.rows {
            let v = self.data[i * self.cols + b];
            self.data[i * self.cols + a] += f * v;
        }
    }

    fn negate_row(&mut self, a: usize) {
        for j in 0..self.cols {
            self.data[a * self.cols + j] = -self.data[a * self.cols + j];
        }
    }

    fn negate_col(&mut self, a: usize) {
        for i in 0..self.rows {
            self.data[i * self.cols + a] = -self.data[i * self.cols + a];
        }
    }
}

impl std::ops::Index<(usize, usize)> for ZMat {
    type Output = Int;
    fn index(&self, (i, j): (usize, usize)) -> &Int {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ZMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Int {
        &mut self.data[i * self.cols + j]
    }
}

/// Smith normal form `u * a * v = s` with all four transforms tracked.
pub struct Snf {
    pub s: ZMat,
    pub u: ZMat,
    pub u_inv: ZMat,
    pub v: ZMat,
    pub v_inv: ZMat,
    pub rank: usize,
}

/// Compute the Smith normal form of `a`. Pivoting on the smallest nonzero
/// entry keeps intermediate growth modest on the sparse incidence-style
/// matrices that arise here.
pub fn snf(a: &ZMat) -> Snf {
    let mut s = a.clone();
    let mut u = ZMat::identity(a.rows);
    let mut u_inv = ZMat::identity(a.rows);
    let mut v = ZMat::identity(a.cols);
    let mut v_inv = ZMat::identity(a.cols);
    let n = a.rows.min(a.cols);
    let mut t = 0;
    while t < n {
        // Find the smallest-magnitude nonzero pivot in the trailing block.
        let mut pivot: Option<(usize, usize)> = None;
        let mut best: Int = 0;
        for i in t..s.rows {
            for j in t..s.cols {
                let x = s[(i, j)].abs();
                if x != 0 && (pivot.is_none() || x < best) {
                    pivot = Some((i, j));
                    best = x;
                    if x == 1 {
                        break;
                    }
                }
            }
            if best == 1 {
                break;
            }
        }
        let (pi, pj) = match pivot {
            None => break,
            Some(p) => p,
        };
        s.swap_rows(t, pi);
        u.swap_rows(t, pi);
        u_inv.swap_cols(t, pi);
        s.swap_cols(t, pj);
        v.swap_cols(t, pj);
        v_inv.swap_rows(t, pj);

        // Clear row and column t.
        let mut clean = true;
        for i in (t + 1)..s.rows {
            let q = div_round(s[(i, t)], s[(t, t)]);
            if q != 0 {
                s.add_row(i, t, -q);
                u.add_row(i, t, -q);
                u_inv.add_col(t, i, q);
            }
            if s[(i, t)] != 0 {
                clean = false;
            }
        }
        for j in (t + 1)..s.cols {
            let q = div_round(s[(t, j)], s[(t, t)]);
            if q != 0 {
                s.add_col(j, t, -q);
                v.add_col(j, t, -q);
                v_inv.add_row(t, j, q);
            }
            if s[(t, j)] != 0 {
                clean = false;
            }
        }
        if !clean {
            continue; // pivot shrank; repeat this step
        }
        // Enforce divisibility of the trailing block by the pivot.
        let p = s[(t, t)];
        let mut fixed = true;
        'outer: for i in (t + 1)..s.rows {
            for j in (t + 1)..s.cols {
                if s[(i, j)] % p != 0 {
                    // Fold row i into row t and redo the step.
                    s.add_row(t, i, 1);
                    u.add_row(t, i, 1);
                    u_inv.add_col(i, t, -1);
                    fixed = false;
                    break 'outer;
                }
            }
        }
        if !fixed {
            continue;
        }
        if s[(t, t)] < 0 {
            s.negate_row(t);
            u.negate_row(t);
            u_inv.negate_col(t);
        }
        t += 1;
    }
    Snf { rank: t, s, u, u_inv, v, v_inv }
}

/// Rounded division keeping |a - q*b| <= |b|/2 (minimises remainders).
fn div_round(a: Int, b: Int) -> Int {
    debug_assert!(b != 0);
    let q = a / b;
    let r = a - q * b;
    if 2 * r.abs() > b.abs() {
        if (r > 0) == (b > 0) {
            q + 1
        } else {
            q - 1
        }
    } else {
        q
    }
}

impl Snf {
    /// Solve `a x = b` over Z, where `self = snf(a)`.
    pub fn solve(&self, b: &[Int]) -> Option<Vec<Int>> {
        let ub = self.u.mul_vec(b);
        let mut y = vec![0; self.s.cols];
        for i in 0..self.s.rows {
            let d = if i < self.s.cols { self.s[(i, i)] } else { 0 };
            if i < self.rank {
                if ub[i] % d != 0 {
                    return None;
                }
                y[i] = ub[i] / d;
            } else if ub[i] != 0 {
                return None;
            }
        }
        Some(self.v.mul_vec(&y))
    }

    /// Basis of the integer kernel of `a` (columns of the returned matrix).
    pub fn kernel(&self) -> ZMat {
        let free = self.s.cols - self.rank;
        let mut k = ZMat::zero(self.s.cols, free);
        for (idx, j) in (self.rank..self.s.cols).enumerate() {
            for i in 0..self.s.cols {
                k[(i, idx)] = self.v[(i, j)];
            }
        }
        k
    }
}

/// A finite abelian group, presented by `raw_gens` generators subject to the
/// columns of a relation matrix, stored in invariant-factor form.
///
/// Elements are vectors in canonical coordinates, reduced modulo `orders`.
#[derive(Clone, Debug)]
pub struct FinAb {
    /// Invariant factors > 1, each dividing the next.
    pub orders: Vec<Int>,
    pub raw_gens: usize,
    /// canonical = to_canon * raw (then reduce mod orders).
    to_canon: ZMat,
    /// A lift: raw = from_canon * canonical represents the same element.
    from_canon: ZMat,
}

pub type AbElt = Vec<Int>;

impl FinAb {
    /// Quotient Z^gens / columns(relations). Panics if the quotient is
    /// infinite (never the case in this crate: all kernels are finite).
    pub fn from_relations(gens: usize, relations: &ZMat) -> FinAb {
        assert_eq!(relations.rows, gens);
        let f = snf(relations);
        // U * R * V = S, so Z^g / cols(R) = Z^g / cols(U^-1 S) ≅ ⊕ Z/s_i via y = U x.
        let mut orders = Vec::new();
        let mut kept = Vec::new();
        for i in 0..gens {
            let d = if i < f.rank { f.s[(i, i)] } else { 0 };
            assert!(d != 0, "infinite abelian quotient; finite groups expected");
            if d > 1 {
                orders.push(d);
                kept.push(i);
            }
        }
        let mut to_canon = ZMat::zero(orders.len(), gens);
        let mut from_canon = ZMat::zero(gens, orders.len());
        for (r, &i) in kept.iter().enumerate() {
            for j in 0..gens {
                to_canon[(r, j)] = f.u[(i, j)].rem_euclid(orders[r]);
                from_canon[(j, r)] = f.u_inv[(j, i)];
            }
        }
        FinAb { orders, raw_gens: gens, to_canon, from_canon }
    }

    /// The trivial group on `gens` raw generators.
    pub fn trivial(gens: usize) -> FinAb {
        FinAb::from_relations(gens, &ZMat::identity(gens))
    }

    /// Free-of-relations finite cyclic product ⊕ Z/d_i presented on its own
    /// generators.
    pub fn cyclic_product(ds: &[Int]) -> FinAb {
        FinAb::from_relations(ds.len(), &ZMat::diag(ds))
    }

    pub fn rank(&self) -> usize {
        self.orders.len()
    }

    pub fn order(&self) -> Int {
        self.orders.iter().product()
    }

    pub fn exponent(&self) -> Int {
        self.orders.last().copied().unwrap_or(1)
    }

    pub fn zero(&self) -> AbElt {
        vec![0; self.orders.len()]
    }

    pub fn is_zero(&self, e: &AbElt) -> bool {
        e.iter().all(|&x| x == 0)
    }

    pub fn reduce(&self, e: &[Int]) -> AbElt {
        e.iter().zip(&self.orders).map(|(&x, &d)| x.rem_euclid(d)).collect()
    }

    pub fn add(&self, a: &AbElt, b: &AbElt) -> AbElt {
        self.reduce(&a.iter().zip(b).map(|(&x, &y)| x + y).collect::<Vec<_>>())
    }

    pub fn sub(&self, a: &AbElt, b: &AbElt) -> AbElt {
        self.reduce(&a.iter().zip(b).map(|(&x, &y)| x - y).collect::<Vec<_>>())
    }

    pub fn neg(&self, a: &AbElt) -> AbElt {
        self.reduce(&a.iter().map(|&x| -x).collect::<Vec<_>>())
    }

    pub fn scale(&self, k: Int, a: &AbElt) -> AbElt {
        self.reduce(&a.iter().map(|&x| k * x).collect::<Vec<_>>())
    }

    /// Map raw-generator coordinates to a canonical element.
    pub fn from_raw(&self, raw: &[Int]) -> AbElt {
        assert_eq!(raw.len(), self.raw_gens);
        self.reduce(&self.to_canon.mul_vec(raw))
    }

    /// A raw-coordinate lift of a canonical element.
    pub fn to_raw(&self, e: &AbElt) -> Vec<Int> {
        self.from_canon.mul_vec(e)
    }

    /// Enumerate all elements (canonical coordinates), deterministic order.
    pub fn elements(&self) -> Vec<AbElt> {
        let mut out = vec![self.zero()];
        for (i, &d) in self.orders.iter().enumerate() {
            let mut next = Vec::with_capacity(out.len() * d as usize);
            for e in &out {
                for k in 0..d {
                    let mut e2 = e.clone();
                    e2[i] = k;
                    next.push(e2);
                }
            }
            out = next;
        }
        out
    }

    /// Check two groups are abstractly isomorphic (equal invariant factors).
    pub fn isomorphic(&self, other: &FinAb) -> bool {
        self.orders == other.orders
    }
}

/// A homomorphism between finite abelian groups, as an integer matrix on
/// canonical generators.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AbHom {
    pub matrix: ZMat, // target.rank x source.rank
    pub src_orders: Vec<Int>,
    pub tgt_orders: Vec<Int>,
}

impl AbHom {
    pub fn new(src: &FinAb, tgt: &FinAb, matrix: ZMat) -> AbHom {
        assert_eq!(matrix.rows, tgt.rank());
        assert_eq!(matrix.cols, src.rank());
        let h = AbHom {
            matrix,
            src_orders: src.orders.clone(),
            tgt_orders: tgt.orders.clone(),
        };
        assert!(h.well_defined(), "hom not well defined on torsion");
        h
    }

    /// Build from images of the source's canonical generators.
    pub fn from_gen_images(src: &FinAb, tgt: &FinAb, images: &[AbElt]) -> AbHom {
        assert_eq!(images.len(), src.rank());
        let mut m = ZMat::zero(tgt.rank(), src.rank());
        for (j, img) in images.iter().enumerate() {
            m.set_col(j, img);
        }
        AbHom::new(src, tgt, m)
    }

    pub fn identity(g: &FinAb) -> AbHom {
        AbHom {
            matrix: ZMat::identity(g.rank()),
            src_orders: g.orders.clone(),
            tgt_orders: g.orders.clone(),
        }
    }

    /// order_j * column_j must vanish in the target for each generator.
    pub fn well_defined(&self) -> bool {
        for j in 0..self.src_orders.len() {
            for i in 0..self.tgt_orders.len() {
                if (self.src_orders[j] * self.matrix[(i, j)]) % self.tgt_orders[i] != 0 {
                    return false;
                }
            }
        }
        true
    }

    pub fn apply(&self, e: &AbElt) -> AbElt {
        self.matrix
            .mul_vec(e)
            .iter()
            .zip(&self.tgt_orders)
            .map(|(&x, &d)| x.rem_euclid(d))
            .collect()
    }

    /// self ∘ other (other first).
    pub fn compose(&self, other: &AbHom) -> AbHom {
        assert_eq!(self.src_orders, other.tgt_orders);
        let mut m = self.matrix.mul(&other.matrix);
        for i in 0..m.rows {
            for j in 0..m.cols {
                m[(i, j)] = m[(i, j)].rem_euclid(self.tgt_orders[i]);
            }
        }
        AbHom {
            matrix: m,
            src_orders: other.src_orders.clone(),
            tgt_orders: self.tgt_orders.clone(),
        }
    }

    /// Equality as maps (matrices reduced mod target orders).
    pub fn same_map(&self, other: &AbHom) -> bool {
        if self.src_orders != other.src_orders || self.tgt_orders != other.tgt_orders {
            return false;
        }
        for i in 0..self.matrix.rows {
            for j in 0..self.matrix.cols {
                if (self.matrix[(i, j)] - other.matrix[(i, j)]).rem_euclid(self.tgt_orders[i]) != 0
                {
                    return false;
                }
            }
        }
        true
    }
}

/// Modular inverse of `a` modulo `m` (m > 0, gcd(a, m) = 1).
pub fn mod_inverse(a: Int, m: Int) -> Option<Int> {
    let (mut r0, mut r1) = (m, a.rem_euclid(m));
    let (mut t0, mut t1) = (0, 1);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    if r0 != 1 {
        return None;
    }
    Some(t0.rem_euclid(m))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_snf(a: &ZMat) {
        let f = snf(a);
        // u * a * v = s
        assert_eq!(f.u.mul(a).mul(&f.v), f.s);
        // transforms are mutually inverse
        assert_eq!(f.u.mul(&f.u_inv), ZMat::identity(a.rows));
        assert_eq!(f.v.mul(&f.v_inv), ZMat::identity(a.cols));
        // diagonal, divisibility chain
        for i in 0..f.s.rows {
            for j in 0..f.s.cols {
                if i != j {
                    assert_eq!(f.s[(i, j)], 0);
                }
            }
        }
        for i in 1..f.rank {
            assert_eq!(f.s[(i, i)] % f.s[(i - 1, i - 1)], 0);
        }
    }

    #[test]
    fn snf_small() {
        check_snf(&ZMat::from_rows(vec![vec![2, 4, 4], vec![-6, 6, 12], vec![10, 4, 16]]));
        check_snf(&ZMat::from_rows(vec![vec![0, 0], vec![0, 0]]));
        check_snf(&ZMat::from_rows(vec![vec![1, 2, 3]]));
        check_snf(&ZMat::from_rows(vec![vec![6], vec![10], vec![15]]));
    }

    #[test]
    fn snf_invariant_factors() {
        // Classic example: diag over Z of [[2,4,4],[-6,6,12],[10,4,16]] is (2, 2, 156).
        let f = snf(&ZMat::from_rows(vec![vec![2, 4, 4], vec![-6, 6, 12], vec![10, 4, 16]]));
        assert_eq!((f.s[(0, 0)], f.s[(1, 1)], f.s[(2, 2)]), (2, 2, 156));
    }

    #[test]
    fn solve_and_kernel() {
        let a = ZMat::from_rows(vec![vec![2, 0, 4], vec![0, 3, 6]]);
        let f = snf(&a);
        let x = f.solve(&[6, 9]).expect("solvable");
        assert_eq!(a.mul_vec(&x), vec![6, 9]);
        assert!(f.solve(&[1, 0]).is_none());
        let k = f.kernel();
        assert_eq!(k.cols, 1);
        assert_eq!(a.mul(&k).is_zero(), true);
    }

    #[test]
    fn finab_from_relations() {
        // Z^2 / <(2,0),(0,4)> = Z/2 + Z/4
        let g = FinAb::from_relations(2, &ZMat::diag(&[2, 4]));
        assert_eq!(g.orders, vec![2, 4]);
        assert_eq!(g.order(), 8);
        let e = g.from_raw(&[1, 3]);
        assert_eq!(g.add(&e, &e), g.from_raw(&[2, 6]));
        assert!(g.is_zero(&g.from_raw(&[2, 4])));
        // raw lift round-trips
        let raw = g.to_raw(&e);
        assert_eq!(g.from_raw(&raw), e);
    }

    #[test]
    fn finab_nontrivial_presentation() {
        // Z^2 / <(2,2),(0,4)>: invariant factors 2, 4.
        let rel = ZMat::from_rows(vec![vec![2, 0], vec![2, 4]]);
        let g = FinAb::from_relations(2, &rel);
        assert_eq!(g.order(), 8);
        // relation columns die
        assert!(g.is_zero(&g.from_raw(&[2, 2])));
        assert!(g.is_zero(&g.from_raw(&[0, 4])));
        assert_eq!(g.elements().len(), 8);
    }

    #[test]
    fn abhom_compose() {
        let a = FinAb::cyclic_product(&[4]);
        let b = FinAb::cyclic_product(&[2]);
        // reduction map Z/4 -> Z/2
        let f = AbHom::from_gen_images(&a, &b, &[vec![1]]);
        let g = AbHom::from_gen_images(&b, &a, &[vec![2]]); // x -> 2x
        let gf = g.compose(&f);
        assert_eq!(gf.apply(&vec![1]), vec![2]);
        assert_eq!(gf.apply(&vec![2]), vec![0]);
    }

    #[test]
    fn mod_inverse_works() {
        assert_eq!(mod_inverse(3, 8), Some(3));
        assert_eq!(mod_inverse(2, 8), None);
        for a in 1..30 {
            if let Some(x) = mod_inverse(a, 31) {
                assert_eq!((a * x).rem_euclid(31), 1);
            }
        }
    }
}
