//! Localities over a fusion system: categories fibered over the fusion
//! category with p-group kernels, together with the structural maps τ (from
//! the transporter category of P) and π (to the fusion system).
//!
//! Implementations:
//! - [`CosetLocality`]: transporter-style localities from an ambient group
//!   (transporter category of P, and T_G(R,Q)/O^p(C_G(R)) for a realizing G —
//!   the independent oracle for the perfect locality).
//! - [`OmegaLocality`]: the locality carried by a basic P×P-set Ω: morphisms
//!   over φ are classes of twisted Ω-automorphisms modulo the subgroup
//!   generated by orbit permutations; kernels are products of abelianized
//!   orbit automorphism groups.
//! - [`TableLocality`]: fully materialized tables; quotients by kernel
//!   subfunctors land here.
//! - [`NaturalLocality`]: the Ω-locality of the natural basic set, cut down
//!   to a chosen object set by quotienting away the kernel coordinates whose
//!   stabilizer types fall outside it.

use crate::biset::{extended_basic_set, Biset, Points};
use crate::fusion::{
    center_product, CheckOutcome, ExtMor, Exterior, FusionError, FusionSystem, ObjectSet,
};
use crate::group::{conjugation_hom, transporter, GroupHom, Subgroup};
use crate::tgroup::TableGroup;
use crate::zlin::{AbElt, AbHom, FinAb, Int, ZMat};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::{HashMap, HashSet};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LocalityError {
    /// The proposed kernel values are not a subfunctor (transport escapes).
    NotAFunctor(String),
    /// Composition does not descend to the proposed quotient.
    IllDefinedComposition(String),
    /// A permutation handed to the orbit-class projection does not commute
    /// with the relevant actions.
    NotEquivariant,
    /// A materialization or sweep exceeds the requested size cap.
    TooLarge(String),
    Fusion(FusionError),
}

/// A locality presented operationally: object set, per-pair morphism counts,
/// the projection π to fusion homs, the structural map τ on transporter
/// elements, and composition.
///
/// Objects are global object indices of the fusion system; `L(Q,R)` is the
/// set of morphisms R -> Q, encoded as `0..size(q, r)`. `pi` returns the
/// index of the underlying hom in `fusion().homs(q, r)`; `tau` takes an
/// element u of P with u R u⁻¹ ≤ Q.
pub trait LocalityOps {
    fn fusion(&self) -> &FusionSystem;
    fn object_set(&self) -> &ObjectSet;
    fn size(&self, q: usize, r: usize) -> usize;
    fn pi(&self, q: usize, r: usize, m: usize) -> usize;
    fn tau(&self, q: usize, r: usize, u: usize) -> usize;
    fn compose(&self, q: usize, r: usize, t: usize, x: usize, y: usize) -> usize;
    /// Invariant factors of Ker(π_Q) when it is abelian, None otherwise.
    fn kernel_invariants(&self, q: usize) -> Option<Vec<Int>>;
}

/// Index of the identity hom (the inclusion Q -> Q) in F(Q, Q).
pub fn identity_hom(f: &FusionSystem, q: usize) -> usize {
    f.hom_position(q, q, &f.object(q).elems).expect("identity hom present")
}

/// The identity morphism of Q: τ of the identity element.
pub fn identity_mor(l: &dyn LocalityOps, q: usize) -> usize {
    l.tau(q, q, l.fusion().group().identity_id())
}

/// Morphism ids of Ker(π_Q) ⊆ L(Q, Q).
pub fn kernel_ids(l: &dyn LocalityOps, q: usize) -> Vec<usize> {
    let idh = identity_hom(l.fusion(), q);
    (0..l.size(q, q)).filter(|&m| l.pi(q, q, m) == idh).collect()
}

/// Invariant factors from a list of morphism ids closed under composition,
/// when the group they form is abelian.
pub(crate) fn invariants_from_ids(l: &dyn LocalityOps, q: usize, ids: &[usize]) -> Option<Vec<Int>> {
    let (tg, _) = TableGroup::from_mult(ids.to_vec(), |&a, &b| l.compose(q, q, q, a, b));
    if !tg.is_abelian() {
        return None;
    }
    let (_, orders, _) = tg.cyclic_decomposition();
    Some(normal_invariants(&orders.iter().map(|&o| o as Int).collect::<Vec<_>>()))
}

/// Canonical invariant-factor form of a cyclic-order multiset.
pub fn normal_invariants(orders: &[Int]) -> Vec<Int> {
    FinAb::cyclic_product(orders).orders.clone()
}

pub(crate) fn pair_list(l: &dyn LocalityOps) -> Vec<(usize, usize)> {
    let members = &l.object_set().members;
    let mut out = Vec::new();
    for &q in members {
        for &r in members {
            out.push((q, r));
        }
    }
    out
}

/// Morphism sample: all of 0..n when n ≤ cap, otherwise `cap` seeded draws.
fn sample_ids(n: usize, cap: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if n <= cap {
        (0..n).collect()
    } else {
        (0..cap).map(|_| rng.gen_range(0..n)).collect()
    }
}

/// Category structure: identity laws, associativity, functoriality of π,
/// multiplicativity of τ, and π∘τ = conjugation. Pairs larger than `cap`
/// are probed with `cap` seeded samples instead of exhaustively.
pub fn check_structure(l: &dyn LocalityOps, cap: usize, seed: u64) -> CheckOutcome {
    let f = l.fusion();
    let g = f.group();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let members = l.object_set().members.clone();
    // identity laws and π on identities
    for &q in &members {
        let e = identity_mor(l, q);
        if l.pi(q, q, e) != identity_hom(f, q) {
            return CheckOutcome { pass: false, witness: Some(format!("pi(id_{q}) != id")) };
        }
    }
    for (q, r) in pair_list(l) {
        let eq = identity_mor(l, q);
        let er = identity_mor(l, r);
        for x in sample_ids(l.size(q, r), cap, &mut rng) {
            if l.compose(q, q, r, eq, x) != x || l.compose(q, r, r, x, er) != x {
                return CheckOutcome {
                    pass: false,
                    witness: Some(format!("identity law fails at L({q},{r}) id {x}")),
                };
            }
        }
    }
    // π functorial, associativity, τ multiplicative, π∘τ = conjugation
    for &q in &members {
        for &r in &members {
            // π ∘ τ = conjugation map
            let tp = transporter(f.sylow(), f.object(r), f.object(q));
            for &u in &tp {
                let hom = conjugation_hom(u, f.object(r), f.object(q)).expect("conj hom");
                let hpos = f.hom_position(q, r, &hom.map).expect("conj hom in F");
                if l.pi(q, r, l.tau(q, r, u)) != hpos {
                    return CheckOutcome {
                        pass: false,
                        witness: Some(format!("pi(tau({u})) != c_{u} at ({q},{r})")),
                    };
                }
            }
            for &t in &members {
                // τ multiplicative
                let t_qr = transporter(f.sylow(), f.object(r), f.object(q));
                let t_rt = transporter(f.sylow(), f.object(t), f.object(r));
                for &u in &t_qr {
                    for &v in &t_rt {
                        let uv = g.mul(u, v);
                        if l.compose(q, r, t, l.tau(q, r, u), l.tau(r, t, v))
                            != l.tau(q, t, uv)
                        {
                            return CheckOutcome {
                                pass: false,
                                witness: Some(format!(
                                    "tau not multiplicative at ({q},{r},{t}) u={u} v={v}"
                                )),
                            };
                        }
                    }
                }
                // π functorial + associativity on sampled triples
                let budget = (cap as f64).cbrt().ceil() as usize + 1;
                let xs = sample_ids(l.size(q, r), budget, &mut rng);
                let ys = sample_ids(l.size(r, t), budget, &mut rng);
                for &x in &xs {
                    for &y in &ys {
                        let xy = l.compose(q, r, t, x, y);
                        let hx = &f.homs(q, r)[l.pi(q, r, x)];
                        let hy = &f.homs(r, t)[l.pi(r, t, y)];
                        let hxy = hx.compose(hy);
                        if f.hom_position(q, t, &hxy.map) != Some(l.pi(q, t, xy)) {
                            return CheckOutcome {
                                pass: false,
                                witness: Some(format!(
                                    "pi not functorial at ({q},{r},{t}) x={x} y={y}"
                                )),
                            };
                        }
                        for &w in &members {
                            for &z in &sample_ids(l.size(t, w), budget, &mut rng) {
                                let a = l.compose(q, t, w, xy, z);
                                let yz = l.compose(r, t, w, y, z);
                                let b = l.compose(q, r, w, x, yz);
                                if a != b {
                                    return CheckOutcome {
                                        pass: false,
                                        witness: Some(format!(
                                            "associativity fails at ({q},{r},{t},{w})"
                                        )),
                                    };
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    CheckOutcome { pass: true, witness: None }
}

/// Divisibility: π is full, fibers all have the kernel's size, and the right
/// kernel action on each fiber is regular.
pub fn check_divisible(l: &dyn LocalityOps, cap: usize, seed: u64) -> CheckOutcome {
    let f = l.fusion();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (q, r) in pair_list(l) {
        let n = l.size(q, r);
        let nh = f.homs(q, r).len();
        let ker = kernel_ids_capped(l, r, cap);
        match ker {
            Some(ker) => {
                if n != nh * ker.len() {
                    return CheckOutcome {
                        pass: false,
                        witness: Some(format!(
                            "|L({q},{r})| = {n} != |F|*|Ker| = {nh}*{}",
                            ker.len()
                        )),
                    };
                }
                if n <= cap {
                    // exhaustive: fibers partition; kernel acts freely and
                    // transitively on each fiber
                    let mut fibers: HashMap<usize, Vec<usize>> = HashMap::new();
                    for m in 0..n {
                        fibers.entry(l.pi(q, r, m)).or_default().push(m);
                    }
                    if fibers.len() != nh {
                        return CheckOutcome {
                            pass: false,
                            witness: Some(format!("pi not full on L({q},{r})")),
                        };
                    }
                    for (h, fib) in &fibers {
                        let x = fib[0];
                        let mut seen = HashSet::new();
                        for &k in &ker {
                            let y = l.compose(q, r, r, x, k);
                            if l.pi(q, r, y) != *h || !seen.insert(y) {
                                return CheckOutcome {
                                    pass: false,
                                    witness: Some(format!(
                                        "kernel action not regular on fiber {h} of L({q},{r})"
                                    )),
                                };
                            }
                        }
                        if seen.len() != fib.len() {
                            return CheckOutcome {
                                pass: false,
                                witness: Some(format!(
                                    "fiber {h} of L({q},{r}) not a single kernel orbit"
                                )),
                            };
                        }
                    }
                } else {
                    // sampled probes: kernel translation stays in the fiber
                    // and is injective from a random basepoint
                    for _ in 0..cap {
                        let x = rng.gen_range(0..n);
                        let k1 = ker[rng.gen_range(0..ker.len())];
                        let k2 = ker[rng.gen_range(0..ker.len())];
                        let y1 = l.compose(q, r, r, x, k1);
                        let y2 = l.compose(q, r, r, x, k2);
                        if l.pi(q, r, y1) != l.pi(q, r, x) || ((k1 != k2) && y1 == y2) {
                            return CheckOutcome {
                                pass: false,
                                witness: Some(format!(
                                    "sampled kernel action fails on L({q},{r})"
                                )),
                            };
                        }
                    }
                }
            }
            None => {
                // kernel too large to enumerate: check counting only, via
                // kernel invariants
                let ko = l
                    .kernel_invariants(r)
                    .map(|inv| inv.iter().product::<Int>() as usize)
                    .unwrap_or(0);
                if ko == 0 || n != nh * ko {
                    return CheckOutcome {
                        pass: false,
                        witness: Some(format!("size mismatch on large pair ({q},{r})")),
                    };
                }
            }
        }
    }
    CheckOutcome { pass: true, witness: None }
}

/// Kernel ids if the diagonal hom-set is small enough to enumerate.
fn kernel_ids_capped(l: &dyn LocalityOps, q: usize, cap: usize) -> Option<Vec<usize>> {
    if l.size(q, q) <= cap.max(1) * 64 {
        Some(kernel_ids(l, q))
    } else {
        None
    }
}

/// Coherence: x · τ_R(v) = τ_Q(π(x)(v)) · x for every morphism x: R -> Q and
/// every v in R.
pub fn check_coherent(l: &dyn LocalityOps, cap: usize, seed: u64) -> CheckOutcome {
    let f = l.fusion();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (q, r) in pair_list(l) {
        for x in sample_ids(l.size(q, r), cap, &mut rng) {
            let hom = &f.homs(q, r)[l.pi(q, r, x)];
            for &v in &f.object(r).elems.clone() {
                let w = hom.apply(v);
                let lhs = l.compose(q, r, r, x, l.tau(r, r, v));
                let rhs = l.compose(q, q, r, l.tau(q, q, w), x);
                if lhs != rhs {
                    return CheckOutcome {
                        pass: false,
                        witness: Some(format!("coherence fails at ({q},{r}) x={x} v={v}")),
                    };
                }
            }
        }
    }
    CheckOutcome { pass: true, witness: None }
}

/// p-coherence: coherent with kernels of p-power order.
pub fn check_p_coherent(l: &dyn LocalityOps, cap: usize, seed: u64) -> CheckOutcome {
    let p = l.fusion().p() as Int;
    for &q in &l.object_set().members.clone() {
        let ko = match l.kernel_invariants(q) {
            Some(inv) => inv.iter().product::<Int>(),
            None => match kernel_ids_capped(l, q, cap) {
                Some(ids) => ids.len() as Int,
                None => {
                    return CheckOutcome {
                        pass: false,
                        witness: Some(format!("kernel at {q} not measurable")),
                    }
                }
            },
        };
        let mut n = ko;
        while n % p == 0 {
            n /= p;
        }
        if n != 1 {
            return CheckOutcome {
                pass: false,
                witness: Some(format!("kernel at {q} has order {ko}, not a p-power")),
            };
        }
    }
    check_coherent(l, cap, seed)
}

/// Report of the perfection checks.
#[derive(Debug, Clone)]
pub struct PerfectReport {
    pub divisible: CheckOutcome,
    pub coherent: CheckOutcome,
    pub p_kernels: CheckOutcome,
    /// Ker(π_Q) ⊆ τ_Q(N_P(Q)) at fully normalized Q.
    pub p_bounded: CheckOutcome,
    /// Ker(τ_Q) equals the hyperfocal subgroup of the centralizer system at
    /// fully centralized Q.
    pub hyperfocal_kernel: CheckOutcome,
    /// Exactness of 1 -> H -> C_P(Q) -> L(Q) -> F(Q) -> 1 at fully
    /// normalized Q.
    pub localizer: CheckOutcome,
}

impl PerfectReport {
    pub fn all_pass(&self) -> bool {
        self.divisible.pass
            && self.coherent.pass
            && self.p_kernels.pass
            && self.p_bounded.pass
            && self.hyperfocal_kernel.pass
            && self.localizer.pass
    }
}

/// Full perfection check: divisible, coherent, p-group kernels, P-bounded,
/// hyperfocal kernel identity, and the localizer exact sequence.
pub fn check_perfect(l: &dyn LocalityOps, cap: usize, seed: u64) -> PerfectReport {
    let f = l.fusion();
    let pass = || CheckOutcome { pass: true, witness: None };
    let mut p_bounded = pass();
    let mut hyperfocal_kernel = pass();
    let mut localizer = pass();
    for &q in &l.object_set().members.clone() {
        let qs = f.object(q).clone();
        let np = f.sylow().normalizer(&qs);
        let cp = f.sylow().centralizer(&qs);
        let e = identity_mor(l, q);
        if f.is_fully_centralized(q) {
            // Ker(τ_Q) = hyperfocal subgroup of the centralizer system
            let h = f.hyperfocal_centralizer(q).expect("fully centralized");
            let ker_tau: Vec<usize> = np
                .elems
                .iter()
                .copied()
                .filter(|&u| l.tau(q, q, u) == e)
                .collect();
            if ker_tau != h.elems {
                hyperfocal_kernel = CheckOutcome {
                    pass: false,
                    witness: Some(format!(
                        "Ker(tau_{q}) has order {} but the hyperfocal centralizer has order {}",
                        ker_tau.len(),
                        h.order()
                    )),
                };
            }
        }
        if f.is_fully_normalized(q) {
            let ker = match kernel_ids_capped(l, q, cap) {
                Some(k) => k,
                None => {
                    localizer = CheckOutcome {
                        pass: false,
                        witness: Some(format!("kernel at {q} too large to enumerate")),
                    };
                    continue;
                }
            };
            let tau_np: HashSet<usize> =
                np.elems.iter().map(|&u| l.tau(q, q, u)).collect();
            if !ker.iter().all(|m| tau_np.contains(m)) {
                p_bounded = CheckOutcome {
                    pass: false,
                    witness: Some(format!("Ker(pi_{q}) not inside tau(N_P(Q))")),
                };
            }
            // localizer sequence: image of C_P(Q) under τ is exactly Ker(π_Q),
            // with kernel the hyperfocal centralizer subgroup
            let h = f.hyperfocal_centralizer(q).expect("fully normalized");
            let tau_cp: HashSet<usize> =
                cp.elems.iter().map(|&u| l.tau(q, q, u)).collect();
            let ker_set: HashSet<usize> = ker.iter().copied().collect();
            let ker_tau_cp: Vec<usize> = cp
                .elems
                .iter()
                .copied()
                .filter(|&u| l.tau(q, q, u) == e)
                .collect();
            if tau_cp != ker_set || ker_tau_cp != h.elems {
                localizer = CheckOutcome {
                    pass: false,
                    witness: Some(format!(
                        "localizer sequence fails at {q}: |tau(C_P)| = {}, |Ker pi| = {}, \
                         |Ker tau|C_P| = {}, |H| = {}",
                        tau_cp.len(),
                        ker_set.len(),
                        ker_tau_cp.len(),
                        h.order()
                    )),
                };
            }
        }
    }
    PerfectReport {
        divisible: check_divisible(l, cap, seed),
        coherent: check_coherent(l, cap, seed),
        p_kernels: check_p_coherent(l, cap, seed),
        p_bounded,
        hyperfocal_kernel,
        localizer,
    }
}

// ---------------------------------------------------------------------------
// Coset localities from an ambient group
// ---------------------------------------------------------------------------

/// A locality whose morphisms are right cosets g·K_R of transporter sets
/// T_G(R, Q) in an ambient group G ⊇ P.
pub struct CosetLocality {
    pub f: FusionSystem,
    pub x: ObjectSet,
    pub amb: Subgroup,
    /// per object: the subgroup K_R quotiented on the right
    pub kernels: HashMap<usize, Vec<usize>>,
    mors: HashMap<(usize, usize), Vec<usize>>,
    coset_of: HashMap<(usize, usize), HashMap<usize, usize>>,
    pi_tab: HashMap<(usize, usize), Vec<usize>>,
}

fn build_coset_locality(
    f: &FusionSystem,
    x: &ObjectSet,
    amb: &Subgroup,
    kern_of: impl Fn(&Subgroup) -> Subgroup,
) -> CosetLocality {
    let g = f.group();
    let mut kernels = HashMap::new();
    for &r in &x.members {
        kernels.insert(r, kern_of(f.object(r)).elems);
    }
    let mut mors = HashMap::new();
    let mut coset_of: HashMap<(usize, usize), HashMap<usize, usize>> = HashMap::new();
    let mut pi_tab = HashMap::new();
    for &q in &x.members {
        for &r in &x.members {
            let trans = transporter(amb, f.object(r), f.object(q));
            let k = &kernels[&r];
            let mut reps = Vec::new();
            let mut of: HashMap<usize, usize> = HashMap::new();
            for &t in &trans {
                if of.contains_key(&t) {
                    continue;
                }
                let mut coset: Vec<usize> = k.iter().map(|&e| g.mul(t, e)).collect();
                coset.sort_unstable();
                let idx = reps.len();
                reps.push(coset[0]);
                for m in coset {
                    of.insert(m, idx);
                }
            }
            let pis: Vec<usize> = reps
                .iter()
                .map(|&rep| {
                    let hom = conjugation_hom(rep, f.object(r), f.object(q))
                        .expect("transporter element conjugates R into Q");
                    f.hom_position(q, r, &hom.map)
                        .expect("conjugation hom lies in the fusion system")
                })
                .collect();
            mors.insert((q, r), reps);
            coset_of.insert((q, r), of);
            pi_tab.insert((q, r), pis);
        }
    }
    CosetLocality { f: f.clone(), x: x.clone(), amb: amb.clone(), kernels, mors, coset_of, pi_tab }
}

/// The transporter locality of P over X: morphisms are transporter elements
/// of P themselves (trivial kernels quotiented), so Ker(π_Q) = C_P(Q).
pub fn transporter_locality(f: &FusionSystem, x: &ObjectSet) -> CosetLocality {
    let amb = f.sylow().clone();
    let g = f.group();
    build_coset_locality(f, x, &amb, |_| {
        Subgroup::new(g, vec![g.identity_id()]).expect("trivial subgroup")
    })
}

/// The group locality of a realized fusion system: L(Q,R) =
/// T_G(R,Q) / O^p(C_G(R)). This is the independent perfect-locality oracle.
pub fn group_locality(f: &FusionSystem, x: &ObjectSet) -> CosetLocality {
    assert!(f.is_realized(), "group locality needs a realizing ambient group");
    let amb = f.ambient().clone();
    let p = f.p();
    build_coset_locality(f, x, &amb, |r| amb.centralizer(r).o_upper_p(p))
}

impl LocalityOps for CosetLocality {
    fn fusion(&self) -> &FusionSystem {
        &self.f
    }
    fn object_set(&self) -> &ObjectSet {
        &self.x
    }
    fn size(&self, q: usize, r: usize) -> usize {
        self.mors[&(q, r)].len()
    }
    fn pi(&self, q: usize, r: usize, m: usize) -> usize {
        self.pi_tab[&(q, r)][m]
    }
    fn tau(&self, q: usize, r: usize, u: usize) -> usize {
        *self.coset_of[&(q, r)].get(&u).expect("u transports R into Q")
    }
    fn compose(&self, q: usize, r: usize, t: usize, x: usize, y: usize) -> usize {
        let g = self.f.group();
        let e = g.mul(self.mors[&(q, r)][x], self.mors[&(r, t)][y]);
        *self.coset_of[&(q, t)].get(&e).expect("composite transports")
    }
    fn kernel_invariants(&self, q: usize) -> Option<Vec<Int>> {
        invariants_from_ids(self, q, &kernel_ids(self, q))
    }
}

// ---------------------------------------------------------------------------
// Table localities and quotients
// ---------------------------------------------------------------------------

/// A fully materialized locality.
pub struct TableLocality {
    pub f: FusionSystem,
    pub x: ObjectSet,
    sizes: HashMap<(usize, usize), usize>,
    pi_tab: HashMap<(usize, usize), Vec<usize>>,
    tau_tab: HashMap<(usize, usize), HashMap<usize, usize>>,
    comp: HashMap<(usize, usize, usize), Vec<Vec<usize>>>,
}

impl TableLocality {
    /// Freeze an arbitrary locality into tables. Fails when a composition
    /// table would exceed `cap` entries.
    pub fn materialize(l: &dyn LocalityOps, cap: usize) -> Result<TableLocality, LocalityError> {
        let f = l.fusion().clone();
        let x = l.object_set().clone();
        let mut sizes = HashMap::new();
        let mut pi_tab = HashMap::new();
        let mut tau_tab = HashMap::new();
        let mut comp = HashMap::new();
        for &q in &x.members {
            for &r in &x.members {
                let n = l.size(q, r);
                sizes.insert((q, r), n);
                pi_tab.insert((q, r), (0..n).map(|m| l.pi(q, r, m)).collect::<Vec<_>>());
                let mut taus = HashMap::new();
                for u in transporter(f.sylow(), f.object(r), f.object(q)) {
                    taus.insert(u, l.tau(q, r, u));
                }
                tau_tab.insert((q, r), taus);
            }
        }
        for &q in &x.members {
            for &r in &x.members {
                for &t in &x.members {
                    let (n1, n2) = (sizes[&(q, r)], sizes[&(r, t)]);
                    if n1 * n2 > cap {
                        return Err(LocalityError::TooLarge(format!(
                            "composition table ({q},{r},{t}) has {} entries",
                            n1 * n2
                        )));
                    }
                    let tab: Vec<Vec<usize>> = (0..n1)
                        .map(|a| (0..n2).map(|b| l.compose(q, r, t, a, b)).collect())
                        .collect();
                    comp.insert((q, r, t), tab);
                }
            }
        }
        Ok(TableLocality { f, x, sizes, pi_tab, tau_tab, comp })
    }

    /// Full subcategory on a smaller object set.
    pub fn restrict(&self, x2: &ObjectSet) -> TableLocality {
        assert!(x2.members.iter().all(|q| self.x.contains(*q)));
        let keep2 = |k: &(usize, usize)| x2.contains(k.0) && x2.contains(k.1);
        TableLocality {
            f: self.f.clone(),
            x: x2.clone(),
            sizes: self.sizes.iter().filter(|(k, _)| keep2(k)).map(|(k, v)| (*k, *v)).collect(),
            pi_tab: self
                .pi_tab
                .iter()
                .filter(|(k, _)| keep2(k))
                .map(|(k, v)| (*k, v.clone()))
                .collect(),
            tau_tab: self
                .tau_tab
                .iter()
                .filter(|(k, _)| keep2(k))
                .map(|(k, v)| (*k, v.clone()))
                .collect(),
            comp: self
                .comp
                .iter()
                .filter(|(k, _)| x2.contains(k.0) && x2.contains(k.1) && x2.contains(k.2))
                .map(|(k, v)| (*k, v.clone()))
                .collect(),
        }
    }
}

impl LocalityOps for TableLocality {
    fn fusion(&self) -> &FusionSystem {
        &self.f
    }
    fn object_set(&self) -> &ObjectSet {
        &self.x
    }
    fn size(&self, q: usize, r: usize) -> usize {
        self.sizes[&(q, r)]
    }
    fn pi(&self, q: usize, r: usize, m: usize) -> usize {
        self.pi_tab[&(q, r)][m]
    }
    fn tau(&self, q: usize, r: usize, u: usize) -> usize {
        *self.tau_tab[&(q, r)].get(&u).expect("u transports R into Q")
    }
    fn compose(&self, q: usize, r: usize, t: usize, x: usize, y: usize) -> usize {
        self.comp[&(q, r, t)][x][y]
    }
    fn kernel_invariants(&self, q: usize) -> Option<Vec<Int>> {
        invariants_from_ids(self, q, &kernel_ids(self, q))
    }
}

/// Result of quotienting a locality by a kernel subfunctor.
pub struct Quotient {
    pub loc: TableLocality,
    /// per (q, r): original morphism id -> quotient morphism id
    pub proj: HashMap<(usize, usize), Vec<usize>>,
}

/// Quotient a locality by per-object subgroups of its kernels, after
/// verifying that the values form a subfunctor (stable under transport along
/// every morphism) and that composition descends.
pub fn quotient_locality(
    l: &dyn LocalityOps,
    sub: &HashMap<usize, Vec<usize>>,
    cap: usize,
) -> Result<Quotient, LocalityError> {
    let f = l.fusion().clone();
    let x = l.object_set().clone();
    // validate the values: subgroups of the kernels
    for &q in &x.members {
        let ids = sub.get(&q).cloned().unwrap_or_default();
        let ker: HashSet<usize> = kernel_ids(l, q).into_iter().collect();
        if !ids.contains(&identity_mor(l, q)) || !ids.iter().all(|m| ker.contains(m)) {
            return Err(LocalityError::NotAFunctor(format!(
                "values at {q} are not a pointed subset of Ker(pi)"
            )));
        }
        let set: HashSet<usize> = ids.iter().copied().collect();
        for &a in &ids {
            for &b in &ids {
                if !set.contains(&l.compose(q, q, q, a, b)) {
                    return Err(LocalityError::NotAFunctor(format!(
                        "values at {q} not closed under composition"
                    )));
                }
            }
        }
    }
    // transport stability: for every x: R -> Q and n in sub(Q), the unique
    // n' with n·x = x·n' must lie in sub(R)
    for &q in &x.members {
        for &r in &x.members {
            let ker_r = kernel_ids(l, r);
            let sub_r: HashSet<usize> = sub[&r].iter().copied().collect();
            for m in 0..l.size(q, r) {
                for &n in &sub[&q] {
                    let nx = l.compose(q, q, r, n, m);
                    let np = ker_r
                        .iter()
                        .copied()
                        .find(|&k| l.compose(q, r, r, m, k) == nx);
                    match np {
                        Some(np) if sub_r.contains(&np) => {}
                        Some(_) => {
                            return Err(LocalityError::NotAFunctor(format!(
                                "transport of sub({q}) along L({q},{r}) id {m} escapes sub({r})"
                            )))
                        }
                        None => {
                            return Err(LocalityError::IllDefinedComposition(format!(
                                "no kernel transport for id {m} in L({q},{r})"
                            )))
                        }
                    }
                }
            }
        }
    }
    // build cosets
    let mut proj: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    let mut reps: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for &q in &x.members {
        for &r in &x.members {
            let n = l.size(q, r);
            let mut pr = vec![usize::MAX; n];
            let mut rp = Vec::new();
            for m in 0..n {
                if pr[m] != usize::MAX {
                    continue;
                }
                let mut members: Vec<usize> =
                    sub[&r].iter().map(|&k| l.compose(q, r, r, m, k)).collect();
                members.sort_unstable();
                members.dedup();
                if members.len() != sub[&r].len() {
                    return Err(LocalityError::IllDefinedComposition(format!(
                        "kernel translation not free on L({q},{r})"
                    )));
                }
                let idx = rp.len();
                rp.push(members[0]);
                for mm in members {
                    pr[mm] = idx;
                }
            }
            proj.insert((q, r), pr);
            reps.insert((q, r), rp);
        }
    }
    // well-definedness of the induced composition (bounded sweep)
    for &q in &x.members {
        for &r in &x.members {
            for &t in &x.members {
                let n1 = l.size(q, r);
                let n2 = l.size(r, t);
                if n1 * n2 * sub[&r].len() > cap {
                    continue; // covered by the transport check above
                }
                for a in 0..n1 {
                    for b in 0..n2 {
                        let base = proj[&(q, t)][l.compose(q, r, t, a, b)];
                        for &k in &sub[&r] {
                            let ak = l.compose(q, r, r, a, k);
                            if proj[&(q, t)][l.compose(q, r, t, ak, b)] != base {
                                return Err(LocalityError::IllDefinedComposition(format!(
                                    "composition not constant on cosets at ({q},{r},{t})"
                                )));
                            }
                        }
                    }
                }
            }
        }
    }
    // assemble tables
    let mut sizes = HashMap::new();
    let mut pi_tab = HashMap::new();
    let mut tau_tab = HashMap::new();
    let mut comp = HashMap::new();
    for &q in &x.members {
        for &r in &x.members {
            let rp = &reps[&(q, r)];
            sizes.insert((q, r), rp.len());
            pi_tab.insert(
                (q, r),
                rp.iter().map(|&m| l.pi(q, r, m)).collect::<Vec<_>>(),
            );
            let mut taus = HashMap::new();
            for u in transporter(f.sylow(), f.object(r), f.object(q)) {
                taus.insert(u, proj[&(q, r)][l.tau(q, r, u)]);
            }
            tau_tab.insert((q, r), taus);
        }
    }
    for &q in &x.members {
        for &r in &x.members {
            for &t in &x.members {
                let tab: Vec<Vec<usize>> = reps[&(q, r)]
                    .iter()
                    .map(|&a| {
                        reps[&(r, t)]
                            .iter()
                            .map(|&b| proj[&(q, t)][l.compose(q, r, t, a, b)])
                            .collect()
                    })
                    .collect();
                comp.insert((q, r, t), tab);
            }
        }
    }
    Ok(Quotient { loc: TableLocality { f, x, sizes, pi_tab, tau_tab, comp }, proj })
}

// ---------------------------------------------------------------------------
// The Ω-locality of a basic biset
// ---------------------------------------------------------------------------

fn pcomp(a: &[usize], b: &[usize]) -> Vec<usize> {
    b.iter().map(|&i| a[i]).collect()
}

fn pinv(a: &[usize]) -> Vec<usize> {
    let mut out = vec![0; a.len()];
    for (i, &j) in a.iter().enumerate() {
        out[j] = i;
    }
    out
}

/// One isomorphism class of Q×P-orbits in the restriction of Ω.
struct ClassData {
    /// point lists, sorted; entry 0 is the base orbit
    orbit_pts: Vec<Vec<usize>>,
    base_point: usize,
    base_stab: Vec<(usize, usize)>,
    /// base-orbit point -> a pair (s, t) in Q×P moving the base point there
    words: HashMap<usize, (usize, usize)>,
    /// per orbit: equivariant iso from the base orbit (point -> point)
    sigma: Vec<HashMap<usize, usize>>,
    sigma_inv: Vec<HashMap<usize, usize>>,
    aut: TableGroup,
    /// per automorphism: its map on base-orbit points
    aut_maps: Vec<HashMap<usize, usize>>,
    /// key: images of the sorted base-orbit points
    aut_index: HashMap<Vec<usize>, usize>,
    ab: FinAb,
    /// abelianization class per automorphism
    ab_classes: Vec<AbElt>,
    /// one automorphism per canonical generator of `ab` mapping onto it
    ab_gen_elems: Vec<usize>,
    t_obj: usize,
    sc: bool,
}

struct ObjData {
    classes: Vec<ClassData>,
    ker: FinAb,
    /// raw-generator offset of each class block
    offsets: Vec<usize>,
    raw_orders: Vec<Int>,
    /// per raw generator: a permutation of Ω lifting it into C_G(Q)
    gen_lifts: Vec<Vec<usize>>,
    /// point -> (class index, orbit index within class)
    point_class: Vec<(usize, usize)>,
}

/// The locality carried by a basic P×P-set Ω over an object set X.
///
/// A morphism over φ ∈ F(Q, R) is a class of φ-twisted automorphisms of Ω
/// modulo the orbit-permutation subgroup at R; it is stored as
/// (hom index, kernel coordinate). Composition is exact via precomputed
/// section-defect classes and conjugation matrices.
pub struct OmegaLocality {
    pub ext: Exterior,
    pub x: ObjectSet,
    pub biset: Biset,
    pub pts: Points,
    obj: HashMap<usize, ObjData>,
    /// per (q, r) and hom index: a base section permutation of Ω
    sections: HashMap<(usize, usize), Vec<Vec<usize>>>,
    /// hom-composition tables
    hcomp: HashMap<(usize, usize, usize), Vec<Vec<usize>>>,
    /// section defect classes s1(t_{φψ}^{-1} t_φ t_ψ)
    defect: HashMap<(usize, usize, usize), Vec<Vec<AbElt>>>,
    /// per (r, t) and hom ψ: the conjugation map Ker(r) -> Ker(t)
    cmat: HashMap<(usize, usize), Vec<AbHom>>,
    tau_tab: HashMap<(usize, usize), HashMap<usize, usize>>,
}

impl OmegaLocality {
    pub fn build(ext: &Exterior, x: &ObjectSet, biset: &Biset) -> OmegaLocality {
        let f = &ext.f;
        let p = f.sylow();
        let pts = biset.materialize();
        let mut obj = HashMap::new();
        for &q in &x.members {
            obj.insert(q, build_obj_data(f, &pts, q));
        }
        let mut sections: HashMap<(usize, usize), Vec<Vec<usize>>> = HashMap::new();
        for &q in &x.members {
            for &r in &x.members {
                let secs: Vec<Vec<usize>> = f
                    .homs(q, r)
                    .iter()
                    .map(|phi| build_section(&pts, f.object(r), p, phi))
                    .collect();
                sections.insert((q, r), secs);
            }
        }
        let mut partial = OmegaLocality {
            ext: ext.clone(),
            x: x.clone(),
            biset: biset.clone(),
            pts,
            obj,
            sections,
            hcomp: HashMap::new(),
            defect: HashMap::new(),
            cmat: HashMap::new(),
            tau_tab: HashMap::new(),
        };
        // conjugation matrices along each hom ψ: T -> R
        let mut cmat = HashMap::new();
        for &r in &x.members {
            for &t in &x.members {
                let homs = f.homs(r, t);
                let mats: Vec<AbHom> = (0..homs.len())
                    .map(|h| {
                        let sec = &partial.sections[&(r, t)][h];
                        let sec_inv = pinv(sec);
                        let ker_r = &partial.obj[&r].ker;
                        let ker_t = &partial.obj[&t].ker;
                        let images: Vec<AbElt> = (0..ker_r.rank())
                            .map(|j| {
                                let mut e = ker_r.zero();
                                e[j] = 1;
                                let c = partial.lift(r, &e);
                                let d = pcomp(&sec_inv, &pcomp(&c, sec));
                                partial
                                    .s1_projection(t, &d)
                                    .expect("conjugated kernel lift is equivariant")
                            })
                            .collect();
                        AbHom::from_gen_images(ker_r, ker_t, &images)
                    })
                    .collect();
                cmat.insert((r, t), mats);
            }
        }
        partial.cmat = cmat;
        // hom composition tables and section defects
        let mut hcomp = HashMap::new();
        let mut defect = HashMap::new();
        for &q in &x.members {
            for &r in &x.members {
                for &t in &x.members {
                    let hq = f.homs(q, r);
                    let hr = f.homs(r, t);
                    let mut hc = vec![vec![0usize; hr.len()]; hq.len()];
                    let mut df = vec![vec![partial.obj[&t].ker.zero(); hr.len()]; hq.len()];
                    for (a, phi) in hq.iter().enumerate() {
                        for (b, psi) in hr.iter().enumerate() {
                            let chi = phi.compose(psi);
                            let ci = f
                                .hom_position(q, t, &chi.map)
                                .expect("fusion closed under composition");
                            hc[a][b] = ci;
                            let sec_chi_inv = pinv(&partial.sections[&(q, t)][ci]);
                            let d = pcomp(
                                &sec_chi_inv,
                                &pcomp(
                                    &partial.sections[&(q, r)][a],
                                    &partial.sections[&(r, t)][b],
                                ),
                            );
                            df[a][b] = partial
                                .s1_projection(t, &d)
                                .expect("section defect is equivariant");
                        }
                    }
                    hcomp.insert((q, r, t), hc);
                    defect.insert((q, r, t), df);
                }
            }
        }
        partial.hcomp = hcomp;
        partial.defect = defect;
        // τ tables
        let mut tau_tab = HashMap::new();
        for &q in &x.members {
            for &r in &x.members {
                let mut tab = HashMap::new();
                for u in transporter(p, f.object(r), f.object(q)) {
                    let hom = conjugation_hom(u, f.object(r), f.object(q)).expect("conj hom");
                    let hi = f.hom_position(q, r, &hom.map).expect("conj hom in F");
                    let perm_u: Vec<usize> =
                        (0..partial.pts.len()).map(|pt| partial.pts.act(pt, u, f.group().identity_id())).collect();
                    let sec_inv = pinv(&partial.sections[&(q, r)][hi]);
                    let coord = partial
                        .s1_projection(r, &pcomp(&sec_inv, &perm_u))
                        .expect("tau defect is equivariant");
                    let ko = partial.kernel_order(r);
                    tab.insert(u, hi * ko + partial.coord_index(r, &coord));
                }
                tau_tab.insert((q, r), tab);
            }
        }
        partial.tau_tab = tau_tab;
        partial
    }

    pub fn kernel_group(&self, q: usize) -> &FinAb {
        &self.obj[&q].ker
    }

    pub fn kernel_order(&self, q: usize) -> usize {
        self.obj[&q].ker.order() as usize
    }

    /// Summary of the orbit classes at Q: (stabilizer type object, whether it
    /// is selfcentralizing, multiplicity, abelianized automorphism invariants).
    pub fn class_summary(&self, q: usize) -> Vec<(usize, bool, usize, Vec<Int>)> {
        self.obj[&q]
            .classes
            .iter()
            .map(|c| (c.t_obj, c.sc, c.orbit_pts.len(), c.ab.orders.clone()))
            .collect()
    }

    /// The conjugation map Ker(q) -> Ker(r) along the hom with this index
    /// in F(q, r).
    pub fn conj_map(&self, q: usize, r: usize, hom: usize) -> &AbHom {
        &self.cmat[&(q, r)][hom]
    }

    /// Full automorphism group orders of the orbit classes at Q.
    pub fn class_aut_orders(&self, q: usize) -> Vec<usize> {
        self.obj[&q].classes.iter().map(|c| c.aut.n).collect()
    }

    /// The base section over a hom.
    pub fn section(&self, q: usize, r: usize, hom: usize) -> &[usize] {
        &self.sections[&(q, r)][hom]
    }

    /// Mixed-radix index of a kernel coordinate.
    pub fn coord_index(&self, q: usize, e: &AbElt) -> usize {
        let ker = &self.obj[&q].ker;
        let mut idx = 0usize;
        let mut stride = 1usize;
        for (i, &d) in ker.orders.iter().enumerate() {
            idx += (e[i] as usize) * stride;
            stride *= d as usize;
        }
        idx
    }

    pub fn index_coord(&self, q: usize, mut idx: usize) -> AbElt {
        let ker = &self.obj[&q].ker;
        let mut e = ker.zero();
        for (i, &d) in ker.orders.iter().enumerate() {
            e[i] = (idx % d as usize) as Int;
            idx /= d as usize;
        }
        e
    }

    /// Encode a morphism from its hom index and kernel coordinate.
    pub fn encode(&self, r: usize, hom: usize, coord: &AbElt) -> usize {
        hom * self.kernel_order(r) + self.coord_index(r, coord)
    }

    /// Decode a morphism id into (hom index, kernel coordinate).
    pub fn decode(&self, r: usize, m: usize) -> (usize, AbElt) {
        let ko = self.kernel_order(r);
        (m / ko, self.index_coord(r, m % ko))
    }

    /// Lift a kernel coordinate to an explicit orbit-class automorphism
    /// permutation of Ω.
    pub fn lift(&self, q: usize, e: &AbElt) -> Vec<usize> {
        let od = &self.obj[&q];
        let raw = od.ker.to_raw(e);
        let mut perm: Vec<usize> = (0..self.pts.len()).collect();
        for i in 0..od.gen_lifts.len() {
            let k = raw[i].rem_euclid(od.raw_orders[i]);
            for _ in 0..k {
                perm = pcomp(&od.gen_lifts[i], &perm);
            }
        }
        perm
    }

    /// Project a Q×P-equivariant permutation of Ω to the product of
    /// abelianized orbit automorphism groups; zero exactly on the orbit
    /// permutation subgroup.
    pub fn s1_projection(&self, q: usize, perm: &[usize]) -> Result<AbElt, LocalityError> {
        let f = &self.ext.f;
        let qs = f.object(q);
        let p = f.sylow();
        for pt in 0..self.pts.len() {
            for &v in &qs.elems {
                for &t in &p.elems {
                    if perm[self.pts.act(pt, v, t)] != self.pts.act(perm[pt], v, t) {
                        return Err(LocalityError::NotEquivariant);
                    }
                }
            }
        }
        let od = &self.obj[&q];
        let mut raw = vec![0 as Int; od.ker.raw_gens];
        for (ci, cls) in od.classes.iter().enumerate() {
            let mut acc = cls.ab.zero();
            for (oi, orb) in cls.orbit_pts.iter().enumerate() {
                let (cj, oj) = od.point_class[perm[orb[0]]];
                assert_eq!(cj, ci, "equivariant map must preserve orbit classes");
                // composite σ_j^{-1} ∘ perm ∘ σ_i on the base orbit
                let base = &cls.orbit_pts[0];
                let images: Vec<usize> = base
                    .iter()
                    .map(|&b| cls.sigma_inv[oj][&perm[cls.sigma[oi][&b]]])
                    .collect();
                let ai = *cls
                    .aut_index
                    .get(&images)
                    .expect("composite is an orbit automorphism");
                acc = cls.ab.add(&acc, &cls.ab_classes[ai]);
            }
            for (k, &v) in acc.iter().enumerate() {
                raw[od.offsets[ci] + k] = v;
            }
        }
        Ok(od.ker.from_raw(&raw))
    }

    /// The conjugation-induced map Ker(tgt) -> Ker(src) of an exterior class.
    pub fn c_tilde_map(&self, m: &ExtMor) -> AbHom {
        let hom = self
            .ext
            .f
            .hom_position(m.tgt, m.src, &self.ext.rep(m).map)
            .expect("class representative is a hom");
        self.cmat[&(m.tgt, m.src)][hom].clone()
    }

    /// The same map computed by the transfer formula over orbit-class
    /// embeddings, as an independent route.
    pub fn c_tilde_transfer(&self, q: usize, r: usize, hom: usize) -> AbHom {
        let f = &self.ext.f;
        let phi = &f.homs(q, r)[hom];
        let p = f.sylow();
        let rs = f.object(r);
        let src = &self.obj[&q];
        let tgt = &self.obj[&r];
        // per (source class, generator): image in Ker(r)
        let mut gen_images: Vec<Vec<AbElt>> = src
            .classes
            .iter()
            .map(|c| vec![tgt.ker.zero(); c.ab.rank()])
            .collect();
        for (mc, m_cls) in tgt.classes.iter().enumerate() {
            let m0 = m_cls.base_point;
            let s0 = &m_cls.base_stab;
            let m_base = &m_cls.orbit_pts[0];
            for (oc, o_cls) in src.classes.iter().enumerate() {
                let o_base = &o_cls.orbit_pts[0];
                // candidate images: points with twisted stabilizer equal to
                // the stabilizer of the target base point
                let candidates: Vec<usize> = o_base
                    .iter()
                    .copied()
                    .filter(|&w| {
                        let mut st = Vec::new();
                        for &v in &rs.elems {
                            for &t in &p.elems {
                                if self.pts.act(w, phi.apply(v), t) == w {
                                    st.push((v, t));
                                }
                            }
                        }
                        st.sort_unstable();
                        &st == s0
                    })
                    .collect();
                if candidates.is_empty() {
                    continue;
                }
                let cand_set: HashSet<usize> = candidates.iter().copied().collect();
                // equivalence: candidates modulo Aut(M) × Aut(O)
                let mut seen: HashSet<usize> = HashSet::new();
                let mut reps = Vec::new();
                for &c0 in &candidates {
                    if seen.contains(&c0) {
                        continue;
                    }
                    let mut orbit = vec![c0];
                    seen.insert(c0);
                    let mut stack = vec![c0];
                    while let Some(w) = stack.pop() {
                        let mut nbrs: Vec<usize> = o_cls
                            .aut_maps
                            .iter()
                            .map(|am| am[&w])
                            .collect();
                        for am in &m_cls.aut_maps {
                            let m1 = am[&m0];
                            let (v, t) = m_cls.words[&m1];
                            nbrs.push(self.pts.act(w, phi.apply(v), t));
                        }
                        for nb in nbrs {
                            assert!(cand_set.contains(&nb));
                            if seen.insert(nb) {
                                orbit.push(nb);
                                stack.push(nb);
                            }
                        }
                    }
                    reps.push(*orbit.iter().min().unwrap());
                }
                for &w in &reps {
                    // the embedding f: M -> O twisted along φ
                    let mut fmap: HashMap<usize, usize> = HashMap::new();
                    for &v in &rs.elems {
                        for &t in &p.elems {
                            let src_pt = self.pts.act(m0, v, t);
                            let dst_pt = self.pts.act(w, phi.apply(v), t);
                            if let Some(&prev) = fmap.get(&src_pt) {
                                assert_eq!(prev, dst_pt, "embedding ill-defined");
                            } else {
                                fmap.insert(src_pt, dst_pt);
                            }
                        }
                    }
                    assert_eq!(fmap.len(), m_base.len());
                    let f_img: HashSet<usize> = fmap.values().copied().collect();
                    assert_eq!(f_img.len(), m_base.len(), "embedding not injective");
                    let finv: HashMap<usize, usize> =
                        fmap.iter().map(|(&a, &b)| (b, a)).collect();
                    // stabilizer of the image inside Aut(O)
                    let h: Vec<usize> = (0..o_cls.aut.n)
                        .filter(|&a| {
                            f_img.iter().all(|pt| f_img.contains(&o_cls.aut_maps[a][pt]))
                        })
                        .collect();
                    // transfer Aut(O) -> ab(Aut(M)) through δ: a -> f^{-1} a f
                    let delta_class = |a: usize| -> AbElt {
                        let images: Vec<usize> = m_base
                            .iter()
                            .map(|&mpt| finv[&o_cls.aut_maps[a][&fmap[&mpt]]])
                            .collect();
                        let ai = *m_cls
                            .aut_index
                            .get(&images)
                            .expect("delta lands in Aut(M)");
                        m_cls.ab_classes[ai].clone()
                    };
                    let h_set: HashSet<usize> = h.iter().copied().collect();
                    let mut coset_reps = Vec::new();
                    let mut covered = vec![false; o_cls.aut.n];
                    for a in 0..o_cls.aut.n {
                        if covered[a] {
                            continue;
                        }
                        coset_reps.push(a);
                        for &hh in &h {
                            covered[o_cls.aut.mul[a][hh]] = true;
                        }
                    }
                    for (k, &gelem) in o_cls.ab_gen_elems.iter().enumerate() {
                        let mut val = m_cls.ab.zero();
                        for &rr in &coset_reps {
                            let grr = o_cls.aut.mul[gelem][rr];
                            let rp = *coset_reps
                                .iter()
                                .find(|&&rp| {
                                    h_set.contains(&o_cls.aut.mul[o_cls.aut.inv[rp]][grr])
                                })
                                .expect("cosets partition");
                            let hh = o_cls.aut.mul[o_cls.aut.inv[rp]][grr];
                            val = m_cls.ab.add(&val, &delta_class(hh));
                        }
                        // embed into Ker(r) at block mc
                        let mut raw = vec![0 as Int; tgt.ker.raw_gens];
                        for (j, &vv) in val.iter().enumerate() {
                            raw[tgt.offsets[mc] + j] = vv;
                        }
                        gen_images[oc][k] =
                            tgt.ker.add(&gen_images[oc][k], &tgt.ker.from_raw(&raw));
                    }
                }
            }
        }
        // assemble on canonical generators of Ker(q)
        let images: Vec<AbElt> = (0..src.ker.rank())
            .map(|j| {
                let mut e = src.ker.zero();
                e[j] = 1;
                let raw = src.ker.to_raw(&e);
                let mut out = tgt.ker.zero();
                for (ci, cls) in src.classes.iter().enumerate() {
                    for k in 0..cls.ab.rank() {
                        let coeff = raw[src.offsets[ci] + k].rem_euclid(cls.ab.orders[k]);
                        out = tgt.ker.add(&out, &tgt.ker.scale(coeff, &gen_images[ci][k]));
                    }
                }
                out
            })
            .collect();
        AbHom::from_gen_images(&src.ker, &tgt.ker, &images)
    }

    /// Morphism ids of kernel elements supported only on classes selected by
    /// `keep` (by class index).
    pub fn kernel_support_ids(&self, q: usize, keep: impl Fn(&ClassSummaryRef) -> bool) -> Vec<usize> {
        let od = &self.obj[&q];
        let idh = identity_hom(&self.ext.f, q);
        let ko = self.kernel_order(q);
        // enumerate the sub-product over the kept classes
        let mut raws: Vec<Vec<Int>> = vec![vec![0; od.ker.raw_gens]];
        for (ci, cls) in od.classes.iter().enumerate() {
            let summary = ClassSummaryRef { t_obj: cls.t_obj, sc: cls.sc };
            if !keep(&summary) {
                continue;
            }
            let mut next = Vec::new();
            for e in cls.ab.elements() {
                for r in &raws {
                    let mut r2 = r.clone();
                    for (k, &v) in e.iter().enumerate() {
                        r2[od.offsets[ci] + k] = v;
                    }
                    next.push(r2);
                }
            }
            raws = next;
        }
        let mut ids: Vec<usize> = raws
            .into_iter()
            .map(|r| idh * ko + self.coord_index(q, &od.ker.from_raw(&r)))
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

/// Selector handle for kernel-class filtering.
pub struct ClassSummaryRef {
    pub t_obj: usize,
    pub sc: bool,
}

fn build_obj_data(f: &FusionSystem, pts: &Points, q: usize) -> ObjData {
    let qs = f.object(q);
    let p = f.sylow();
    let g = f.group();
    let orbits = pts.orbits_under(qs, p);
    let mut classes: Vec<ClassData> = Vec::new();
    let mut point_class = vec![(usize::MAX, usize::MAX); pts.len()];
    'orbit: for orb in &orbits {
        // try to attach to an existing class: a point with the very same
        // stabilizer as the class base point gives the equivariant iso
        for (ci, cls) in classes.iter_mut().enumerate() {
            let w = orb
                .iter()
                .copied()
                .find(|&w| pts.stabilizer(qs, p, w) == cls.base_stab);
            if let Some(w) = w {
                let oi = cls.orbit_pts.len();
                let mut sigma = HashMap::new();
                for &s in &qs.elems {
                    for &t in &p.elems {
                        let from = pts.act(cls.base_point, s, t);
                        let to = pts.act(w, s, t);
                        if let Some(&prev) = sigma.get(&from) {
                            assert_eq!(prev, to, "orbit iso ill-defined");
                        } else {
                            sigma.insert(from, to);
                        }
                    }
                }
                let sigma_inv: HashMap<usize, usize> =
                    sigma.iter().map(|(&a, &b)| (b, a)).collect();
                cls.sigma.push(sigma);
                cls.sigma_inv.push(sigma_inv);
                cls.orbit_pts.push(orb.clone());
                for &pt in orb {
                    point_class[pt] = (ci, oi);
                }
                continue 'orbit;
            }
        }
        // new class
        let base_point = orb[0];
        let base_stab = pts.stabilizer(qs, p, base_point);
        let mut words = HashMap::new();
        for &s in &qs.elems {
            for &t in &p.elems {
                words.entry(pts.act(base_point, s, t)).or_insert((s, t));
            }
        }
        // automorphisms: one per point with the same stabilizer
        let mut aut_map_list: Vec<HashMap<usize, usize>> = Vec::new();
        for &w in orb {
            if pts.stabilizer(qs, p, w) != base_stab {
                continue;
            }
            let mut m = HashMap::new();
            for &s in &qs.elems {
                for &t in &p.elems {
                    let from = pts.act(base_point, s, t);
                    let to = pts.act(w, s, t);
                    if let Some(&prev) = m.get(&from) {
                        assert_eq!(prev, to, "orbit automorphism ill-defined");
                    } else {
                        m.insert(from, to);
                    }
                }
            }
            aut_map_list.push(m);
        }
        let keys: Vec<Vec<usize>> = aut_map_list
            .iter()
            .map(|m| orb.iter().map(|pt| m[pt]).collect())
            .collect();
        let orb_pos: HashMap<usize, usize> =
            orb.iter().enumerate().map(|(i, &pt)| (pt, i)).collect();
        let (aut, elems) = TableGroup::from_mult(keys, |a, b| {
            // composition a ∘ b as maps on the sorted orbit points
            (0..orb.len()).map(|i| a[orb_pos[&b[i]]]).collect()
        });
        let aut_maps: Vec<HashMap<usize, usize>> = elems
            .iter()
            .map(|key| orb.iter().zip(key).map(|(&pt, &img)| (pt, img)).collect())
            .collect();
        let aut_index: HashMap<Vec<usize>, usize> =
            elems.iter().enumerate().map(|(i, k)| (k.clone(), i)).collect();
        let (ab, ab_classes) = aut.abelianization();
        let ab_gen_elems: Vec<usize> = (0..ab.rank())
            .map(|j| {
                let mut unit = ab.zero();
                unit[j] = 1;
                (0..aut.n)
                    .find(|&a| ab_classes[a] == unit)
                    .expect("abelianization is surjective on classes")
            })
            .collect();
        // stabilizer type: T = second coordinates, must be an object
        let mut t_elems: Vec<usize> = base_stab.iter().map(|&(_, b)| b).collect();
        t_elems.sort_unstable();
        t_elems.dedup();
        let tsub = Subgroup::new(g, t_elems).expect("stabilizer projects to a subgroup");
        let t_obj = f.object_index(&tsub).expect("type is an object");
        let sc = f.is_selfcentralizing(t_obj);
        let ci = classes.len();
        for &pt in orb {
            point_class[pt] = (ci, 0);
        }
        classes.push(ClassData {
            orbit_pts: vec![orb.clone()],
            base_point,
            base_stab,
            words,
            sigma: vec![orb.iter().map(|&pt| (pt, pt)).collect()],
            sigma_inv: vec![orb.iter().map(|&pt| (pt, pt)).collect()],
            aut,
            aut_maps,
            aut_index,
            ab,
            ab_classes,
            ab_gen_elems,
            t_obj,
            sc,
        });
    }
    // kernel group: product of the class abelianizations
    let mut raw_orders: Vec<Int> = Vec::new();
    let mut offsets = Vec::new();
    for cls in &classes {
        offsets.push(raw_orders.len());
        raw_orders.extend(cls.ab.orders.iter().copied());
    }
    let ker = FinAb::cyclic_product(&raw_orders);
    // lifts: the generator automorphism acting on the base orbit only
    let mut gen_lifts = Vec::new();
    for (ci, cls) in classes.iter().enumerate() {
        let _ = ci;
        for &ge in &cls.ab_gen_elems {
            let mut perm: Vec<usize> = (0..pts.len()).collect();
            for (&pt, &img) in &cls.aut_maps[ge] {
                perm[pt] = img;
            }
            gen_lifts.push(perm);
        }
    }
    ObjData { classes, ker, offsets, raw_orders, gen_lifts, point_class }
}

/// A base section over φ: an equivariant bijection from Ω with the plain
/// R×P-structure to Ω with the φ-twisted structure.
fn build_section(pts: &Points, rsub: &Subgroup, p: &Subgroup, phi: &GroupHom) -> Vec<usize> {
    // the identity hom gets the identity section
    if phi.source.elems == phi.target.elems && phi.is_inclusion() {
        return (0..pts.len()).collect();
    }
    let plain_orbits = orbits_by(pts, |pt, v, t| pts.act(pt, v, t), rsub, p);
    let tw_orbits = orbits_by(pts, |pt, v, t| pts.act(pt, phi.apply(v), t), rsub, p);
    let tw_stab = |w: usize| -> Vec<(usize, usize)> {
        let mut st = Vec::new();
        for &v in &rsub.elems {
            for &t in &p.elems {
                if pts.act(w, phi.apply(v), t) == w {
                    st.push((v, t));
                }
            }
        }
        st.sort_unstable();
        st
    };
    let mut used = vec![false; tw_orbits.len()];
    let mut map = vec![usize::MAX; pts.len()];
    for orb in &plain_orbits {
        let w0 = orb[0];
        let s0 = pts.stabilizer(rsub, p, w0);
        let mut matched = false;
        'tw: for (j, torb) in tw_orbits.iter().enumerate() {
            if used[j] || torb.len() != orb.len() {
                continue;
            }
            for &w in torb {
                if tw_stab(w) == s0 {
                    for &v in &rsub.elems {
                        for &t in &p.elems {
                            let from = pts.act(w0, v, t);
                            let to = pts.act(w, phi.apply(v), t);
                            if map[from] == usize::MAX {
                                map[from] = to;
                            } else {
                                assert_eq!(map[from], to, "section ill-defined");
                            }
                        }
                    }
                    used[j] = true;
                    matched = true;
                    break 'tw;
                }
            }
        }
        assert!(matched, "basic set restrictions must be isomorphic along fusion homs");
    }
    let check: HashSet<usize> = map.iter().copied().collect();
    assert_eq!(check.len(), pts.len(), "section must be a bijection");
    map
}

fn orbits_by(
    pts: &Points,
    act: impl Fn(usize, usize, usize) -> usize,
    rsub: &Subgroup,
    p: &Subgroup,
) -> Vec<Vec<usize>> {
    let mut seen = vec![false; pts.len()];
    let mut out = Vec::new();
    for i in 0..pts.len() {
        if seen[i] {
            continue;
        }
        let mut orbit = vec![i];
        seen[i] = true;
        let mut stack = vec![i];
        while let Some(x) = stack.pop() {
            for &v in &rsub.elems {
                for &t in &p.elems {
                    let y = act(x, v, t);
                    if !seen[y] {
                        seen[y] = true;
                        orbit.push(y);
                        stack.push(y);
                    }
                }
            }
        }
        orbit.sort_unstable();
        out.push(orbit);
    }
    out
}

impl LocalityOps for OmegaLocality {
    fn fusion(&self) -> &FusionSystem {
        &self.ext.f
    }
    fn object_set(&self) -> &ObjectSet {
        &self.x
    }
    fn size(&self, q: usize, r: usize) -> usize {
        self.ext.f.homs(q, r).len() * self.kernel_order(r)
    }
    fn pi(&self, q: usize, r: usize, m: usize) -> usize {
        let _ = q;
        m / self.kernel_order(r)
    }
    fn tau(&self, q: usize, r: usize, u: usize) -> usize {
        *self.tau_tab[&(q, r)].get(&u).expect("u transports R into Q")
    }
    fn compose(&self, q: usize, r: usize, t: usize, x: usize, y: usize) -> usize {
        let (phi, a) = self.decode(r, x);
        let (psi, b) = self.decode(t, y);
        let chi = self.hcomp[&(q, r, t)][phi][psi];
        let ker_t = &self.obj[&t].ker;
        let coord = ker_t.add(
            &ker_t.add(&self.defect[&(q, r, t)][phi][psi], &self.cmat[&(r, t)][psi].apply(&a)),
            &b,
        );
        self.encode(t, chi, &coord)
    }
    fn kernel_invariants(&self, q: usize) -> Option<Vec<Int>> {
        Some(normal_invariants(&self.obj[&q].ker.orders))
    }
}

// ---------------------------------------------------------------------------
// Block quotients of an Ω-locality
// ---------------------------------------------------------------------------

/// Per-object data of a kernel block quotient: the quotient group, the
/// projection from the original kernel, and a preimage of each quotient
/// generator.
struct BlockQuot {
    bar: FinAb,
    p: AbHom,
    lifts: Vec<AbElt>,
}

fn block_quot(ker: &FinAb, dropped: &[AbElt]) -> BlockQuot {
    let n = ker.rank();
    let mut rels = ZMat::zero(n, n + dropped.len());
    for j in 0..n {
        rels[(j, j)] = ker.orders[j];
    }
    for (k, g) in dropped.iter().enumerate() {
        rels.set_col(n + k, g);
    }
    let bar = FinAb::from_relations(n, &rels);
    let images: Vec<AbElt> = (0..n)
        .map(|j| {
            let mut raw = vec![0 as Int; n];
            raw[j] = 1;
            bar.from_raw(&raw)
        })
        .collect();
    let p = AbHom::from_gen_images(ker, &bar, &images);
    let lifts: Vec<AbElt> = (0..bar.rank())
        .map(|j| {
            let mut e = bar.zero();
            e[j] = 1;
            ker.reduce(&bar.to_raw(&e))
        })
        .collect();
    BlockQuot { bar, p, lifts }
}

/// Mixed-radix index of an element in canonical coordinates.
fn bar_index(bar: &FinAb, e: &AbElt) -> usize {
    let mut idx = 0usize;
    let mut stride = 1usize;
    for (i, &d) in bar.orders.iter().enumerate() {
        idx += (e[i] as usize) * stride;
        stride *= d as usize;
    }
    idx
}

fn bar_coord(bar: &FinAb, mut idx: usize) -> AbElt {
    let mut e = bar.zero();
    for (i, &d) in bar.orders.iter().enumerate() {
        e[i] = (idx % d as usize) as Int;
        idx /= d as usize;
    }
    e
}

/// An Ω-locality with some kernel class blocks collapsed, represented on the
/// quotient kernels with projected defect classes and conjugation matrices.
struct BlockQuotLocality<'a> {
    omega: &'a OmegaLocality,
    quot: HashMap<usize, BlockQuot>,
    cmat: HashMap<(usize, usize), Vec<AbHom>>,
    defect: HashMap<(usize, usize, usize), Vec<Vec<AbElt>>>,
    tau_tab: HashMap<(usize, usize), HashMap<usize, usize>>,
}

impl BlockQuotLocality<'_> {
    fn ko(&self, q: usize) -> usize {
        self.quot[&q].bar.order() as usize
    }
}

impl LocalityOps for BlockQuotLocality<'_> {
    fn fusion(&self) -> &FusionSystem {
        &self.omega.ext.f
    }
    fn object_set(&self) -> &ObjectSet {
        &self.omega.x
    }
    fn size(&self, q: usize, r: usize) -> usize {
        self.omega.ext.f.homs(q, r).len() * self.ko(r)
    }
    fn pi(&self, q: usize, r: usize, m: usize) -> usize {
        let _ = q;
        m / self.ko(r)
    }
    fn tau(&self, q: usize, r: usize, u: usize) -> usize {
        *self.tau_tab[&(q, r)].get(&u).expect("u transports R into Q")
    }
    fn compose(&self, q: usize, r: usize, t: usize, x: usize, y: usize) -> usize {
        let (kor, kot) = (self.ko(r), self.ko(t));
        let (phi, a) = (x / kor, bar_coord(&self.quot[&r].bar, x % kor));
        let (psi, b) = (y / kot, bar_coord(&self.quot[&t].bar, y % kot));
        let chi = self.omega.hcomp[&(q, r, t)][phi][psi];
        let bar_t = &self.quot[&t].bar;
        let coord = bar_t.add(
            &bar_t.add(
                &self.defect[&(q, r, t)][phi][psi],
                &self.cmat[&(r, t)][psi].apply(&a),
            ),
            &b,
        );
        chi * kot + bar_index(bar_t, &coord)
    }
    fn kernel_invariants(&self, q: usize) -> Option<Vec<Int>> {
        Some(normal_invariants(&self.quot[&q].bar.orders))
    }
}

/// Quotient an Ω-locality by the kernel sub-product supported on the classes
/// rejected by `keep`, working block-wise on the kernel groups instead of by
/// elementwise coset enumeration.
///
/// Transport stability is verified exactly on the conjugation matrices: the
/// dropped generators must map into the dropped subgroup along every hom.
/// Every composite is affine in the kernel coordinates with linear part a
/// conjugation matrix, so composition then descends to the cosets.
pub fn omega_block_quotient(
    omega: &OmegaLocality,
    keep: impl Fn(&ClassSummaryRef) -> bool,
    cap: usize,
) -> Result<Quotient, LocalityError> {
    let x = omega.x.clone();
    let mut quot: HashMap<usize, BlockQuot> = HashMap::new();
    let mut dropped: HashMap<usize, Vec<AbElt>> = HashMap::new();
    for &q in &x.members {
        let od = &omega.obj[&q];
        let mut gens = Vec::new();
        for (ci, cls) in od.classes.iter().enumerate() {
            if keep(&ClassSummaryRef { t_obj: cls.t_obj, sc: cls.sc }) {
                continue;
            }
            for k in 0..cls.ab.rank() {
                let mut raw = vec![0 as Int; od.ker.raw_gens];
                raw[od.offsets[ci] + k] = 1;
                gens.push(od.ker.from_raw(&raw));
            }
        }
        quot.insert(q, block_quot(&od.ker, &gens));
        dropped.insert(q, gens);
    }
    // exact transport stability of the dropped subgroups
    for &r in &x.members {
        for &t in &x.members {
            for (hi, c) in omega.cmat[&(r, t)].iter().enumerate() {
                for g in &dropped[&r] {
                    if !quot[&t].bar.is_zero(&quot[&t].p.apply(&c.apply(g))) {
                        return Err(LocalityError::NotAFunctor(format!(
                            "conjugation along hom {hi} in ({r},{t}) moves a \
                             dropped kernel coordinate into a kept one"
                        )));
                    }
                }
            }
        }
    }
    // projected conjugation matrices and defect classes
    let mut cmat: HashMap<(usize, usize), Vec<AbHom>> = HashMap::new();
    for &r in &x.members {
        for &t in &x.members {
            let homs: Vec<AbHom> = omega.cmat[&(r, t)]
                .iter()
                .map(|c| {
                    let imgs: Vec<AbElt> = quot[&r]
                        .lifts
                        .iter()
                        .map(|l| quot[&t].p.apply(&c.apply(l)))
                        .collect();
                    AbHom::from_gen_images(&quot[&r].bar, &quot[&t].bar, &imgs)
                })
                .collect();
            cmat.insert((r, t), homs);
        }
    }
    let mut defect: HashMap<(usize, usize, usize), Vec<Vec<AbElt>>> = HashMap::new();
    for (&(q, r, t), tab) in &omega.defect {
        let ptab: Vec<Vec<AbElt>> = tab
            .iter()
            .map(|row| row.iter().map(|e| quot[&t].p.apply(e)).collect())
            .collect();
        defect.insert((q, r, t), ptab);
    }
    let mut tau_tab: HashMap<(usize, usize), HashMap<usize, usize>> = HashMap::new();
    for (&(q, r), taus) in &omega.tau_tab {
        let bq = &quot[&r];
        let kobar = bq.bar.order() as usize;
        let mapped: HashMap<usize, usize> = taus
            .iter()
            .map(|(&u, &id)| {
                let (hi, coord) = omega.decode(r, id);
                (u, hi * kobar + bar_index(&bq.bar, &bq.p.apply(&coord)))
            })
            .collect();
        tau_tab.insert((q, r), mapped);
    }
    let bq = BlockQuotLocality { omega, quot, cmat, defect, tau_tab };
    let loc = TableLocality::materialize(&bq, cap)?;
    // projection vectors from original morphism ids
    let mut proj: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for &r in &x.members {
        let ko = omega.kernel_order(r);
        let q_r = &bq.quot[&r];
        let kobar = q_r.bar.order() as usize;
        let mut pidx = vec![0usize; ko];
        for (idx, slot) in pidx.iter_mut().enumerate() {
            let e = omega.index_coord(r, idx);
            *slot = bar_index(&q_r.bar, &q_r.p.apply(&e));
        }
        for &q in &x.members {
            let n = omega.size(q, r);
            let v: Vec<usize> = (0..n).map(|m| (m / ko) * kobar + pidx[m % ko]).collect();
            proj.insert((q, r), v);
        }
    }
    Ok(Quotient { loc, proj })
}

// ---------------------------------------------------------------------------
// The natural locality
// ---------------------------------------------------------------------------

/// The natural locality over an object set X: the Ω-locality of the natural
/// basic set over the selfcentralizing objects, with the kernel coordinates
/// of non-selfcentralizing type and of type outside X quotiented away, then
/// restricted to X.
pub struct NaturalLocality {
    pub omega: OmegaLocality,
    pub x: ObjectSet,
    pub table: Option<TableLocality>,
}

pub fn natural_locality(
    ext: &Exterior,
    x: &ObjectSet,
    cap: usize,
) -> Result<NaturalLocality, LocalityError> {
    let f = &ext.f;
    let sc = ObjectSet::selfcentralizing(f);
    assert!(
        x.members.iter().all(|&q| sc.contains(q)),
        "natural locality objects must be selfcentralizing"
    );
    let biset = extended_basic_set(ext, &sc).map_err(LocalityError::Fusion)?;
    let omega = OmegaLocality::build(ext, &sc, &biset);
    // first quotient: kernel coordinates on non-selfcentralizing classes
    let mut nsc_trivial = true;
    for &q in &sc.members {
        if omega.kernel_support_ids(q, |c| !c.sc).len() > 1 {
            nsc_trivial = false;
        }
    }
    // second quotient: selfcentralizing classes whose type lies outside X
    let mut out_sub_needed = false;
    for &q in &x.members {
        if omega.kernel_support_ids(q, |c| c.sc && !x.contains(c.t_obj)).len() > 1 {
            out_sub_needed = true;
        }
    }
    if nsc_trivial && !out_sub_needed {
        return Ok(NaturalLocality { omega, x: x.clone(), table: None });
    }
    let q1 = omega_block_quotient(&omega, |c| c.sc, cap)?;
    let restricted = q1.loc.restrict(x);
    // push the out-of-X kernel coordinates through the first quotient
    let mut out_sub: HashMap<usize, Vec<usize>> = HashMap::new();
    for &q in &x.members {
        let base_ids = omega.kernel_support_ids(q, |c| !c.sc || !x.contains(c.t_obj));
        let mut ids: Vec<usize> =
            base_ids.iter().map(|&m| q1.proj[&(q, q)][m]).collect();
        ids.sort_unstable();
        ids.dedup();
        out_sub.insert(q, ids);
    }
    let q2 = quotient_locality(&restricted, &out_sub, cap)?;
    Ok(NaturalLocality { omega, x: x.clone(), table: Some(q2.loc) })
}

impl NaturalLocality {
    fn inner(&self) -> &dyn LocalityOps {
        match &self.table {
            Some(t) => t,
            None => &self.omega,
        }
    }
}

impl LocalityOps for NaturalLocality {
    fn fusion(&self) -> &FusionSystem {
        self.inner().fusion()
    }
    fn object_set(&self) -> &ObjectSet {
        &self.x
    }
    fn size(&self, q: usize, r: usize) -> usize {
        self.inner().size(q, r)
    }
    fn pi(&self, q: usize, r: usize, m: usize) -> usize {
        self.inner().pi(q, r, m)
    }
    fn tau(&self, q: usize, r: usize, u: usize) -> usize {
        self.inner().tau(q, r, u)
    }
    fn compose(&self, q: usize, r: usize, t: usize, x: usize, y: usize) -> usize {
        self.inner().compose(q, r, t, x, y)
    }
    fn kernel_invariants(&self, q: usize) -> Option<Vec<Int>> {
        match &self.table {
            Some(t) => t.kernel_invariants(q),
            None => {
                // no quotient was needed: only classes of type inside X occur
                let orders: Vec<Int> = self.omega.obj[&q]
                    .classes
                    .iter()
                    .flat_map(|c| c.ab.orders.iter().copied())
                    .collect();
                Some(normal_invariants(&orders))
            }
        }
    }
}

/// Verify that the kernels of the natural locality match the fixed-point
/// center products computed directly from the fusion system.
pub fn check_natural_kernels(nat: &NaturalLocality) -> CheckOutcome {
    let ext = &nat.omega.ext;
    for &q in &nat.x.members {
        let expected = center_product(ext, q, |t| nat.x.contains(t)).group;
        let actual = match nat.kernel_invariants(q) {
            Some(inv) => inv,
            None => {
                return CheckOutcome {
                    pass: false,
                    witness: Some(format!("kernel at {q} not abelian")),
                }
            }
        };
        if expected.orders != actual {
            return CheckOutcome {
                pass: false,
                witness: Some(format!(
                    "kernel at {q}: invariants {:?} but center product has {:?}",
                    actual, expected.orders
                )),
            };
        }
    }
    CheckOutcome { pass: true, witness: None }
}

// ---------------------------------------------------------------------------
// Locality functors and natural isomorphisms
// ---------------------------------------------------------------------------

/// A functor between two localities over the same fusion system and object
/// set, commuting with τ and π.
pub struct LocFunctor {
    /// per (q, r): morphism id in the source -> morphism id in the target
    pub maps: HashMap<(usize, usize), Vec<usize>>,
}

impl LocFunctor {
    pub fn identity(l: &dyn LocalityOps) -> LocFunctor {
        let mut maps = HashMap::new();
        for (q, r) in pair_list(l) {
            maps.insert((q, r), (0..l.size(q, r)).collect());
        }
        LocFunctor { maps }
    }
}

/// Check that a functor is a locality functor: functorial, and commuting
/// with τ and π.
pub fn check_loc_functor(
    l1: &dyn LocalityOps,
    l2: &dyn LocalityOps,
    fun: &LocFunctor,
) -> CheckOutcome {
    let f = l1.fusion();
    for (q, r) in pair_list(l1) {
        let m = &fun.maps[&(q, r)];
        for x in 0..l1.size(q, r) {
            if l2.pi(q, r, m[x]) != l1.pi(q, r, x) {
                return CheckOutcome {
                    pass: false,
                    witness: Some(format!("pi not preserved at ({q},{r}) id {x}")),
                };
            }
        }
        for u in transporter(f.sylow(), f.object(r), f.object(q)) {
            if m[l1.tau(q, r, u)] != l2.tau(q, r, u) {
                return CheckOutcome {
                    pass: false,
                    witness: Some(format!("tau not preserved at ({q},{r}) u={u}")),
                };
            }
        }
    }
    let members = l1.object_set().members.clone();
    for &q in &members {
        for &r in &members {
            for &t in &members {
                for x in 0..l1.size(q, r) {
                    for y in 0..l1.size(r, t) {
                        let lhs = fun.maps[&(q, t)][l1.compose(q, r, t, x, y)];
                        let rhs = l2.compose(
                            q,
                            r,
                            t,
                            fun.maps[&(q, r)][x],
                            fun.maps[&(r, t)][y],
                        );
                        if lhs != rhs {
                            return CheckOutcome {
                                pass: false,
                                witness: Some(format!(
                                    "functoriality fails at ({q},{r},{t})"
                                )),
                            };
                        }
                    }
                }
            }
        }
    }
    CheckOutcome { pass: true, witness: None }
}

/// Search all natural isomorphism families λ between two locality functors
/// l1, l2 : L -> L'. Each family is determined by its component at P via
/// propagation along the inclusion morphisms, then verified for naturality
/// on every morphism. Components are returned per object as morphism ids in
/// L'(Q, Q).
pub fn natural_iso_search(
    l: &dyn LocalityOps,
    lp: &dyn LocalityOps,
    f1: &LocFunctor,
    f2: &LocFunctor,
) -> Vec<HashMap<usize, usize>> {
    let f = l.fusion();
    let p_obj = f.p_object();
    assert!(l.object_set().contains(p_obj), "search needs P among the objects");
    let id_elem = f.group().identity_id();
    let mut out = Vec::new();
    for lam_p in kernel_ids(lp, p_obj) {
        // propagate along inclusions: λ_P ∘ τ'(1_{P<-Q}) = τ'(1) ∘ λ_Q
        let mut family: HashMap<usize, usize> = HashMap::new();
        family.insert(p_obj, lam_p);
        let mut ok = true;
        for &q in &l.object_set().members.clone() {
            if q == p_obj {
                continue;
            }
            let incl = lp.tau(p_obj, q, id_elem);
            let target = lp.compose(p_obj, p_obj, q, lam_p, incl);
            let lam_q = kernel_ids(lp, q)
                .into_iter()
                .find(|&k| lp.compose(p_obj, q, q, incl, k) == target);
            match lam_q {
                Some(k) => {
                    family.insert(q, k);
                }
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        // naturality on every morphism
        let members = l.object_set().members.clone();
        'check: for &q in &members {
            for &r in &members {
                for x in 0..l.size(q, r) {
                    let lhs = lp.compose(q, q, r, family[&q], f1.maps[&(q, r)][x]);
                    let rhs = lp.compose(q, r, r, f2.maps[&(q, r)][x], family[&r]);
                    if lhs != rhs {
                        ok = false;
                        break 'check;
                    }
                }
            }
        }
        if ok {
            out.push(family);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::biset::{natural_basic_set, restrict_orbits};
    use crate::group::catalog;

    fn setup(name: &str) -> (FusionSystem, Exterior, ObjectSet) {
        let (g, p) = catalog(name).unwrap();
        let f = FusionSystem::from_group(&g, p);
        let ext = Exterior::new(&f);
        let x = ObjectSet::selfcentralizing(&f);
        (f, ext, x)
    }

    fn assert_pass(c: &CheckOutcome, what: &str) {
        assert!(c.pass, "{what}: {:?}", c.witness);
    }

    #[test]
    fn transporter_locality_structure_and_kernels() {
        let (f, _, x) = setup("S4");
        let l = transporter_locality(&f, &x);
        assert_pass(&check_structure(&l, 4000, 11), "structure");
        // not divisible: fusion of S4 exceeds P-conjugation, so pi is not full
        assert!(!check_divisible(&l, 4000, 12).pass);
        assert_pass(&check_coherent(&l, 4000, 13), "coherent");
        // the kernel of the transporter locality at Q is C_P(Q)
        for &q in &x.members {
            let cp = f.sylow().centralizer(f.object(q));
            assert_eq!(kernel_ids(&l, q).len(), cp.order(), "object {q}");
        }
    }

    #[test]
    fn group_locality_is_perfect() {
        for name in ["S4", "A4", "SL23", "C3xC3:S3-wreath-slice"] {
            let (f, _, x) = setup(name);
            let l = group_locality(&f, &x);
            assert_pass(&check_structure(&l, 3000, 21), &format!("{name} structure"));
            let rep = check_perfect(&l, 3000, 22);
            assert!(rep.all_pass(), "{name}: {rep:?}");
        }
    }

    #[test]
    fn group_locality_matches_transporter_for_p_groups() {
        for name in ["D8", "Q8"] {
            let (f, _, x) = setup(name);
            let lg = group_locality(&f, &x);
            let lt = transporter_locality(&f, &x);
            for &q in &x.members {
                for &r in &x.members {
                    assert_eq!(lg.size(q, r), lt.size(q, r));
                    for m in 0..lg.size(q, r) {
                        assert_eq!(lg.pi(q, r, m), lt.pi(q, r, m));
                    }
                }
            }
            let rep = check_perfect(&lg, 2000, 23);
            assert!(rep.all_pass(), "{name}: {rep:?}");
        }
    }

    #[test]
    fn omega_locality_s4_structure() {
        let (f, ext, x) = setup("S4");
        let biset = natural_basic_set(&ext, &x).unwrap();
        let l = OmegaLocality::build(&ext, &x, &biset);
        let _ = &f;
        assert_pass(&check_structure(&l, 2500, 31), "structure");
        assert_pass(&check_divisible(&l, 2500, 32), "divisible");
        assert_pass(&check_coherent(&l, 600, 33), "coherent");
    }

    #[test]
    fn omega_classes_match_restriction_oracle() {
        for name in ["S4", "SL23", "C3xC3:S3-wreath-slice"] {
            let (f, ext, x) = setup(name);
            let biset = natural_basic_set(&ext, &x).unwrap();
            let l = OmegaLocality::build(&ext, &x, &biset);
            for &q in &x.members {
                let classes = restrict_orbits(&biset, f.object(q));
                let mut expected: Vec<(usize, usize)> = classes
                    .iter()
                    .map(|c| (c.multiplicity, c.aut_order))
                    .collect();
                expected.sort_unstable();
                let mut got: Vec<(usize, usize)> = l
                    .class_summary(q)
                    .iter()
                    .map(|(_, _, mult, _)| *mult)
                    .zip(l.class_aut_orders(q))
                    .collect();
                got.sort_unstable();
                assert_eq!(expected, got, "{name} object {q}");
            }
        }
    }

    #[test]
    fn omega_sc_kernel_blocks_match_center_product() {
        for name in ["S4", "A4", "SL23", "C3xC3:S3-wreath-slice"] {
            let (_, ext, x) = setup(name);
            let biset = natural_basic_set(&ext, &x).unwrap();
            let l = OmegaLocality::build(&ext, &x, &biset);
            for &q in &x.members {
                let mut orders: Vec<Int> = Vec::new();
                for (_, sc, _, ab) in l.class_summary(q) {
                    if sc {
                        orders.extend(ab);
                    }
                }
                let expected = center_product(&ext, q, |t| x.contains(t)).group;
                assert_eq!(
                    normal_invariants(&orders),
                    expected.orders,
                    "{name} object {q}"
                );
            }
        }
    }

    #[test]
    fn c_tilde_routes_agree() {
        for name in ["S4", "SL23"] {
            let (f, ext, x) = setup(name);
            let biset = natural_basic_set(&ext, &x).unwrap();
            let l = OmegaLocality::build(&ext, &x, &biset);
            for &q in &x.members {
                for &r in &x.members {
                    for h in 0..f.homs(q, r).len() {
                        let conj = &l.cmat[&(q, r)][h];
                        let transfer = l.c_tilde_transfer(q, r, h);
                        assert!(
                            conj.same_map(&transfer),
                            "{name}: routes differ at ({q},{r}) hom {h}"
                        );
                    }
                    // class independence: members of one exterior class give
                    // the same map
                    for c in 0..ext.n_classes(q, r) {
                        let m = ExtMor { tgt: q, src: r, c };
                        let base = l.c_tilde_map(&m);
                        for hom in ext.members(&m) {
                            let hi = f.hom_position(q, r, &hom.map).unwrap();
                            assert!(
                                l.cmat[&(q, r)][hi].same_map(&base),
                                "{name}: class member differs at ({q},{r}) class {c}"
                            );
                        }
                    }
                }
            }
            // contravariant functoriality on composable homs
            for &q in &x.members {
                for &r in &x.members {
                    for &t in &x.members {
                        for a in 0..f.homs(q, r).len() {
                            for b in 0..f.homs(r, t).len() {
                                let chi = l.hcomp[&(q, r, t)][a][b];
                                let lhs = &l.cmat[&(q, t)][chi];
                                let rhs = l.cmat[&(r, t)][b].compose(&l.cmat[&(q, r)][a]);
                                assert!(lhs.same_map(&rhs), "{name} at ({q},{r},{t})");
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn natural_locality_kernels_and_p_coherence() {
        for name in ["S4", "A4", "SL23", "C3xC3:S3-wreath-slice"] {
            let (f, ext, x) = setup(name);
            let nat = natural_locality(&ext, &x, 4_000_000).unwrap();
            assert_pass(&check_natural_kernels(&nat), &format!("{name} kernels"));
            assert_pass(&check_p_coherent(&nat, 300, 41), &format!("{name} p-coherent"));
            assert_pass(&check_structure(&nat, 300, 42), &format!("{name} structure"));
            assert_pass(&check_divisible(&nat, 300, 43), &format!("{name} divisible"));
            // the hyperfocal centralizer subgroup dies under tau
            for &q in &x.members {
                if f.is_fully_centralized(q) {
                    let h = f.hyperfocal_centralizer(q).unwrap();
                    let e = identity_mor(&nat, q);
                    for &u in &h.elems {
                        assert_eq!(nat.tau(q, q, u), e, "{name} object {q} elem {u}");
                    }
                }
            }
        }
    }

    #[test]
    fn natural_locality_on_smaller_object_set() {
        let (f, ext, _) = setup("S4");
        let x = ObjectSet::new(&f, vec![f.p_object()]).unwrap();
        let nat = natural_locality(&ext, &x, 4_000_000).unwrap();
        assert!(nat.table.is_some(), "quotient path should be exercised");
        assert_pass(&check_natural_kernels(&nat), "kernels");
        assert_pass(&check_p_coherent(&nat, 2000, 51), "p-coherent");
        assert_pass(&check_structure(&nat, 2000, 52), "structure");
        assert_pass(&check_divisible(&nat, 2000, 53), "divisible");
    }

    #[test]
    fn natural_iso_search_finds_identity() {
        let (f, _, x) = setup("S4");
        let l = transporter_locality(&f, &x);
        let id = LocFunctor::identity(&l);
        assert_pass(&check_loc_functor(&l, &l, &id), "identity functor");
        let families = natural_iso_search(&l, &l, &id, &id);
        assert!(!families.is_empty());
        let identity_family = families.iter().any(|fam| {
            x.members.iter().all(|&q| fam[&q] == identity_mor(&l, q))
        });
        assert!(identity_family, "identity family must appear");
    }

    #[test]
    fn block_quotient_matches_elementwise_quotient() {
        let mut nontrivial_seen = false;
        for name in ["S4", "SL23", "A4"] {
            let (_, ext, x) = setup(name);
            let biset = extended_basic_set(&ext, &x).unwrap();
            let l = OmegaLocality::build(&ext, &x, &biset);
            let mut sub: HashMap<usize, Vec<usize>> = HashMap::new();
            for &q in &x.members {
                let ids = l.kernel_support_ids(q, |c| !c.sc);
                if ids.len() > 1 {
                    nontrivial_seen = true;
                }
                sub.insert(q, ids);
            }
            let qe = quotient_locality(&l, &sub, 4_000_000).unwrap();
            let qb = omega_block_quotient(&l, |c| c.sc, 4_000_000).unwrap();
            for &q in &x.members {
                for &r in &x.members {
                    assert_eq!(qe.loc.size(q, r), qb.loc.size(q, r), "{name} ({q},{r})");
                    // the two projections induce the same coset partition,
                    // matched by a bijection compatible with pi
                    let pe = &qe.proj[&(q, r)];
                    let pb = &qb.proj[&(q, r)];
                    let mut match_up: HashMap<usize, usize> = HashMap::new();
                    for m in 0..l.size(q, r) {
                        if let Some(&prev) = match_up.get(&pe[m]) {
                            assert_eq!(prev, pb[m], "{name} ({q},{r}) id {m}");
                        } else {
                            match_up.insert(pe[m], pb[m]);
                        }
                        assert_eq!(
                            qe.loc.pi(q, r, pe[m]),
                            qb.loc.pi(q, r, pb[m]),
                            "{name} ({q},{r}) id {m}"
                        );
                    }
                    let images: HashSet<usize> = match_up.values().copied().collect();
                    assert_eq!(images.len(), qe.loc.size(q, r), "{name} ({q},{r})");
                    // structural maps agree through the matching
                    for (&u, &te) in &qe.loc.tau_tab[&(q, r)] {
                        assert_eq!(match_up[&te], qb.loc.tau(q, r, u), "{name} tau");
                    }
                }
            }
            // composition descends compatibly with the block projection
            for &q in &x.members {
                for &r in &x.members {
                    for &t in &x.members {
                        let (n1, n2) = (l.size(q, r), l.size(r, t));
                        let (s1, s2) = ((n1 / 37).max(1), (n2 / 41).max(1));
                        let mut a = 0;
                        while a < n1 {
                            let mut b = 0;
                            while b < n2 {
                                let c = l.compose(q, r, t, a, b);
                                assert_eq!(
                                    qb.proj[&(q, t)][c],
                                    qb.loc.compose(
                                        q,
                                        r,
                                        t,
                                        qb.proj[&(q, r)][a],
                                        qb.proj[&(r, t)][b]
                                    ),
                                    "{name} ({q},{r},{t}) ids ({a},{b})"
                                );
                                b += s2;
                            }
                            a += s1;
                        }
                    }
                }
            }
        }
        assert!(nontrivial_seen, "the sample must exercise a nontrivial quotient");
    }
}
