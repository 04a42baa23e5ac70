//! Sequence families with known distance behavior: de Bruijn sequences,
//! Thue-Morse and Fibonacci words, general binary D0L-systems, and explicit
//! deduplication schedules for them.
//!
//! Schedules compute concrete (i, h) indices from the known prefix lengths of
//! the recursive decompositions; the replay validator is the source of truth
//! and every schedule is validated before it is returned.

use crate::error::{Error, Result};
use crate::exact::shortest_process_search;
use crate::seq::{apply_dedup, Beta, BinarySeq, DedupProcess, DedupStep, SeqBuilder};

/// Default output cap for iterated systems and word families.
pub const SEQ_CAP: usize = 1 << 26;

/// Exact-search cap for the finishing process appended by [`d0l_lift`];
/// images of the six roots must stay within it.
const LIFT_FINISH_CAP: usize = 18;

/// Lexicographically least binary de Bruijn sequence of order `k`: the
/// concatenation, in lexicographic order, of the Lyndon words whose length
/// divides `k` (generated by Duval's next-word step).
pub fn de_bruijn(k: usize) -> Result<BinarySeq> {
    if !(1..=24).contains(&k) {
        return Err(Error::out_of_range("order", format!("{k} not in 1..=24")));
    }
    let mut out = SeqBuilder::with_capacity(1 << k);
    let mut w: Vec<u8> = vec![0];
    loop {
        if k % w.len() == 0 {
            for &c in &w {
                out.push_bit(c == 1);
            }
        }
        let mut t: Vec<u8> = (0..k).map(|i| w[i % w.len()]).collect();
        while t.last() == Some(&1) {
            t.pop();
        }
        if t.is_empty() {
            break;
        }
        *t.last_mut().unwrap() = 1;
        w = t;
    }
    debug_assert_eq!(out.len(), 1 << k);
    Ok(out.finish())
}

/// Distance lower bound `ceil((2^k - k) / k)` for any order-`k` de Bruijn
/// sequence, from the k-mer count bound at `n = 2^k`.
pub fn debruijn_bound(k: usize) -> Result<u64> {
    if !(4..=63).contains(&k) {
        return Err(Error::out_of_range("order", format!("{k} not in 4..=63")));
    }
    let n = 1u64 << k;
    Ok((n - k as u64).div_ceil(k as u64))
}

/// The r-th Thue-Morse word: t_0 = 0, t_{r+1} = t_r followed by its
/// complement. Length 2^r.
pub fn thue_morse(r: u32) -> Result<BinarySeq> {
    if (1usize << r.min(63)) > SEQ_CAP {
        return Err(Error::LengthCap {
            len: 1 << r,
            cap: SEQ_CAP,
        });
    }
    let mut t: BinarySeq = "0".parse().unwrap();
    for _ in 0..r {
        t = t.concat(&t.complement());
    }
    Ok(t)
}

/// The r-th Fibonacci word: u_0 = 0, u_1 = 01, u_r = u_{r-1} u_{r-2}.
pub fn fibonacci_word(r: u32) -> Result<BinarySeq> {
    if fibonacci_len(r)? > SEQ_CAP as u64 {
        return Err(Error::LengthCap {
            len: usize::MAX,
            cap: SEQ_CAP,
        });
    }
    let mut prev: BinarySeq = "0".parse().unwrap();
    if r == 0 {
        return Ok(prev);
    }
    let mut cur: BinarySeq = "01".parse().unwrap();
    for _ in 1..r {
        let next = cur.concat(&prev);
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// |u_r| without building the word.
fn fibonacci_len(r: u32) -> Result<u64> {
    let (mut a, mut b) = (1u64, 2u64);
    if r == 0 {
        return Ok(a);
    }
    for _ in 1..r {
        let c = a.checked_add(b).ok_or_else(|| Error::LengthCap {
            len: usize::MAX,
            cap: SEQ_CAP,
        })?;
        a = b;
        b = c;
    }
    Ok(b)
}

/// Binary D0L-system: axiom plus images of 0 and 1 under the morphism.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LSystem {
    pub axiom: BinarySeq,
    pub image0: BinarySeq,
    pub image1: BinarySeq,
}

impl LSystem {
    pub fn new(axiom: BinarySeq, image0: BinarySeq, image1: BinarySeq) -> Result<Self> {
        if axiom.is_empty() || image0.is_empty() || image1.is_empty() {
            return Err(Error::InvalidInput(
                "axiom and both images must be non-empty".into(),
            ));
        }
        Ok(LSystem {
            axiom,
            image0,
            image1,
        })
    }

    /// One morphism application, capped at [`SEQ_CAP`] output symbols.
    pub fn apply(&self, s: &BinarySeq) -> Result<BinarySeq> {
        self.apply_capped(s, SEQ_CAP)
    }

    pub fn apply_capped(&self, s: &BinarySeq, cap: usize) -> Result<BinarySeq> {
        let ones = s.count_ones() as u128;
        let zeros = s.len() as u128 - ones;
        let new_len = zeros * self.image0.len() as u128 + ones * self.image1.len() as u128;
        if new_len > cap as u128 {
            return Err(Error::LengthCap {
                len: new_len.min(usize::MAX as u128) as usize,
                cap,
            });
        }
        let mut out = SeqBuilder::with_capacity(new_len as usize);
        for b in s.iter_bits() {
            out.push_seq(if b { &self.image1 } else { &self.image0 });
        }
        Ok(out.finish())
    }
}

/// `h^r(axiom)` by repeated morphism application, capped at [`SEQ_CAP`].
pub fn d0l_iterate(sys: &LSystem, r: u32) -> Result<BinarySeq> {
    d0l_iterate_capped(sys, r, SEQ_CAP)
}

pub fn d0l_iterate_capped(sys: &LSystem, r: u32, cap: usize) -> Result<BinarySeq> {
    let mut cur = sys.axiom.clone();
    for _ in 0..r {
        cur = sys.apply_capped(&cur, cap)?;
    }
    Ok(cur)
}

/// Explicit schedule for the r-th Thue-Morse word, at most 2r steps.
///
/// Uses t_r = t_{r-2} c c t_{r-2} with c the complement of t_{r-2}: dedup the
/// central square, then three more steps through the half-size decomposition
/// reach t_{r-2}; the bases close at t_2 (one step) and t_1 (a root).
pub fn tm_schedule(r: u32) -> Result<DedupProcess> {
    if r < 2 {
        return Err(Error::out_of_range("order", format!("{r} < 2")));
    }
    let t_r = thue_morse(r)?;
    let mut steps = Vec::new();
    let mut rr = r;
    while rr >= 3 {
        let q = 1usize << (rr - 2);
        let w = 1usize << (rr - 3);
        steps.push(DedupStep::new(q + 1, q));
        steps.push(DedupStep::new(w + 1, w));
        steps.push(DedupStep::new(2 * w + 1, w));
        steps.push(DedupStep::new(1, 2 * w));
        rr -= 2;
    }
    if rr == 2 {
        steps.push(DedupStep::new(2, 1));
    }
    debug_assert!(steps.len() <= 2 * r as usize);
    DedupProcess::new(t_r, Beta::ZERO, steps)
}

/// Explicit schedule for the r-th Fibonacci word, at most r steps.
///
/// Uses u_r = u_{r-2}^2 u_{r-5} u_{r-4} (one dedup) followed by
/// u_{r-2} u_{r-5} u_{r-4} = u_{r-3}^2 u_{r-4} (one more) to reach u_{r-2};
/// the bases close at u_4 and u_3 in two steps each, and u_2 is a root.
pub fn fib_schedule(r: u32) -> Result<DedupProcess> {
    if r < 2 {
        return Err(Error::out_of_range("order", format!("{r} < 2")));
    }
    let u_r = fibonacci_word(r)?;
    let mut lens = vec![1u64, 2];
    for j in 2..=r as usize {
        let c = lens[j - 1] + lens[j - 2];
        lens.push(c);
    }
    let mut steps = Vec::new();
    let mut rr = r as usize;
    while rr >= 5 {
        steps.push(DedupStep::new(1, lens[rr - 2] as usize));
        steps.push(DedupStep::new(1, lens[rr - 3] as usize));
        rr -= 2;
    }
    match rr {
        4 => {
            steps.push(DedupStep::new(1, 3));
            steps.push(DedupStep::new(1, 2));
        }
        3 => {
            steps.push(DedupStep::new(3, 1));
            steps.push(DedupStep::new(1, 2));
        }
        _ => {}
    }
    debug_assert!(steps.len() <= r as usize);
    DedupProcess::new(u_r, Beta::ZERO, steps)
}

/// Lift a valid exact process for x = h^{r-1}(axiom) to one for h^r(axiom):
/// every dedup of a block a_1..a_k a_1..a_k maps to a dedup of
/// h(a_1)..h(a_k) h(a_1)..h(a_k) with indices and lengths pushed through the
/// image lengths, and a shortest finishing process from h(root(x)) to its own
/// root is appended. The additive overhead is therefore at most
/// max over roots z of f(h(z)).
pub fn d0l_lift(sys: &LSystem, p: &DedupProcess) -> Result<DedupProcess> {
    if !p.beta.is_zero() {
        return Err(Error::InvalidInput(
            "lifting is defined for exact processes".into(),
        ));
    }
    p.replay()?;
    let img_len = |b: bool| {
        if b {
            sys.image1.len()
        } else {
            sys.image0.len()
        }
    };
    let mut cur = p.original.clone();
    let mut lifted: Vec<DedupStep> = Vec::with_capacity(p.steps.len());
    for step in &p.steps {
        let mut i2 = 1usize;
        for pos in 1..step.i {
            i2 += img_len(cur.get(pos));
        }
        let mut h2 = 0usize;
        for pos in step.i..step.i + step.h {
            h2 += img_len(cur.get(pos));
        }
        lifted.push(DedupStep {
            i: i2,
            h: h2,
            keep: step.keep,
        });
        cur = apply_dedup(&cur, step, Beta::ZERO)?;
    }
    let image_of_root = sys.apply(&cur)?;
    if image_of_root.len() > LIFT_FINISH_CAP {
        return Err(Error::LengthCap {
            len: image_of_root.len(),
            cap: LIFT_FINISH_CAP,
        });
    }
    let finish = shortest_process_search(&image_of_root, LIFT_FINISH_CAP)?;
    lifted.extend(finish.steps);
    DedupProcess::new(sys.apply(&p.original)?, Beta::ZERO, lifted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{oracle_distance, DistanceTable, SearchConfig};
    use crate::seq::Root;
    use std::collections::HashSet;

    fn seq(s: &str) -> BinarySeq {
        s.parse().unwrap()
    }

    #[test]
    fn de_bruijn_goldens() {
        assert_eq!(de_bruijn(2).unwrap(), seq("0011"));
        assert_eq!(de_bruijn(3).unwrap(), seq("00010111"));
        assert_eq!(de_bruijn(1).unwrap(), seq("01"));
        assert!(de_bruijn(0).is_err());
        assert!(de_bruijn(25).is_err());
    }

    #[test]
    fn de_bruijn_cyclic_kmers_complete() {
        for k in 2..=12usize {
            let s = de_bruijn(k).unwrap();
            assert_eq!(s.len(), 1 << k);
            // linear k-mer count of a de Bruijn cycle written linearly
            assert_eq!(s.kmer_count(k).unwrap(), (1u64 << k) - k as u64 + 1);
            // cyclic completeness via wrap-around extension
            let wrapped = s.concat(&s.slice(1, k - 1));
            let mut seen = HashSet::new();
            for i in 1..=(1usize << k) {
                seen.insert(wrapped.slice(i, k));
            }
            assert_eq!(seen.len(), 1 << k);
        }
    }

    #[test]
    fn debruijn_bound_values() {
        assert_eq!(debruijn_bound(4).unwrap(), 3);
        assert_eq!(debruijn_bound(5).unwrap(), 6);
        assert!(debruijn_bound(3).is_err());
        // bound is dominated by the true distance at k = 4
        let t = DistanceTable::build(&SearchConfig::new(16).unwrap()).unwrap();
        let f = t.f_of_seq(&de_bruijn(4).unwrap()).unwrap() as u64;
        assert!(debruijn_bound(4).unwrap() <= f);
        assert!(de_bruijn(4).unwrap().kmer_lower_bound(4).unwrap() <= f);
        assert_eq!(de_bruijn(4).unwrap().kmer_lower_bound(4).unwrap(), 5);
    }

    #[test]
    fn word_family_goldens() {
        assert_eq!(thue_morse(0).unwrap(), seq("0"));
        assert_eq!(thue_morse(2).unwrap(), seq("0110"));
        assert_eq!(thue_morse(3).unwrap(), seq("01101001"));
        assert_eq!(fibonacci_word(3).unwrap(), seq("01001"));
        assert_eq!(fibonacci_word(4).unwrap(), seq("01001010"));
        for r in 2..=20u32 {
            assert_eq!(thue_morse(r).unwrap().len(), 1 << r);
            let u = fibonacci_word(r).unwrap();
            assert_eq!(
                u,
                fibonacci_word(r - 1).unwrap().concat(&fibonacci_word(r - 2).unwrap())
            );
        }
    }

    #[test]
    fn d0l_examples() {
        let fib = LSystem::new(seq("0"), seq("01"), seq("0")).unwrap();
        assert_eq!(d0l_iterate(&fib, 5).unwrap(), seq("0100101001001"));
        assert_eq!(d0l_iterate(&fib, 4).unwrap(), seq("01001010"));
        let id = LSystem::new(seq("0110"), seq("0"), seq("1")).unwrap();
        for r in 0..6 {
            assert_eq!(d0l_iterate(&id, r).unwrap(), seq("0110"));
        }
        let tm = LSystem::new(seq("0"), seq("01"), seq("10")).unwrap();
        assert_eq!(d0l_iterate(&tm, 3).unwrap(), seq("01101001"));
        assert!(LSystem::new(seq("0"), BinarySeq::empty(), seq("1")).is_err());
    }

    #[test]
    fn d0l_iterate_matches_word_families() {
        let fib = LSystem::new(seq("0"), seq("01"), seq("0")).unwrap();
        let tm = LSystem::new(seq("0"), seq("01"), seq("10")).unwrap();
        for r in 0..=15u32 {
            assert_eq!(d0l_iterate(&fib, r).unwrap(), fibonacci_word(r).unwrap());
            assert_eq!(d0l_iterate(&tm, r).unwrap(), thue_morse(r).unwrap());
        }
    }

    #[test]
    fn schedules_replay_with_claimed_step_counts() {
        for r in 2..=12u32 {
            let p = tm_schedule(r).unwrap();
            p.replay().unwrap();
            assert!(p.steps.len() <= 2 * r as usize, "tm r={r}");
            let q = fib_schedule(r).unwrap();
            q.replay().unwrap();
            assert!(q.steps.len() <= r as usize, "fib r={r}");
        }
        assert_eq!(tm_schedule(2).unwrap().steps.len(), 1);
        assert_eq!(fib_schedule(4).unwrap().steps.len(), 2);
        assert!(tm_schedule(1).is_err());
        // optimality of the small bases
        assert_eq!(oracle_distance(&seq("0110")).unwrap(), 1);
        assert_eq!(oracle_distance(&seq("01001")).unwrap(), 2);
        assert_eq!(oracle_distance(&seq("01001010")).unwrap(), 2);
    }

    #[test]
    fn lift_examples() {
        let tm = LSystem::new(seq("0"), seq("01"), seq("10")).unwrap();
        // lifting the empty process on the root "0" needs no finishing steps
        let p0 = DedupProcess::new(seq("0"), Beta::ZERO, vec![]).unwrap();
        let p1 = d0l_lift(&tm, &p0).unwrap();
        assert_eq!(p1.original, seq("01"));
        assert!(p1.steps.is_empty());
        // one more lift reaches t_2 = 0110 and must dedup it
        let p2 = d0l_lift(&tm, &p1).unwrap();
        assert_eq!(p2.original, seq("0110"));
        assert_eq!(p2.steps.len(), 1);
        p2.replay().unwrap();

        let sys = LSystem::new(seq("0"), seq("0"), seq("10")).unwrap();
        let mut p = DedupProcess::new(seq("0"), Beta::ZERO, vec![]).unwrap();
        for _ in 0..6 {
            p = d0l_lift(&sys, &p).unwrap();
            p.replay().unwrap();
        }
    }

    #[test]
    fn lift_overhead_is_bounded_by_root_images() {
        let fib = LSystem::new(seq("0"), seq("01"), seq("0")).unwrap();
        let t = DistanceTable::build(&SearchConfig::new(8).unwrap()).unwrap();
        let c = Root::ALL
            .iter()
            .map(|z| t.f_of_seq(&fib.apply(&z.seq()).unwrap()).unwrap())
            .max()
            .unwrap() as usize;
        let mut p = DedupProcess::new(seq("0"), Beta::ZERO, vec![]).unwrap();
        for _ in 0..10 {
            let q = d0l_lift(&fib, &p).unwrap();
            assert!(q.steps.len() <= p.steps.len() + c);
            p = q;
        }
    }
}
