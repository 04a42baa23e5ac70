//! Approximate (β) duplication distance and constructive β-repeat finding.
//!
//! A β-repeat of block length h tolerates up to `floor(beta * h)` mismatches
//! between the two blocks. A sequence is β-square-free iff it is exactly
//! square-free: a block of length 1 gets budget 0, and blocks of length 2 or
//! more need sequence length at least 4, where an exact repeat always exists.
//! The target set of every β-deduplication search is therefore the six exact
//! roots, and distances take the minimum over all reachable roots.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{greedy_exact_steps, low_mask, square_free_encoded};
use crate::seq::{
    apply_dedup, apply_dedup_budgeted, validate_steps, Beta, BinarySeq, DedupProcess, DedupStep,
    KeepSide,
};

/// Length cap for [`beta_table`]; the per-state branching of β-deduplication
/// is larger than exact deduplication.
pub const BETA_TABLE_CAP: usize = 14;

const BETA_SEARCH_CAP: usize = 16;

/// Mismatch fraction plus the exact-DP length cap.
#[derive(Clone, Copy, Debug)]
pub struct BetaConfig {
    pub beta: Beta,
    pub max_n: usize,
}

impl BetaConfig {
    pub fn new(beta: Beta, max_n: usize) -> Result<Self> {
        if max_n < 1 || max_n > BETA_SEARCH_CAP {
            return Err(Error::out_of_range(
                "max_n",
                format!("{max_n} not in 1..={BETA_SEARCH_CAP}"),
            ));
        }
        Ok(BetaConfig { beta, max_n })
    }
}

/// β-dedup successors of the sequence encoded as `(len, v)`, in `(i, h, keep)`
/// lexicographic order with `first < second`. Exact repeats yield a single
/// successor since both keep-sides agree.
fn beta_children(len: usize, v: u64, beta: Beta) -> Vec<(DedupStep, usize, u64)> {
    let mut out = Vec::new();
    for i in 1..=len {
        for h in 1..=(len + 1 - i) / 2 {
            let b = len + 1 - i - 2 * h;
            let e = v ^ (v >> h);
            let mism = ((e >> b) & low_mask(h)).count_ones() as u64;
            if mism <= beta.budget(h) {
                let first = ((v >> (b + h)) << b) | (v & low_mask(b));
                out.push((
                    DedupStep {
                        i,
                        h,
                        keep: KeepSide::First,
                    },
                    len - h,
                    first,
                ));
                if mism != 0 {
                    let second = ((v >> (b + 2 * h)) << (b + h)) | (v & low_mask(b + h));
                    out.push((
                        DedupStep {
                            i,
                            h,
                            keep: KeepSide::Second,
                        },
                        len - h,
                        second,
                    ));
                }
            }
        }
    }
    out
}

/// Memoized top-down search for β-distances, reusable across queries.
pub struct BetaSearch {
    beta: Beta,
    max_n: usize,
    memo: HashMap<u32, u8>,
}

impl BetaSearch {
    pub fn new(cfg: &BetaConfig) -> Self {
        BetaSearch {
            beta: cfg.beta,
            max_n: cfg.max_n,
            memo: HashMap::new(),
        }
    }

    /// Minimum number of β-deduplications from `s` to any member of the root
    /// set.
    pub fn distance(&mut self, s: &BinarySeq) -> Result<u32> {
        if s.is_empty() {
            return Err(Error::EmptySequence);
        }
        if s.len() > self.max_n {
            return Err(Error::LengthCap {
                len: s.len(),
                cap: self.max_n,
            });
        }
        Ok(self.rec(s.len(), s.encoding()) as u32)
    }

    /// An optimal witness process; ties broken by smallest `(i, h, keep)`.
    pub fn witness_process(&mut self, s: &BinarySeq) -> Result<DedupProcess> {
        self.distance(s)?;
        let mut cur_len = s.len();
        let mut cur_v = s.encoding();
        let mut d = self.rec(cur_len, cur_v);
        let mut steps = Vec::with_capacity(d as usize);
        while d > 0 {
            let mut advanced = false;
            for (step, clen, cv) in beta_children(cur_len, cur_v, self.beta) {
                if self.rec(clen, cv) + 1 == d {
                    steps.push(step);
                    cur_len = clen;
                    cur_v = cv;
                    d -= 1;
                    advanced = true;
                    break;
                }
            }
            if !advanced {
                return Err(Error::Internal("beta search lost a minimizer".into()));
            }
        }
        DedupProcess::new(s.clone(), self.beta, steps)
    }

    fn rec(&mut self, len: usize, v: u64) -> u8 {
        if square_free_encoded(len, v) {
            return 0;
        }
        let key = ((len as u32) << 16) | v as u32;
        if let Some(&d) = self.memo.get(&key) {
            return d;
        }
        let mut best = u8::MAX;
        for (_, clen, cv) in beta_children(len, v, self.beta) {
            let d = self.rec(clen, cv) + 1;
            if d < best {
                best = d;
            }
        }
        self.memo.insert(key, best);
        best
    }
}

/// `f_beta(s)`: exact DP over the β-dedup graph (two keep-sides per
/// mismatched repeat).
pub fn beta_distance(s: &BinarySeq, cfg: &BetaConfig) -> Result<u32> {
    BetaSearch::new(cfg).distance(s)
}

/// Optimal β-process witness for `s`.
pub fn beta_process(s: &BinarySeq, cfg: &BetaConfig) -> Result<DedupProcess> {
    BetaSearch::new(cfg).witness_process(s)
}

/// `f_beta(n)` for n = 1..=cfg.max_n. Parallelizes over starting sequences
/// with per-worker memo tables; distances are deterministic so overlapping
/// memo entries must agree, which the merge step asserts in debug builds.
pub fn beta_table(cfg: &BetaConfig) -> Result<Vec<u8>> {
    if cfg.max_n > BETA_TABLE_CAP {
        return Err(Error::LengthCap {
            len: cfg.max_n,
            cap: BETA_TABLE_CAP,
        });
    }
    let mut out = Vec::with_capacity(cfg.max_n);
    for n in 1..=cfg.max_n {
        let total = 1u64 << n;
        let chunk = 1u64 << 10;
        let starts: Vec<u64> = (0..total).step_by(chunk as usize).collect();
        let (max, _memo) = starts
            .into_par_iter()
            .map(|lo| {
                let mut search = BetaSearch::new(cfg);
                let mut mx = 0u8;
                for v in lo..(lo + chunk).min(total) {
                    mx = mx.max(search.rec(n, v));
                }
                (mx, search.memo)
            })
            .reduce(
                || (0u8, HashMap::new()),
                |(m1, mut a), (m2, b)| {
                    for (k, v) in b {
                        match a.get(&k) {
                            Some(&prev) => debug_assert_eq!(prev, v),
                            None => {
                                a.insert(k, v);
                            }
                        }
                    }
                    (m1.max(m2), a)
                },
            );
        out.push(max);
    }
    Ok(out)
}

/// β-repeat witness carrying the full derivation trace of the constructive
/// finder: the block partition size B, the chosen window pair, and the block
/// index within the overlap.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepeatWitness {
    pub i: usize,
    pub h: usize,
    pub mismatches: u64,
    pub k: usize,
    pub ell: usize,
    #[serde(rename = "B")]
    pub block_size: usize,
    pub pair: (usize, usize),
    pub r: usize,
}

/// Smallest admissible window parameter `ceil((2 beta + 1) / (2 beta - 1))`
/// for `beta > 1/2`.
pub fn plotkin_k(beta: Beta) -> Result<usize> {
    if !beta.gt_half() {
        return Err(Error::InvalidInput(format!(
            "beta = {beta} must exceed 1/2"
        )));
    }
    let num = beta.numer() as u64;
    let den = beta.denom() as u64;
    Ok(((2 * num + den).div_ceil(2 * num - den)) as usize)
}

/// Whether `1/2 + 1/(k-1) <= beta`, i.e. `k >= (2 beta + 1) / (2 beta - 1)`.
fn k_admissible(k: usize, beta: Beta) -> bool {
    let num = beta.numer() as u128;
    let den = beta.denom() as u128;
    2 * num > den && (k as u128) * (2 * num - den) >= 2 * num + den
}

/// Constructive β-repeat existence for `beta > 1/2`: partition the first
/// `k^2 * B` symbols into `k^2` blocks of size `B = floor(n / k^2)`, compare
/// the `k + 1` windows of `k^2 - k` consecutive blocks pairwise (some pair is
/// within `(1/2 + 1/2k) m` mismatches, a Plotkin-type fact), truncate the
/// winning pair to a multiple of `h = (j - i) B`, and return the closest
/// adjacent block pair, which is within `(1/2 + 1/(k-1)) h <= beta h`.
///
/// Determinism: the lexicographically smallest qualifying `(i, j)` and the
/// smallest minimizing `r` are chosen.
pub fn plotkin_repeat_finder(s: &BinarySeq, beta: Beta, k: usize) -> Result<RepeatWitness> {
    if !k_admissible(k, beta) {
        return Err(Error::out_of_range(
            "k",
            format!("k = {k} is below (2b+1)/(2b-1) for beta = {beta}"),
        ));
    }
    find_witness(s, k, |h, mism| mism <= beta.budget(h))
}

fn find_witness(
    s: &BinarySeq,
    k: usize,
    budget_ok: impl Fn(usize, u64) -> bool,
) -> Result<RepeatWitness> {
    let n = s.len();
    if k < 2 || n < k * k {
        return Err(Error::out_of_range(
            "length",
            format!("need k >= 2 and |s| >= k^2, got k = {k}, |s| = {n}"),
        ));
    }
    let big_k = k * k;
    let block = n / big_k;
    let m = (big_k - k) * block;
    // pairwise window comparison; Plotkin guarantees a qualifying pair
    let mut hit: Option<(usize, usize)> = None;
    'pairs: for i in 1..=k {
        for j in i + 1..=k + 1 {
            let d = s.hamming_at((i - 1) * block + 1, (j - 1) * block + 1, m);
            if 2 * d <= ((big_k - 1) * block) as u64 {
                hit = Some((i, j));
                break 'pairs;
            }
        }
    }
    let (wi, wj) = hit.ok_or_else(|| {
        Error::Internal("no window pair within the Plotkin distance bound".into())
    })?;
    let h = (wj - wi) * block;
    let p = m / h;
    let base = (wi - 1) * block;
    let mut best: Option<(u64, usize)> = None;
    for r in 1..=p {
        let d = s.hamming_at(base + (r - 1) * h + 1, base + r * h + 1, h);
        if best.map_or(true, |(bd, _)| d < bd) {
            best = Some((d, r));
        }
    }
    let (mismatches, r) = best.expect("p >= 1");
    if 2 * (k as u64 - 1) * mismatches > ((k + 1) * h) as u64 {
        return Err(Error::Internal(
            "adjacent block pair exceeds the averaging bound".into(),
        ));
    }
    if !budget_ok(h, mismatches) {
        return Err(Error::Internal(
            "witness exceeds the mismatch budget".into(),
        ));
    }
    Ok(RepeatWitness {
        i: base + (r - 1) * h + 1,
        h,
        mismatches,
        k,
        ell: wj - wi,
        block_size: block,
        pair: (wi, wj),
        r,
    })
}

/// Logarithmic-step greedy deduplication for `beta > 1/2`: repeatedly remove
/// the β-repeat found by [`plotkin_repeat_finder`] (keeping the first block)
/// while the length is at least `k^2`, then finish with exact dedups of the
/// first available repeat.
pub fn greedy_log_dedup(s: &BinarySeq, beta: Beta) -> Result<DedupProcess> {
    let k = plotkin_k(beta)?;
    if s.is_empty() {
        return Err(Error::EmptySequence);
    }
    let mut cur = s.clone();
    let mut steps = Vec::new();
    while cur.len() >= k * k {
        let w = plotkin_repeat_finder(&cur, beta, k)?;
        let step = DedupStep::new(w.i, w.h);
        cur = apply_dedup(&cur, &step, beta)?;
        steps.push(step);
    }
    let (tail, _) = greedy_exact_steps(&cur);
    steps.extend(tail);
    DedupProcess::new(s.clone(), beta, steps)
}

/// Window parameter for the nonlinear mismatch model: `ceil(2 n^{a/(1+a)})`.
pub fn nonlinear_k(n: usize, a: f64) -> usize {
    (2.0 * (n as f64).powf(a / (1.0 + a))).ceil() as usize
}

/// Mismatch budget `floor((1/2 + h^{-a}) h)`. Values within 1e-6 of an
/// integer snap to it so that exactly-integral budgets (h a perfect power)
/// are not lost to float rounding.
pub fn nonlinear_budget(h: usize, a: f64) -> u64 {
    let t = 0.5 * h as f64 + (h as f64).powf(1.0 - a);
    let r = t.round();
    if (t - r).abs() < 1e-6 {
        r as u64
    } else {
        t.floor() as u64
    }
}

/// Same construction as [`plotkin_repeat_finder`] with `k = ceil(2 n^{a/(1+a)})`
/// and the per-length acceptance threshold `floor((1/2 + h^{-a}) h)`.
pub fn nonlinear_repeat_finder(s: &BinarySeq, a: f64) -> Result<RepeatWitness> {
    if !(0.0 < a && a < 1.0) {
        return Err(Error::InvalidInput(format!("exponent a = {a} not in (0, 1)")));
    }
    let k = nonlinear_k(s.len(), a);
    find_witness(s, k, |h, mism| mism <= nonlinear_budget(h, a))
}

/// A process whose steps are valid under the nonlinear per-length budget.
#[derive(Clone, Debug)]
pub struct NonlinearProcess {
    pub original: BinarySeq,
    pub exponent: f64,
    pub steps: Vec<DedupStep>,
    pub final_seq: BinarySeq,
}

impl NonlinearProcess {
    /// Replay all steps against the nonlinear budget and check the recorded
    /// final sequence is reached and square-free.
    pub fn validate(&self) -> Result<BinarySeq> {
        let got = validate_steps(&self.original, &self.steps, |h| {
            nonlinear_budget(h, self.exponent)
        })?;
        if got != self.final_seq {
            return Err(Error::FinalMismatch {
                got: got.display_clipped(),
                expected: self.final_seq.display_clipped(),
            });
        }
        if !got.is_square_free() {
            return Err(Error::FinalNotSquareFree(got.display_clipped()));
        }
        Ok(got)
    }
}

/// Greedy driver for the nonlinear model: apply [`nonlinear_repeat_finder`]
/// (keep-side first) while `k(len)^2 <= len`, then finish with exact dedups.
pub fn nonlinear_greedy_dedup(s: &BinarySeq, a: f64) -> Result<NonlinearProcess> {
    if !(0.0 < a && a < 1.0) {
        return Err(Error::InvalidInput(format!("exponent a = {a} not in (0, 1)")));
    }
    let k0 = nonlinear_k(s.len(), a);
    if k0 < 2 || k0 * k0 > s.len() {
        return Err(Error::out_of_range(
            "length",
            format!(
                "|s| = {} is too short for k = ceil(2 n^(a/(1+a))) = {k0}",
                s.len()
            ),
        ));
    }
    let mut cur = s.clone();
    let mut steps = Vec::new();
    loop {
        let k = nonlinear_k(cur.len(), a);
        if k < 2 || k * k > cur.len() {
            break;
        }
        let w = nonlinear_repeat_finder(&cur, a)?;
        let step = DedupStep::new(w.i, w.h);
        cur = apply_dedup_budgeted(&cur, &step, nonlinear_budget(w.h, a))?;
        steps.push(step);
    }
    let (tail, fin) = greedy_exact_steps(&cur);
    steps.extend(tail);
    let out = NonlinearProcess {
        original: s.clone(),
        exponent: a,
        steps,
        final_seq: fin,
    };
    out.validate()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{DistanceTable, SearchConfig};

    fn seq(s: &str) -> BinarySeq {
        s.parse().unwrap()
    }

    fn beta(n: u32, d: u32) -> Beta {
        Beta::new(n, d).unwrap()
    }

    #[test]
    fn beta_distance_examples() {
        let cfg = BetaConfig::new(beta(1, 2), 12).unwrap();
        assert_eq!(beta_distance(&seq("0110"), &cfg).unwrap(), 1);
        let p = beta_process(&seq("0110"), &cfg).unwrap();
        assert_eq!(p.steps.len(), 1);
        p.replay().unwrap();
    }

    #[test]
    fn beta_zero_matches_exact_table() {
        let table = DistanceTable::build(&SearchConfig::new(8).unwrap()).unwrap();
        let cfg = BetaConfig::new(Beta::ZERO, 8).unwrap();
        let mut search = BetaSearch::new(&cfg);
        for n in 1..=8usize {
            for v in 0..(1u64 << n) {
                let s = BinarySeq::from_value(v, n);
                assert_eq!(
                    search.distance(&s).unwrap(),
                    table.f_of_seq(&s).unwrap() as u32
                );
            }
        }
    }

    #[test]
    fn beta_table_monotone_in_beta() {
        let betas = [Beta::ZERO, beta(1, 4), beta(1, 2), beta(3, 4)];
        let tables: Vec<Vec<u8>> = betas
            .iter()
            .map(|&b| beta_table(&BetaConfig::new(b, 9).unwrap()).unwrap())
            .collect();
        for w in tables.windows(2) {
            for n in 0..9 {
                assert!(w[1][n] <= w[0][n], "f_beta not non-increasing at n={}", n + 1);
            }
        }
    }

    #[test]
    fn plotkin_k_values() {
        assert_eq!(plotkin_k(beta(3, 5)).unwrap(), 11);
        assert_eq!(plotkin_k(beta(3, 4)).unwrap(), 5);
        assert!(plotkin_k(beta(1, 2)).is_err());
    }

    #[test]
    fn plotkin_all_zeros() {
        let s = BinarySeq::zeros(128);
        let w = plotkin_repeat_finder(&s, beta(3, 5), 11).unwrap();
        assert_eq!(w.mismatches, 0);
        assert_eq!(w.block_size, 1);
        assert_eq!(w.h, w.ell * 1);
        assert_eq!(w.pair, (1, 2));
    }

    #[test]
    fn plotkin_alternating() {
        let s: BinarySeq = BinarySeq::from_bits((0..10_000).map(|i| i % 2 == 1));
        let w = plotkin_repeat_finder(&s, beta(3, 5), 11).unwrap();
        // window offsets differ by multiples of B = 82, an even shift, so
        // the periodic structure matches exactly
        assert_eq!(w.mismatches, 0);
        assert_eq!(w.block_size, 82);
    }

    #[test]
    fn witness_json_schema() {
        let w = plotkin_repeat_finder(&BinarySeq::zeros(128), beta(3, 5), 11).unwrap();
        let js = serde_json::to_value(&w).unwrap();
        assert!(js.get("B").is_some());
        assert!(js.get("pair").unwrap().is_array());
        assert_eq!(js["mismatches"], 0);
        let back: RepeatWitness = serde_json::from_value(js).unwrap();
        assert_eq!(back, w);
    }

    #[test]
    fn greedy_log_runs_to_root() {
        let p = greedy_log_dedup(&BinarySeq::zeros(1024), beta(3, 4)).unwrap();
        // K = 25 for beta = 3/4; Theorem-style ceiling with generous slack
        assert!((p.steps.len() as f64) <= 25.0 * (1024f64).ln() + 50.0);
        p.replay().unwrap();
        // below k^2 the result equals the pure fallback path
        let small = seq("0110100110");
        let p = greedy_log_dedup(&small, beta(3, 4)).unwrap();
        let (tail, fin) = greedy_exact_steps(&small);
        assert_eq!(p.steps, tail);
        assert_eq!(p.final_seq, fin);
    }

    #[test]
    fn nonlinear_examples() {
        let p = nonlinear_greedy_dedup(&BinarySeq::zeros(4096), 0.5).unwrap();
        p.validate().unwrap();
        // step count against c2 * n^(2a/(1+a)) + c3 with the constants
        // pinned for this implementation
        let bound = 8.0 * (4096f64).powf(2.0 * 0.5 / 1.5) + 64.0;
        assert!(
            (p.steps.len() as f64) <= bound,
            "steps = {}, bound = {bound}",
            p.steps.len()
        );
        let w = nonlinear_repeat_finder(&BinarySeq::zeros(4096), 0.5).unwrap();
        assert!(w.mismatches <= nonlinear_budget(w.h, 0.5));
    }

    #[test]
    fn nonlinear_budget_snaps_integral_values() {
        // h = 16, a = 0.5: 8 + 4 = 12 exactly
        assert_eq!(nonlinear_budget(16, 0.5), 12);
        assert_eq!(nonlinear_budget(4, 0.5), 4);
    }
}
