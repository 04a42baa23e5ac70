//! Core sequence values and the duplication / deduplication mechanics.
//!
//! A [`BinarySeq`] is an immutable bit-packed binary word. Positions are
//! 1-based throughout, and position 1 is the most significant bit of the
//! packed representation, so for sequences of at most 64 symbols the packed
//! value equals the integer encoding `sum s_i * 2^(len - i)`.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[inline]
fn word_count(len: usize) -> usize {
    len.div_ceil(64)
}

/// Mask keeping the top `n` bits of a word, `1 <= n <= 64`.
#[inline]
fn high_mask(n: usize) -> u64 {
    debug_assert!(n >= 1 && n <= 64);
    !0u64 << (64 - n)
}

/// Immutable bit-packed binary sequence with 1-based positions.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinarySeq {
    len: usize,
    words: Vec<u64>,
}

impl BinarySeq {
    /// The empty sequence.
    pub fn empty() -> Self {
        BinarySeq {
            len: 0,
            words: Vec::new(),
        }
    }

    /// All-zeros sequence of length `n`.
    pub fn zeros(n: usize) -> Self {
        BinarySeq {
            len: n,
            words: vec![0; word_count(n)],
        }
    }

    /// All-ones sequence of length `n`.
    pub fn ones(n: usize) -> Self {
        Self::zeros(n).complement()
    }

    /// Sequence of length `len <= 64` from its integer encoding.
    pub fn from_value(value: u64, len: usize) -> Self {
        assert!(len <= 64, "from_value limited to one machine word");
        if len == 0 {
            return Self::empty();
        }
        debug_assert!(len == 64 || value >> len == 0);
        BinarySeq {
            len,
            words: vec![value << (64 - len)],
        }
    }

    /// Build from an iterator of bits, most significant (position 1) first.
    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let mut words: Vec<u64> = Vec::new();
        let mut len = 0usize;
        for b in bits {
            if len & 63 == 0 {
                words.push(0);
            }
            if b {
                words[len >> 6] |= 1u64 << (63 - (len & 63));
            }
            len += 1;
        }
        BinarySeq { len, words }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Symbol at 1-based position `pos`.
    pub fn get(&self, pos: usize) -> bool {
        assert!(pos >= 1 && pos <= self.len, "position out of range");
        let b = pos - 1;
        (self.words[b >> 6] >> (63 - (b & 63))) & 1 == 1
    }

    /// Integer encoding (position 1 is the most significant bit). Requires
    /// `len <= 64`.
    pub fn encoding(&self) -> u64 {
        assert!(self.len <= 64, "encoding limited to one machine word");
        if self.len == 0 {
            0
        } else {
            self.words[0] >> (64 - self.len)
        }
    }

    /// Number of ones.
    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    /// 64 bits starting at 0-based bit offset `off`, zero-padded past the end.
    #[inline]
    fn read_word(&self, off: usize) -> u64 {
        let wi = off >> 6;
        let sh = off & 63;
        let hi = self.words.get(wi).copied().unwrap_or(0);
        if sh == 0 {
            hi
        } else {
            let lo = self.words.get(wi + 1).copied().unwrap_or(0);
            (hi << sh) | (lo >> (64 - sh))
        }
    }

    /// Substring of `count` symbols starting at 1-based `start`.
    pub fn slice(&self, start: usize, count: usize) -> BinarySeq {
        if count == 0 {
            return Self::empty();
        }
        assert!(start >= 1 && start + count - 1 <= self.len, "slice out of range");
        let mut words = Vec::with_capacity(word_count(count));
        let mut done = 0;
        while done < count {
            let take = (count - done).min(64);
            words.push(self.read_word(start - 1 + done) & high_mask(take));
            done += take;
        }
        BinarySeq { len: count, words }
    }

    /// Concatenation `self ++ other`.
    pub fn concat(&self, other: &BinarySeq) -> BinarySeq {
        if self.len == 0 {
            return other.clone();
        }
        if other.len == 0 {
            return self.clone();
        }
        let total = self.len + other.len;
        let nw = word_count(total);
        let mut words = self.words.clone();
        words.resize(nw, 0);
        let base = self.len >> 6;
        let sh = self.len & 63;
        for (t, &w) in other.words.iter().enumerate() {
            if sh == 0 {
                words[base + t] = w;
            } else {
                words[base + t] |= w >> sh;
                if base + t + 1 < nw {
                    words[base + t + 1] |= w << (64 - sh);
                }
            }
        }
        BinarySeq { len: total, words }
    }

    /// Sequence with `count` symbols removed starting at 1-based `start`.
    pub fn remove_range(&self, start: usize, count: usize) -> BinarySeq {
        assert!(start >= 1 && start + count - 1 <= self.len, "range out of range");
        let tail_start = start + count;
        self.slice(1, start - 1)
            .concat(&self.slice(tail_start, self.len + 1 - tail_start))
    }

    /// Bitwise complement.
    pub fn complement(&self) -> BinarySeq {
        let mut words: Vec<u64> = self.words.iter().map(|w| !w).collect();
        if self.len & 63 != 0 {
            if let Some(last) = words.last_mut() {
                *last &= high_mask(self.len & 63);
            }
        }
        BinarySeq {
            len: self.len,
            words,
        }
    }

    /// Hamming distance between the blocks starting at 1-based positions `p1`
    /// and `p2`, each `count` symbols long. Word-parallel.
    pub fn hamming_at(&self, p1: usize, p2: usize, count: usize) -> u64 {
        assert!(p1 >= 1 && p1 + count - 1 <= self.len, "first block out of range");
        assert!(p2 >= 1 && p2 + count - 1 <= self.len, "second block out of range");
        let mut dist = 0u64;
        let mut done = 0;
        while done < count {
            let take = (count - done).min(64);
            let x = (self.read_word(p1 - 1 + done) ^ self.read_word(p2 - 1 + done))
                & high_mask(take);
            dist += x.count_ones() as u64;
            done += take;
        }
        dist
    }

    /// Whether the two blocks are equal; early-exits on the first mismatch.
    pub fn range_eq(&self, p1: usize, p2: usize, count: usize) -> bool {
        let mut done = 0;
        while done < count {
            let take = (count - done).min(64);
            let x = (self.read_word(p1 - 1 + done) ^ self.read_word(p2 - 1 + done))
                & high_mask(take);
            if x != 0 {
                return false;
            }
            done += take;
        }
        true
    }

    /// True iff the sequence contains no exact tandem repeat. For binary
    /// sequences this holds exactly for {0, 1, 01, 10, 010, 101} and the
    /// empty sequence.
    pub fn is_square_free(&self) -> bool {
        for h in 1..=self.len / 2 {
            for i in 1..=self.len + 1 - 2 * h {
                if self.range_eq(i, i + h, h) {
                    return false;
                }
            }
        }
        true
    }

    /// The square-free root: 0 or 1 for constant sequences, otherwise the
    /// element of {01, 10, 010, 101} sharing the first and last symbols.
    pub fn root(&self) -> Result<Root> {
        if self.len == 0 {
            return Err(Error::EmptySequence);
        }
        let ones = self.count_ones();
        if ones == 0 {
            return Ok(Root::Zero);
        }
        if ones == self.len as u64 {
            return Ok(Root::One);
        }
        Ok(match (self.get(1), self.get(self.len)) {
            (false, true) => Root::ZeroOne,
            (true, false) => Root::OneZero,
            (false, false) => Root::ZeroOneZero,
            (true, true) => Root::OneZeroOne,
        })
    }

    /// All tandem β-repeats `(i, h)`, sorted by `(i, h)`. `beta = 0` yields
    /// exact repeats only.
    pub fn find_repeats(&self, beta: Beta) -> Vec<TandemRepeat> {
        let mut out = Vec::new();
        for i in 1..=self.len {
            for h in 1..=(self.len + 1 - i) / 2 {
                if self.hamming_at(i, i + h, h) <= beta.budget(h) {
                    out.push(TandemRepeat { i, h });
                }
            }
        }
        out
    }

    /// Number of distinct length-`k` substrings (linear, not cyclic).
    pub fn kmer_count(&self, k: usize) -> Result<u64> {
        if k < 1 || k > self.len {
            return Err(Error::out_of_range(
                "k",
                format!("{k} not in 1..={}", self.len),
            ));
        }
        if k <= 64 {
            let mut seen: HashSet<u64> = HashSet::new();
            for i in 1..=self.len - k + 1 {
                seen.insert(self.read_word(i - 1) & high_mask(k));
            }
            Ok(seen.len() as u64)
        } else {
            let mut seen: HashSet<BinarySeq> = HashSet::new();
            for i in 1..=self.len - k + 1 {
                seen.insert(self.slice(i, k));
            }
            Ok(seen.len() as u64)
        }
    }

    /// Distance lower bound `ceil(K(s) / (k - 1))` from the distinct k-mer
    /// count; valid for `k >= 4` because no root contains a k-mer.
    pub fn kmer_lower_bound(&self, k: usize) -> Result<u64> {
        if k < 4 {
            return Err(Error::out_of_range("k", format!("{k} < 4")));
        }
        let kmers = self.kmer_count(k)?;
        Ok(kmers.div_ceil(k as u64 - 1))
    }

    /// Distance lower bound `ceil(log2(|s| / |root(s)|))`: each duplication at
    /// most doubles the length.
    pub fn log_lower_bound(&self) -> Result<u32> {
        let root_len = self.root()?.len();
        let mut t = 0u32;
        let mut reach = root_len;
        while reach < self.len {
            reach *= 2;
            t += 1;
        }
        Ok(t)
    }

    /// Bits most-significant-first.
    pub fn iter_bits(&self) -> impl Iterator<Item = bool> + '_ {
        (1..=self.len).map(move |p| self.get(p))
    }

    /// Short printable form for diagnostics; long sequences are truncated.
    pub(crate) fn display_clipped(&self) -> String {
        if self.len <= 64 {
            self.to_string()
        } else {
            let mut s: String = self.slice(1, 61).to_string();
            s.push_str("...");
            s
        }
    }
}

/// Incremental word-wise builder for long sequences.
#[derive(Default)]
pub struct SeqBuilder {
    words: Vec<u64>,
    len: usize,
}

impl SeqBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(bits: usize) -> Self {
        SeqBuilder {
            words: Vec::with_capacity(word_count(bits)),
            len: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn push_bit(&mut self, b: bool) {
        if self.len & 63 == 0 {
            self.words.push(0);
        }
        if b {
            self.words[self.len >> 6] |= 1u64 << (63 - (self.len & 63));
        }
        self.len += 1;
    }

    pub fn push_seq(&mut self, s: &BinarySeq) {
        if s.len == 0 {
            return;
        }
        let total = self.len + s.len;
        let nw = word_count(total);
        self.words.resize(nw, 0);
        let base = self.len >> 6;
        let sh = self.len & 63;
        for (t, &w) in s.words.iter().enumerate() {
            if sh == 0 {
                self.words[base + t] = w;
            } else {
                self.words[base + t] |= w >> sh;
                if base + t + 1 < nw {
                    self.words[base + t + 1] |= w << (64 - sh);
                }
            }
        }
        self.len = total;
    }

    pub fn finish(self) -> BinarySeq {
        BinarySeq {
            len: self.len,
            words: self.words,
        }
    }
}

impl fmt::Display for BinarySeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter_bits() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BinarySeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BinarySeq({})", self.display_clipped())
    }
}

impl FromStr for BinarySeq {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut bits = Vec::with_capacity(s.len());
        for c in s.chars() {
            match c {
                '0' => bits.push(false),
                '1' => bits.push(true),
                other => {
                    return Err(Error::InvalidInput(format!(
                        "unexpected character {other:?} in sequence"
                    )))
                }
            }
        }
        Ok(BinarySeq::from_bits(bits))
    }
}

impl FromIterator<bool> for BinarySeq {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        BinarySeq::from_bits(iter)
    }
}

impl Serialize for BinarySeq {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for BinarySeq {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The six binary square-free roots.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Root {
    Zero,
    One,
    ZeroOne,
    OneZero,
    ZeroOneZero,
    OneZeroOne,
}

impl Root {
    pub const ALL: [Root; 6] = [
        Root::Zero,
        Root::One,
        Root::ZeroOne,
        Root::OneZero,
        Root::ZeroOneZero,
        Root::OneZeroOne,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Root::Zero => "0",
            Root::One => "1",
            Root::ZeroOne => "01",
            Root::OneZero => "10",
            Root::ZeroOneZero => "010",
            Root::OneZeroOne => "101",
        }
    }

    pub fn seq(&self) -> BinarySeq {
        self.as_str().parse().expect("root literals are valid")
    }

    pub fn len(&self) -> usize {
        self.as_str().len()
    }
}

impl fmt::Display for Root {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Root {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Root::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("{s:?} is not a square-free root")))
    }
}

/// Mismatch fraction for approximate repeats, kept as an exact rational so
/// that the budget `floor(beta * h)` is computed exactly even when `beta * h`
/// is integral (e.g. beta = 3/5, h = 410).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Beta {
    num: u32,
    den: u32,
}

impl Beta {
    pub const ZERO: Beta = Beta { num: 0, den: 1 };

    /// `num / den`, required to lie in `[0, 1)`.
    pub fn new(num: u32, den: u32) -> Result<Self> {
        if den == 0 {
            return Err(Error::InvalidInput("beta denominator is zero".into()));
        }
        if num >= den {
            return Err(Error::InvalidInput(format!(
                "beta = {num}/{den} is not in [0, 1)"
            )));
        }
        if num == 0 {
            return Ok(Beta::ZERO);
        }
        let g = gcd(num, den);
        Ok(Beta {
            num: num / g,
            den: den / g,
        })
    }

    /// Mismatch budget `floor(beta * h)` for a block of length `h`.
    pub fn budget(&self, h: usize) -> u64 {
        (self.num as u128 * h as u128 / self.den as u128) as u64
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    /// Whether `beta > 1/2`.
    pub fn gt_half(&self) -> bool {
        2 * self.num as u64 > self.den as u64
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn numer(&self) -> u32 {
        self.num
    }

    pub fn denom(&self) -> u32 {
        self.den
    }

    /// Recover a small exact rational from a float (continued fractions,
    /// denominator capped at 10^6, absolute tolerance 1e-9). This is how
    /// betas round-trip through JSON numbers.
    pub fn from_f64(x: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&x) {
            return Err(Error::InvalidInput(format!("beta = {x} is not in [0, 1)")));
        }
        if x == 0.0 {
            return Ok(Beta::ZERO);
        }
        let (mut p0, mut q0, mut p1, mut q1) = (1i64, 0i64, 0i64, 1i64);
        let mut v = x;
        for _ in 0..64 {
            let a = v.floor();
            let ai = a as i64;
            let p2 = ai * p1 + p0;
            let q2 = ai * q1 + q0;
            if q2 > 1_000_000 {
                break;
            }
            p0 = p1;
            q0 = q1;
            p1 = p2;
            q1 = q2;
            if q1 > 0 && (p1 as f64 / q1 as f64 - x).abs() <= 1e-9 {
                return Beta::new(p1 as u32, q1 as u32);
            }
            let frac = v - a;
            if frac < 1e-12 {
                break;
            }
            v = 1.0 / frac;
        }
        Err(Error::InvalidInput(format!(
            "beta = {x} has no small rational form"
        )))
    }
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl PartialOrd for Beta {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(Ord::cmp(
            &(self.num as u64 * other.den as u64),
            &(other.num as u64 * self.den as u64),
        ))
    }
}

impl fmt::Display for Beta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

impl FromStr for Beta {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some((p, q)) = s.split_once('/') {
            let num: u32 = p
                .trim()
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad beta numerator {p:?}")))?;
            let den: u32 = q
                .trim()
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad beta denominator {q:?}")))?;
            return Beta::new(num, den);
        }
        let (whole, frac) = match s.split_once('.') {
            Some((w, f)) => (w, f),
            None => (s, ""),
        };
        let whole: u64 = if whole.is_empty() {
            0
        } else {
            whole
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad beta {s:?}")))?
        };
        if frac.len() > 9 || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(Error::InvalidInput(format!("bad beta {s:?}")));
        }
        let den = 10u64.pow(frac.len() as u32);
        let num = whole * den + if frac.is_empty() { 0 } else { frac.parse::<u64>().unwrap() };
        if num >= den && num != 0 {
            return Err(Error::InvalidInput(format!("beta = {s} is not in [0, 1)")));
        }
        let g = gcd_u64(num.max(1), den);
        Beta::new((num / g) as u32, (den / g) as u32)
    }
}

fn gcd_u64(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Serialize for Beta {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.value())
    }
}

impl<'de> Deserialize<'de> for Beta {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let x = f64::deserialize(deserializer)?;
        Beta::from_f64(x).map_err(serde::de::Error::custom)
    }
}

/// A tandem repeat: first block starts at `i` (1-based), both blocks have
/// length `h`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TandemRepeat {
    pub i: usize,
    pub h: usize,
}

/// Which block of the repeat survives a deduplication. The two choices agree
/// for exact repeats but differ for β-repeats.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KeepSide {
    #[default]
    First,
    Second,
}

/// One deduplication step `(i, h, keep)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DedupStep {
    pub i: usize,
    pub h: usize,
    #[serde(default)]
    pub keep: KeepSide,
}

impl DedupStep {
    pub fn new(i: usize, h: usize) -> Self {
        DedupStep {
            i,
            h,
            keep: KeepSide::First,
        }
    }
}

/// Insert a copy of `s[i..i+h-1]` immediately after position `i+h-1`.
pub fn apply_dup(s: &BinarySeq, i: usize, h: usize) -> Result<BinarySeq> {
    if i < 1 || h < 1 || i + h - 1 > s.len() {
        return Err(Error::StepOutOfRange { i, h, len: s.len() });
    }
    let prefix = s.slice(1, i + h - 1);
    let block = s.slice(i, h);
    let suffix = s.slice(i + h, s.len() - (i + h) + 1);
    Ok(prefix.concat(&block).concat(&suffix))
}

/// Remove the non-kept block of the β-repeat at `(step.i, step.h)`.
pub fn apply_dedup(s: &BinarySeq, step: &DedupStep, beta: Beta) -> Result<BinarySeq> {
    apply_dedup_budgeted(s, step, beta.budget(step.h))
}

/// Like [`apply_dedup`] but with an explicit mismatch budget, for repeat
/// models whose budget is not a fixed fraction of `h`.
pub fn apply_dedup_budgeted(s: &BinarySeq, step: &DedupStep, budget: u64) -> Result<BinarySeq> {
    let (i, h) = (step.i, step.h);
    if i < 1 || h < 1 || i + 2 * h - 1 > s.len() {
        return Err(Error::StepOutOfRange { i, h, len: s.len() });
    }
    let observed = s.hamming_at(i, i + h, h);
    if observed > budget {
        return Err(Error::InapplicableStep {
            i,
            h,
            observed,
            budget,
        });
    }
    Ok(match step.keep {
        KeepSide::First => s.remove_range(i + h, h),
        KeepSide::Second => s.remove_range(i, h),
    })
}

/// Apply `steps` in order starting from `original`, validating each against
/// the per-length mismatch budget. The first invalid step is reported with
/// its index.
pub fn validate_steps(
    original: &BinarySeq,
    steps: &[DedupStep],
    budget: impl Fn(usize) -> u64,
) -> Result<BinarySeq> {
    let mut cur = original.clone();
    for (index, step) in steps.iter().enumerate() {
        cur = apply_dedup_budgeted(&cur, step, budget(step.h)).map_err(|e| {
            Error::ProcessStep {
                index,
                source: Box::new(e),
            }
        })?;
    }
    Ok(cur)
}

/// A replayable deduplication process from `original` down to the square-free
/// `final_seq`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DedupProcess {
    pub original: BinarySeq,
    pub beta: Beta,
    pub steps: Vec<DedupStep>,
    #[serde(rename = "final")]
    pub final_seq: BinarySeq,
}

impl DedupProcess {
    /// Build a process by replaying `steps` from `original`; fails if any step
    /// is invalid or the end sequence is not square-free.
    pub fn new(original: BinarySeq, beta: Beta, steps: Vec<DedupStep>) -> Result<Self> {
        let final_seq = validate_steps(&original, &steps, |h| beta.budget(h))?;
        if !final_seq.is_square_free() {
            return Err(Error::FinalNotSquareFree(final_seq.display_clipped()));
        }
        Ok(DedupProcess {
            original,
            beta,
            steps,
            final_seq,
        })
    }

    /// Replay all steps, checking each one, the recorded final sequence, and
    /// its square-freeness.
    pub fn replay(&self) -> Result<BinarySeq> {
        let got = validate_steps(&self.original, &self.steps, |h| self.beta.budget(h))?;
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

    pub fn is_normal(&self) -> bool {
        is_normal(&self.steps)
    }

    /// An equivalent normal process: same length, same endpoints, and every
    /// leftward index jump satisfies `i_{t+1} + 2 h_{t+1} >= i_t`.
    ///
    /// Adjacent violating steps are swapped as `(i_{t+1}, h_{t+1})` then
    /// `(i_t - h_{t+1}, h_t)`; each swap lowers the index sum by at least one,
    /// so the scan terminates. Scan passes are capped at (step count)^2 as a
    /// divergence guard, and the result is re-validated by replay.
    pub fn normalized(&self) -> Result<Self> {
        if !self.beta.is_zero() {
            return Err(Error::InvalidInput(
                "normalization is defined for exact processes only".into(),
            ));
        }
        self.replay()?;
        let mut steps = self.steps.clone();
        let f = steps.len();
        let max_passes = f * f + 1;
        let mut passes = 0;
        loop {
            if passes >= max_passes {
                return Err(Error::NormalizationDiverged(max_passes));
            }
            passes += 1;
            let mut swapped = false;
            for t in 0..steps.len().saturating_sub(1) {
                let (a, b) = (steps[t], steps[t + 1]);
                if b.i < a.i && b.i + 2 * b.h < a.i {
                    steps[t] = b;
                    steps[t + 1] = DedupStep {
                        i: a.i - b.h,
                        h: a.h,
                        keep: a.keep,
                    };
                    swapped = true;
                }
            }
            if !swapped {
                break;
            }
        }
        let out = DedupProcess {
            original: self.original.clone(),
            beta: Beta::ZERO,
            steps,
            final_seq: self.final_seq.clone(),
        };
        out.replay()?;
        if !out.is_normal() {
            return Err(Error::Internal(
                "normalization finished on a non-normal process".into(),
            ));
        }
        Ok(out)
    }
}

/// Normality predicate: any leftward jump `i_{t+1} < i_t` must satisfy
/// `i_{t+1} + 2 h_{t+1} >= i_t`.
pub fn is_normal(steps: &[DedupStep]) -> bool {
    steps
        .windows(2)
        .all(|w| w[1].i >= w[0].i || w[1].i + 2 * w[1].h >= w[0].i)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(s: &str) -> BinarySeq {
        s.parse().unwrap()
    }

    #[test]
    fn roundtrip_and_encoding() {
        let s = seq("1001011");
        assert_eq!(s.len(), 7);
        assert_eq!(s.to_string(), "1001011");
        assert_eq!(s.encoding(), 0b1001011);
        assert_eq!(BinarySeq::from_value(0b1001011, 7), s);
        assert!(s.get(1));
        assert!(!s.get(2));
        assert!(s.get(7));
    }

    #[test]
    fn roots() {
        assert_eq!(seq("1001011").root().unwrap(), Root::OneZeroOne);
        assert_eq!(seq("0000").root().unwrap(), Root::Zero);
        assert_eq!(seq("01").root().unwrap(), Root::ZeroOne);
        assert_eq!(seq("0110").root().unwrap(), Root::ZeroOneZero);
        assert!(BinarySeq::empty().root().is_err());
    }

    #[test]
    fn square_free_set() {
        for n in 1..=12usize {
            for v in 0..(1u64 << n) {
                let s = BinarySeq::from_value(v, n);
                let in_set = Root::ALL.iter().any(|r| r.seq() == s);
                assert_eq!(s.is_square_free(), in_set, "n={n} v={v:b}");
            }
        }
    }

    #[test]
    fn find_repeats_examples() {
        assert_eq!(
            seq("0110").find_repeats(Beta::ZERO),
            vec![TandemRepeat { i: 2, h: 1 }]
        );
        assert_eq!(
            seq("0101").find_repeats(Beta::ZERO),
            vec![TandemRepeat { i: 1, h: 2 }]
        );
        // h = 2 blocks "01" and "10" are at distance 2 > floor(0.5 * 2) = 1,
        // so only the exact h = 1 repeat qualifies.
        assert_eq!(
            seq("0110").find_repeats(Beta::new(1, 2).unwrap()),
            vec![TandemRepeat { i: 2, h: 1 }]
        );
    }

    #[test]
    fn beta_budget_is_exact_at_integral_boundaries() {
        let b = Beta::new(3, 5).unwrap();
        assert_eq!(b.budget(410), 246);
        assert_eq!(b.budget(82), 49);
        assert_eq!(Beta::new(1, 2).unwrap().budget(2), 1);
        assert_eq!(Beta::ZERO.budget(1000), 0);
    }

    #[test]
    fn beta_parse_and_float_roundtrip() {
        assert_eq!("0.6".parse::<Beta>().unwrap(), Beta::new(3, 5).unwrap());
        assert_eq!("0.25".parse::<Beta>().unwrap(), Beta::new(1, 4).unwrap());
        assert_eq!("1/3".parse::<Beta>().unwrap(), Beta::new(1, 3).unwrap());
        assert_eq!("0".parse::<Beta>().unwrap(), Beta::ZERO);
        assert!("1".parse::<Beta>().is_err());
        for b in [
            Beta::ZERO,
            Beta::new(1, 4).unwrap(),
            Beta::new(1, 2).unwrap(),
            Beta::new(3, 5).unwrap(),
            Beta::new(3, 4).unwrap(),
            Beta::new(1, 3).unwrap(),
        ] {
            assert_eq!(Beta::from_f64(b.value()).unwrap(), b);
        }
    }

    #[test]
    fn dedup_examples() {
        let got = apply_dedup(&seq("1001011"), &DedupStep::new(2, 1), Beta::ZERO).unwrap();
        assert_eq!(got, seq("101011"));
        let got = apply_dedup(&seq("0101"), &DedupStep::new(1, 2), Beta::ZERO).unwrap();
        assert_eq!(got, seq("01"));
        // blocks "011" and "010" at distance 1 <= floor(3 * 1/3) = 1
        let step = DedupStep {
            i: 1,
            h: 3,
            keep: KeepSide::Second,
        };
        let got = apply_dedup(&seq("011010"), &step, Beta::new(1, 3).unwrap()).unwrap();
        assert_eq!(got, seq("010"));
        // inapplicable step reports the observed distance
        let err = apply_dedup(&seq("0110"), &DedupStep::new(1, 2), Beta::ZERO).unwrap_err();
        match err {
            Error::InapplicableStep { i: 1, h: 2, observed: 2, budget: 0 } => {}
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn dup_examples() {
        assert_eq!(apply_dup(&seq("101"), 1, 2).unwrap(), seq("10101"));
        assert_eq!(apply_dup(&seq("0"), 1, 1).unwrap(), seq("00"));
        // duplicating the single symbol at position 4 copies the "0"
        assert_eq!(apply_dup(&seq("10101"), 4, 1).unwrap(), seq("101001"));
        assert!(apply_dup(&seq("101"), 3, 2).is_err());
    }

    #[test]
    fn dup_dedup_inversion() {
        let s = seq("1001011");
        for i in 1..=s.len() {
            for h in 1..=(s.len() - i + 1) {
                let up = apply_dup(&s, i, h).unwrap();
                let down = apply_dedup(&up, &DedupStep::new(i, h), Beta::ZERO).unwrap();
                assert_eq!(down, s);
            }
        }
    }

    #[test]
    fn replay_examples() {
        let p = DedupProcess::new(
            seq("1001011"),
            Beta::ZERO,
            vec![DedupStep::new(2, 1), DedupStep::new(5, 1), DedupStep::new(1, 2)],
        )
        .unwrap();
        assert_eq!(p.final_seq, seq("101"));
        assert_eq!(p.replay().unwrap(), seq("101"));

        let p = DedupProcess::new(seq("10"), Beta::ZERO, vec![]).unwrap();
        assert_eq!(p.replay().unwrap(), seq("10"));

        let p = DedupProcess::new(
            seq("0000"),
            Beta::ZERO,
            vec![DedupStep::new(1, 2), DedupStep::new(1, 1)],
        )
        .unwrap();
        assert_eq!(p.final_seq, seq("0"));

        // invalid steps carry their index
        let bad = DedupProcess {
            original: seq("0000"),
            beta: Beta::ZERO,
            steps: vec![DedupStep::new(1, 2), DedupStep::new(3, 1)],
            final_seq: seq("0"),
        };
        match bad.replay().unwrap_err() {
            Error::ProcessStep { index: 1, .. } => {}
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn process_json_schema() {
        let p = DedupProcess::new(
            seq("1001011"),
            Beta::ZERO,
            vec![DedupStep::new(2, 1), DedupStep::new(5, 1), DedupStep::new(1, 2)],
        )
        .unwrap();
        let js = serde_json::to_value(&p).unwrap();
        assert_eq!(js["original"], "1001011");
        assert_eq!(js["beta"], 0.0);
        assert_eq!(js["final"], "101");
        assert_eq!(js["steps"][0]["i"], 2);
        assert_eq!(js["steps"][0]["h"], 1);
        assert_eq!(js["steps"][0]["keep"], "first");
        let back: DedupProcess = serde_json::from_value(js).unwrap();
        assert_eq!(back, p);
        // keep defaults to "first" when absent
        let raw = r#"{"original":"0101","beta":0,"steps":[{"i":1,"h":2}],"final":"01"}"#;
        let q: DedupProcess = serde_json::from_str(raw).unwrap();
        assert!(q.replay().is_ok());
    }

    #[test]
    fn normalize_swaps_disjoint_steps() {
        // On 0^10: first remove (7,2), then (1,2) whose window [1,4] lies
        // fully left of index 7 -> must swap to (1,2), (5,2).
        let p = DedupProcess::new(
            BinarySeq::zeros(10),
            Beta::ZERO,
            vec![
                DedupStep::new(7, 2),
                DedupStep::new(1, 2),
                DedupStep::new(1, 2),
                DedupStep::new(1, 1),
                DedupStep::new(1, 1),
                DedupStep::new(1, 1),
            ],
        )
        .unwrap();
        assert!(!p.is_normal());
        let q = p.normalized().unwrap();
        assert!(q.is_normal());
        assert_eq!(q.steps.len(), p.steps.len());
        assert_eq!(q.original, p.original);
        assert_eq!(q.final_seq, p.final_seq);
        assert_eq!(q.steps[0], DedupStep::new(1, 2));
        assert_eq!(q.steps[1], DedupStep::new(5, 2));
        // already-normal processes come back unchanged
        let r = q.normalized().unwrap();
        assert_eq!(r.steps, q.steps);
    }

    #[test]
    fn kmer_examples() {
        assert_eq!(seq("00010111").kmer_count(3).unwrap(), 6);
        assert_eq!(seq("0000").kmer_count(2).unwrap(), 1);
        assert_eq!(seq("01").kmer_count(2).unwrap(), 1);
        assert_eq!(seq("00010111").kmer_lower_bound(4).unwrap(), 2);
        assert!(seq("011").kmer_lower_bound(4).is_err());
        assert!(seq("0110").kmer_lower_bound(3).is_err());
    }

    #[test]
    fn log_lower_bound_examples() {
        assert_eq!(seq("00000000").log_lower_bound().unwrap(), 3);
        assert_eq!(seq("1001011").log_lower_bound().unwrap(), 2);
        assert_eq!(seq("10").log_lower_bound().unwrap(), 0);
    }

    #[test]
    fn slicing_across_words() {
        let s = BinarySeq::from_bits((0..200).map(|i| i % 3 == 0));
        let t = s.slice(60, 70);
        for p in 1..=70 {
            assert_eq!(t.get(p), s.get(59 + p));
        }
        let u = s.slice(1, 59).concat(&s.slice(60, 141));
        assert_eq!(u, s);
        assert_eq!(s.complement().complement(), s);
        assert_eq!(s.hamming_at(1, 1, 200 - 0), 0);
    }
}
