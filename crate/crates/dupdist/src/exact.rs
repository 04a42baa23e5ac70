//! Exact distance computation.
//!
//! The distance table is a graded dynamic program: a duplication strictly
//! increases length, so the distance of a length-L sequence depends only on
//! levels below L. Each level is a flat nibble-packed array indexed by the
//! integer encoding of the sequence, which is also the on-disk order.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU32, Ordering};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::seq::{apply_dedup, Beta, BinarySeq, DedupProcess, DedupStep, Root};

const CACHE_MAGIC: [u8; 4] = *b"DDR1";
const CACHE_VERSION: u8 = 0x01;

/// Hard cap on table sizes: 4-bit cells hold distances up to 15, which covers
/// all lengths up to 32.
pub const TABLE_MAX_N: usize = 32;

/// Length cap for the independent memoized oracle.
pub const ORACLE_CAP: usize = 14;

/// Length cap for [`parallel_distance`].
pub const PARALLEL_CAP: usize = 16;

/// Configuration for table construction.
#[derive(Clone, Debug)]
pub struct SearchConfig {
    pub max_n: usize,
    /// 0 means "use the global thread pool".
    pub worker_count: usize,
    pub cache_path: Option<PathBuf>,
}

impl SearchConfig {
    pub fn new(max_n: usize) -> Result<Self> {
        if !(3..=TABLE_MAX_N).contains(&max_n) {
            return Err(Error::out_of_range(
                "max_n",
                format!("{max_n} not in 3..={TABLE_MAX_N}"),
            ));
        }
        Ok(SearchConfig {
            max_n,
            worker_count: 0,
            cache_path: None,
        })
    }

    pub fn with_workers(mut self, worker_count: usize) -> Self {
        self.worker_count = worker_count;
        self
    }

    pub fn with_cache(mut self, path: impl Into<PathBuf>) -> Self {
        self.cache_path = Some(path.into());
        self
    }
}

/// Exact distances for every binary sequence of length 1..=max_n, one nibble
/// per sequence.
pub struct DistanceTable {
    max_n: usize,
    levels: Vec<Vec<u8>>,
}

#[inline]
pub(crate) fn low_mask(bits: usize) -> u64 {
    debug_assert!(bits < 64);
    (1u64 << bits) - 1
}

/// Bit `b` of the result is set iff bits `b..b+h` of `y` are all ones.
#[inline]
fn windows_all_ones(y: u64, h: usize) -> u64 {
    let mut r = y;
    let mut got = 1;
    while got < h {
        let step = got.min(h - got);
        r &= r >> step;
        got += step;
    }
    r
}

#[inline]
fn level_get(level: &[u8], v: u64) -> u8 {
    let byte = level[(v >> 1) as usize];
    if v & 1 == 0 {
        byte & 0x0F
    } else {
        byte >> 4
    }
}

/// Exact repeats of the sequence encoded as `(len, v)`, as `(i, h)` pairs via
/// bit tricks: the repeat at `(i, h)` corresponds to an all-zero window of
/// `v ^ (v >> h)` starting at bit `len - i - 2h + 1`.
fn for_each_repeat_encoded(len: usize, v: u64, mut f: impl FnMut(usize, usize, u64) -> bool) {
    for h in 1..=len / 2 {
        let e = v ^ (v >> h);
        let mut w = windows_all_ones(!e, h) & low_mask(len - 2 * h + 1);
        while w != 0 {
            let b = w.trailing_zeros() as usize;
            w &= w - 1;
            let i = len - 2 * h + 1 - b;
            let child = ((v >> (b + h)) << b) | (v & low_mask(b));
            if !f(i, h, child) {
                return;
            }
        }
    }
}

pub(crate) fn square_free_encoded(len: usize, v: u64) -> bool {
    for h in 1..=len / 2 {
        let e = v ^ (v >> h);
        if windows_all_ones(!e, h) & low_mask(len - 2 * h + 1) != 0 {
            return false;
        }
    }
    true
}

fn root_of_encoded(len: usize, v: u64) -> Root {
    if v == 0 {
        Root::Zero
    } else if len < 64 && v == low_mask(len) {
        Root::One
    } else {
        match ((v >> (len - 1)) & 1, v & 1) {
            (0, 1) => Root::ZeroOne,
            (1, 0) => Root::OneZero,
            (0, 0) => Root::ZeroOneZero,
            _ => Root::OneZeroOne,
        }
    }
}

/// Distance entry for one sequence: 0 when square-free, else 1 + the minimum
/// over all exact dedup results (which live on strictly lower levels).
fn dist_entry(len: usize, v: u64, lower: &[Vec<u8>]) -> u32 {
    let mut best = u32::MAX;
    for_each_repeat_encoded(len, v, |_i, h, child| {
        let d = level_get(&lower[len - h - 1], child) as u32 + 1;
        if d < best {
            best = d;
        }
        best > 1
    });
    if best == u32::MAX {
        0
    } else {
        best
    }
}

const LEVEL_CHUNK: usize = 1 << 12;

fn build_level(len: usize, lower: &[Vec<u8>]) -> Result<Vec<u8>> {
    let bytes = 1usize << (len - 1);
    let mut arr = vec![0u8; bytes];
    let overflow = AtomicU32::new(0);
    let compute = |byte_idx: usize| -> u8 {
        let v0 = (byte_idx as u64) << 1;
        let mut nibbles = [0u8; 2];
        for (t, nib) in nibbles.iter_mut().enumerate() {
            let d = dist_entry(len, v0 + t as u64, lower);
            if d > 15 {
                overflow.store(d, Ordering::Relaxed);
                *nib = 15;
            } else {
                *nib = d as u8;
            }
        }
        nibbles[0] | (nibbles[1] << 4)
    };
    if bytes <= LEVEL_CHUNK {
        for (idx, b) in arr.iter_mut().enumerate() {
            *b = compute(idx);
        }
    } else {
        arr.par_chunks_mut(LEVEL_CHUNK)
            .enumerate()
            .for_each(|(ci, chunk)| {
                for (off, b) in chunk.iter_mut().enumerate() {
                    *b = compute(ci * LEVEL_CHUNK + off);
                }
            });
    }
    let ov = overflow.load(Ordering::Relaxed);
    if ov != 0 {
        return Err(Error::CellOverflow { value: ov });
    }
    Ok(arr)
}

fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    if workers == 0 {
        f()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
        pool.install(f)
    }
}

/// Outcome of [`load_or_build`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CacheStatus {
    /// Built from scratch (and saved, when a cache path was given).
    Fresh,
    /// Loaded from an intact cache file.
    Loaded,
    /// The cache file was unusable and the table was rebuilt.
    RebuiltCorrupt(String),
}

/// Build the table, honoring the cache path in `cfg` when present. Corrupt or
/// undersized cache files trigger a rebuild.
pub fn load_or_build(cfg: &SearchConfig) -> Result<(DistanceTable, CacheStatus)> {
    let Some(path) = cfg.cache_path.clone() else {
        return Ok((DistanceTable::build(cfg)?, CacheStatus::Fresh));
    };
    if path.exists() {
        match DistanceTable::load(&path) {
            Ok(t) if t.max_n >= cfg.max_n => return Ok((t, CacheStatus::Loaded)),
            Ok(_) => {
                let t = DistanceTable::build(cfg)?;
                t.save(&path)?;
                return Ok((t, CacheStatus::Fresh));
            }
            Err(e) => {
                let t = DistanceTable::build(cfg)?;
                t.save(&path)?;
                return Ok((t, CacheStatus::RebuiltCorrupt(e.to_string())));
            }
        }
    }
    let t = DistanceTable::build(cfg)?;
    t.save(&path)?;
    Ok((t, CacheStatus::Fresh))
}

impl DistanceTable {
    /// Compute distances for every sequence of length 1..=max_n, by
    /// increasing length. Levels are partitioned across workers; entries of
    /// level L read only frozen lower levels, so any worker count produces
    /// bit-identical tables.
    pub fn build(cfg: &SearchConfig) -> Result<Self> {
        if !(3..=TABLE_MAX_N).contains(&cfg.max_n) {
            return Err(Error::out_of_range(
                "max_n",
                format!("{} not in 3..={TABLE_MAX_N}", cfg.max_n),
            ));
        }
        let max_n = cfg.max_n;
        let levels = with_pool(cfg.worker_count, move || {
            let mut levels: Vec<Vec<u8>> = Vec::with_capacity(max_n);
            for len in 1..=max_n {
                let level = build_level(len, &levels)?;
                levels.push(level);
            }
            Ok(levels)
        })?;
        Ok(DistanceTable { max_n, levels })
    }

    pub fn max_n(&self) -> usize {
        self.max_n
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n < 1 || n > self.max_n {
            return Err(Error::out_of_range(
                "n",
                format!("{n} not in 1..={}", self.max_n),
            ));
        }
        Ok(())
    }

    #[inline]
    fn level_value(&self, len: usize, v: u64) -> u8 {
        level_get(&self.levels[len - 1], v)
    }

    /// Distance of the sequence of length `len` with integer encoding `value`.
    pub fn get(&self, len: usize, value: u64) -> Result<u8> {
        self.check_len(len)?;
        if len < 64 && value >> len != 0 {
            return Err(Error::out_of_range(
                "value",
                format!("{value} does not encode a length-{len} sequence"),
            ));
        }
        Ok(self.level_value(len, value))
    }

    /// Exact duplication distance from `root(s)` to `s`.
    pub fn f_of_seq(&self, s: &BinarySeq) -> Result<u8> {
        if s.is_empty() {
            return Err(Error::EmptySequence);
        }
        self.check_len(s.len())?;
        Ok(self.level_value(s.len(), s.encoding()))
    }

    /// `f(n)`: maximum distance over all length-`n` sequences.
    pub fn f_n(&self, n: usize) -> Result<u8> {
        self.check_len(n)?;
        let level = &self.levels[n - 1];
        let fold = |&b: &u8| (b & 15).max(b >> 4);
        let max = if level.len() > (1 << 16) {
            level.par_iter().map(fold).max()
        } else {
            level.iter().map(fold).max()
        };
        Ok(max.expect("levels are non-empty"))
    }

    /// `f_sigma(n)`: maximum distance over length-`n` sequences with root
    /// `sigma`; `None` when no such sequence exists.
    pub fn f_sigma_n(&self, n: usize, sigma: Root) -> Result<Option<u8>> {
        self.check_len(n)?;
        let level = &self.levels[n - 1];
        let scan = |(base, chunk): (usize, &[u8])| -> Option<u8> {
            let mut best: Option<u8> = None;
            for (off, &byte) in chunk.iter().enumerate() {
                let v0 = ((base * LEVEL_CHUNK + off) as u64) << 1;
                for (v, d) in [(v0, byte & 15), (v0 + 1, byte >> 4)] {
                    if root_of_encoded(n, v) == sigma {
                        best = Some(best.map_or(d, |b| b.max(d)));
                    }
                }
            }
            best
        };
        let combine = |a: Option<u8>, b: Option<u8>| match (a, b) {
            (Some(x), Some(y)) => Some(x.max(y)),
            (x, None) => x,
            (None, y) => y,
        };
        let best = if level.len() > (1 << 16) {
            level
                .par_chunks(LEVEL_CHUNK)
                .enumerate()
                .map(scan)
                .reduce(|| None, combine)
        } else {
            level
                .chunks(LEVEL_CHUNK)
                .enumerate()
                .map(scan)
                .fold(None, combine)
        };
        Ok(best)
    }

    /// A witness process of optimal length for `s`. Ties among minimizing
    /// dedups are broken by the lexicographically smallest `(i, h)`.
    pub fn shortest_process(&self, s: &BinarySeq) -> Result<DedupProcess> {
        if s.is_empty() {
            return Err(Error::EmptySequence);
        }
        self.check_len(s.len())?;
        let mut cur_len = s.len();
        let mut cur_v = s.encoding();
        let mut d = self.level_value(cur_len, cur_v);
        let mut steps = Vec::with_capacity(d as usize);
        while d > 0 {
            let mut chosen: Option<(usize, usize, u64)> = None;
            for_each_repeat_encoded(cur_len, cur_v, |i, h, child| {
                if self.level_value(cur_len - h, child) + 1 == d {
                    let better = match chosen {
                        None => true,
                        Some((ci, ch, _)) => (i, h) < (ci, ch),
                    };
                    if better {
                        chosen = Some((i, h, child));
                    }
                }
                true
            });
            let (i, h, child) =
                chosen.ok_or_else(|| Error::Internal("graded table lost a minimizer".into()))?;
            steps.push(DedupStep::new(i, h));
            cur_len -= h;
            cur_v = child;
            d -= 1;
        }
        DedupProcess::new(s.clone(), Beta::ZERO, steps)
    }

    /// Serialize: magic "DDR1", version 0x01, max_n as 4-byte little-endian,
    /// then for each length a block of nibble-packed distances (even encoding
    /// in the low nibble).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(&CACHE_MAGIC)?;
        w.write_all(&[CACHE_VERSION])?;
        w.write_all(&(self.max_n as u32).to_le_bytes())?;
        for level in &self.levels {
            w.write_all(level)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let data = std::fs::read(path)?;
        if data.len() < 9 {
            return Err(Error::Cache("file too short".into()));
        }
        if data[0..4] != CACHE_MAGIC {
            return Err(Error::Cache("bad magic bytes".into()));
        }
        if data[4] != CACHE_VERSION {
            return Err(Error::Cache(format!("unsupported version {}", data[4])));
        }
        let max_n = u32::from_le_bytes(data[5..9].try_into().unwrap()) as usize;
        if !(3..=TABLE_MAX_N).contains(&max_n) {
            return Err(Error::Cache(format!("implausible max_n {max_n}")));
        }
        let expected: usize = 9 + ((1usize << max_n) - 1);
        if data.len() != expected {
            return Err(Error::Cache(format!(
                "expected {expected} bytes, found {}",
                data.len()
            )));
        }
        let mut levels = Vec::with_capacity(max_n);
        let mut at = 9;
        for len in 1..=max_n {
            let sz = 1usize << (len - 1);
            levels.push(data[at..at + sz].to_vec());
            at += sz;
        }
        Ok(DistanceTable { max_n, levels })
    }

    /// Raw level bytes, used to compare tables bit-for-bit.
    pub fn level_bytes(&self, n: usize) -> Result<&[u8]> {
        self.check_len(n)?;
        Ok(&self.levels[n - 1])
    }
}

/// `f(n, m)` for every `n` in `m+1..=cfg.max_n` in one graded sweep:
/// the per-sequence value is 0 once the length is at most `m`, else
/// 1 + the minimum over exact dedups.
pub fn f_n_m_column(cfg: &SearchConfig, m: usize) -> Result<Vec<u8>> {
    if m < 3 || m >= cfg.max_n || cfg.max_n > TABLE_MAX_N {
        return Err(Error::out_of_range(
            "m",
            format!("need 3 <= m < max_n <= {TABLE_MAX_N}, got m={m}, max_n={}", cfg.max_n),
        ));
    }
    let (m, max_n) = (m, cfg.max_n);
    with_pool(cfg.worker_count, move || {
        let mut glevels: Vec<Vec<u8>> = Vec::with_capacity(max_n - m);
        let mut out = Vec::with_capacity(max_n - m);
        for len in m + 1..=max_n {
            let bytes = 1usize << (len - 1);
            let mut arr = vec![0u8; bytes];
            let overflow = AtomicU32::new(0);
            let compute = |byte_idx: usize| -> u8 {
                let v0 = (byte_idx as u64) << 1;
                let mut nibbles = [0u8; 2];
                for (t, nib) in nibbles.iter_mut().enumerate() {
                    let mut best = u32::MAX;
                    for_each_repeat_encoded(len, v0 + t as u64, |_i, h, child| {
                        let d = if len - h <= m {
                            1
                        } else {
                            level_get(&glevels[len - h - m - 1], child) as u32 + 1
                        };
                        if d < best {
                            best = d;
                        }
                        best > 1
                    });
                    // every binary sequence of length >= 4 contains a repeat
                    debug_assert!(best != u32::MAX);
                    if best > 15 {
                        overflow.store(best, Ordering::Relaxed);
                        best = 15;
                    }
                    *nib = best as u8;
                }
                nibbles[0] | (nibbles[1] << 4)
            };
            if bytes <= LEVEL_CHUNK {
                for (idx, b) in arr.iter_mut().enumerate() {
                    *b = compute(idx);
                }
            } else {
                arr.par_chunks_mut(LEVEL_CHUNK)
                    .enumerate()
                    .for_each(|(ci, chunk)| {
                        for (off, b) in chunk.iter_mut().enumerate() {
                            *b = compute(ci * LEVEL_CHUNK + off);
                        }
                    });
            }
            let ov = overflow.load(Ordering::Relaxed);
            if ov != 0 {
                return Err(Error::CellOverflow { value: ov });
            }
            let fold = |&b: &u8| (b & 15).max(b >> 4);
            let max = if arr.len() > (1 << 16) {
                arr.par_iter().map(fold).max()
            } else {
                arr.iter().map(fold).max()
            };
            out.push(max.unwrap_or(0));
            glevels.push(arr);
        }
        Ok(out)
    })
}

/// `f(n, m)`: the least k such that every length-`n` sequence reaches length
/// at most `m` within k dedups.
pub fn f_n_m(cfg: &SearchConfig, n: usize, m: usize) -> Result<u8> {
    if !(3..=TABLE_MAX_N).contains(&n) || n > cfg.max_n || m >= n || m < 3 {
        return Err(Error::out_of_range(
            "(n, m)",
            format!("need 3 <= m < n <= max_n, got n={n}, m={m}"),
        ));
    }
    let col_cfg = SearchConfig {
        max_n: n,
        worker_count: cfg.worker_count,
        cache_path: None,
    };
    let col = f_n_m_column(&col_cfg, m)?;
    Ok(col[n - m - 1])
}

/// Memoized search for the parallel duplication distance: one step applies a
/// non-empty set of pairwise non-overlapping exact dedups at once.
pub struct ParallelSearch {
    memo: HashMap<u32, u32>,
}

impl ParallelSearch {
    pub fn new() -> Self {
        ParallelSearch {
            memo: HashMap::new(),
        }
    }

    pub fn distance(&mut self, s: &BinarySeq) -> Result<u32> {
        if s.is_empty() {
            return Err(Error::EmptySequence);
        }
        if s.len() > PARALLEL_CAP {
            return Err(Error::LengthCap {
                len: s.len(),
                cap: PARALLEL_CAP,
            });
        }
        Ok(self.rec(s.len(), s.encoding()))
    }

    fn rec(&mut self, len: usize, v: u64) -> u32 {
        if square_free_encoded(len, v) {
            return 0;
        }
        let key = ((len as u32) << 16) | v as u32;
        if let Some(&d) = self.memo.get(&key) {
            return d;
        }
        let mut reps: Vec<(usize, usize)> = Vec::new();
        for_each_repeat_encoded(len, v, |i, h, _| {
            reps.push((i, h));
            true
        });
        reps.sort_unstable();
        let mut best = u32::MAX;
        let mut chosen: Vec<(usize, usize)> = Vec::new();
        self.antichains(len, v, &reps, 0, 0, &mut chosen, &mut best);
        self.memo.insert(key, best);
        best
    }

    /// Enumerate all antichains (sets of repeats with pairwise disjoint
    /// windows) by backtracking over repeats sorted by start position.
    #[allow(clippy::too_many_arguments)]
    fn antichains(
        &mut self,
        len: usize,
        v: u64,
        reps: &[(usize, usize)],
        idx: usize,
        max_end: usize,
        chosen: &mut Vec<(usize, usize)>,
        best: &mut u32,
    ) {
        if *best == 1 {
            return;
        }
        if idx == reps.len() {
            if !chosen.is_empty() {
                let (mut clen, mut cv) = (len, v);
                for &(i, h) in chosen.iter().rev() {
                    let b = clen - i - 2 * h + 1;
                    cv = ((cv >> (b + h)) << b) | (cv & low_mask(b));
                    clen -= h;
                }
                let d = 1 + self.rec(clen, cv);
                if d < *best {
                    *best = d;
                }
            }
            return;
        }
        self.antichains(len, v, reps, idx + 1, max_end, chosen, best);
        let (i, h) = reps[idx];
        if i > max_end {
            chosen.push((i, h));
            self.antichains(len, v, reps, idx + 1, max_end.max(i + 2 * h - 1), chosen, best);
            chosen.pop();
        }
    }
}

impl Default for ParallelSearch {
    fn default() -> Self {
        Self::new()
    }
}

/// Minimum number of parallel deduplication steps from `s` to its root.
pub fn parallel_distance(s: &BinarySeq) -> Result<u32> {
    ParallelSearch::new().distance(s)
}

/// A valid (not necessarily optimal) exact process: phase one halves every
/// run down to a single symbol (right to left, so positions stay valid);
/// phase two halves the alternating remainder. Step count is at most
/// `sum over runs of ceil(log2 t) + ceil(log2 n) + O(1)`.
pub fn heuristic_schedule(s: &BinarySeq) -> Result<DedupProcess> {
    if s.is_empty() {
        return Err(Error::EmptySequence);
    }
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut start = 1;
    for p in 2..=s.len() {
        if s.get(p) != s.get(p - 1) {
            runs.push((start, p - start));
            start = p;
        }
    }
    runs.push((start, s.len() - start + 1));
    let mut steps = Vec::new();
    for &(p, t) in runs.iter().rev() {
        let mut t = t;
        while t > 1 {
            let half = t / 2;
            steps.push(DedupStep::new(p, half));
            t -= half;
        }
    }
    // alternating remainder of one symbol per run; blocks of even length
    // match regardless of phase
    let mut l = runs.len();
    while l > 3 {
        let h = 2 * (l / 4);
        steps.push(DedupStep::new(1, h));
        l -= h;
    }
    DedupProcess::new(s.clone(), Beta::ZERO, steps)
}

/// Independent cross-check for the table: top-down memoized recursion over
/// hash-keyed sequences driven by [`BinarySeq::find_repeats`]. Shares no
/// traversal or state keying with [`DistanceTable::build`].
pub struct Oracle {
    memo: HashMap<BinarySeq, u32>,
}

impl Oracle {
    pub fn new() -> Self {
        Oracle {
            memo: HashMap::new(),
        }
    }

    pub fn distance(&mut self, s: &BinarySeq) -> Result<u32> {
        if s.is_empty() {
            return Err(Error::EmptySequence);
        }
        if s.len() > ORACLE_CAP {
            return Err(Error::LengthCap {
                len: s.len(),
                cap: ORACLE_CAP,
            });
        }
        Ok(self.rec(s))
    }

    fn rec(&mut self, s: &BinarySeq) -> u32 {
        if let Some(&d) = self.memo.get(s) {
            return d;
        }
        let d = if s.is_square_free() {
            0
        } else {
            s.find_repeats(Beta::ZERO)
                .iter()
                .map(|r| {
                    let child = apply_dedup(s, &DedupStep::new(r.i, r.h), Beta::ZERO)
                        .expect("find_repeats returned an applicable step");
                    self.rec(&child)
                })
                .min()
                .expect("non-square-free sequences have a repeat")
                + 1
        };
        self.memo.insert(s.clone(), d);
        d
    }
}

impl Default for Oracle {
    fn default() -> Self {
        Self::new()
    }
}

/// One-shot oracle distance (length at most [`ORACLE_CAP`]).
pub fn oracle_distance(s: &BinarySeq) -> Result<u32> {
    Oracle::new().distance(s)
}

/// Optimal witness process found by memoized top-down search, without
/// building a full table. Suited to single queries up to `cap <= 48`.
pub fn shortest_process_search(s: &BinarySeq, cap: usize) -> Result<DedupProcess> {
    if s.is_empty() {
        return Err(Error::EmptySequence);
    }
    if s.len() > cap.min(48) {
        return Err(Error::LengthCap {
            len: s.len(),
            cap: cap.min(48),
        });
    }
    let mut memo: HashMap<u64, u32> = HashMap::new();
    fn rec(len: usize, v: u64, memo: &mut HashMap<u64, u32>) -> u32 {
        if square_free_encoded(len, v) {
            return 0;
        }
        let key = ((len as u64) << 48) | v;
        if let Some(&d) = memo.get(&key) {
            return d;
        }
        let mut best = u32::MAX;
        let mut children: Vec<(usize, u64)> = Vec::new();
        for_each_repeat_encoded(len, v, |_i, h, child| {
            children.push((len - h, child));
            true
        });
        for (clen, cv) in children {
            best = best.min(rec(clen, cv, memo));
        }
        let d = best + 1;
        memo.insert(key, d);
        d
    }
    let mut cur_len = s.len();
    let mut cur_v = s.encoding();
    let mut d = rec(cur_len, cur_v, &mut memo);
    let mut steps = Vec::with_capacity(d as usize);
    while d > 0 {
        let mut chosen: Option<(usize, usize, u64)> = None;
        for_each_repeat_encoded(cur_len, cur_v, |i, h, child| {
            if rec(cur_len - h, child, &mut memo) + 1 == d {
                let better = match chosen {
                    None => true,
                    Some((ci, ch, _)) => (i, h) < (ci, ch),
                };
                if better {
                    chosen = Some((i, h, child));
                }
            }
            true
        });
        let (i, h, child) =
            chosen.ok_or_else(|| Error::Internal("memoized search lost a minimizer".into()))?;
        steps.push(DedupStep::new(i, h));
        cur_len -= h;
        cur_v = child;
        d -= 1;
    }
    DedupProcess::new(s.clone(), Beta::ZERO, steps)
}

/// Dedup the first (lexicographically smallest) repeat until square-free.
/// Returns the steps; used as the constant-size tail of the greedy drivers.
pub(crate) fn greedy_exact_steps(s: &BinarySeq) -> (Vec<DedupStep>, BinarySeq) {
    let mut cur = s.clone();
    let mut steps = Vec::new();
    'outer: loop {
        for i in 1..=cur.len() {
            for h in 1..=(cur.len() + 1 - i) / 2 {
                if cur.range_eq(i, i + h, h) {
                    let step = DedupStep::new(i, h);
                    cur = apply_dedup(&cur, &step, Beta::ZERO).expect("exact repeat");
                    steps.push(step);
                    continue 'outer;
                }
            }
        }
        return (steps, cur);
    }
}
