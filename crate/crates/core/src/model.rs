//! Domain types, random codebook generation and the forward test channel.
//!
//! Every random draw is addressed by a counter: codebook bit `(i, t)` is the
//! `t`-th draw of ChaCha stream `i` under key `seed`, so a bit depends only
//! on `(seed, i, t)` and not on the matrix dimensions. Noise draws follow
//! the same scheme under `noise_seed`.

use crate::error::{Error, Result};
use rand::distr::{Bernoulli, Distribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt;

const WORD: usize = 64;

fn words_for(bits: usize) -> usize {
    bits.div_ceil(WORD)
}

fn bernoulli(field: &'static str, prob: f64) -> Result<Bernoulli> {
    Bernoulli::new(prob).map_err(|_| Error::domain(field, prob, "[0, 1]"))
}

fn keyed_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// The N×T binary measurement matrix. Row `i` is the codeword of item `i`;
/// column `t` is the pool of test `t`. Rows are bit-packed into 64-bit words
/// and bits beyond `n_tests` are always zero.
#[derive(Clone, PartialEq, Eq)]
pub struct Codebook {
    n_items: usize,
    n_tests: usize,
    p_bits: u64,
    seed: u64,
    words_per_row: usize,
    bits: Vec<u64>,
}

impl Codebook {
    /// Draws an i.i.d. Bernoulli(`p`) codebook.
    pub fn generate(n_items: usize, n_tests: usize, p: f64, seed: u64) -> Result<Self> {
        if n_items == 0 {
            return Err(Error::param("n_items", "must be at least 1"));
        }
        if n_tests == 0 {
            return Err(Error::param("n_tests", "must be at least 1"));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain("p", p, "(0, 1)"));
        }
        Ok(Self::draw(n_items, n_tests, p, seed))
    }

    /// Same as [`Codebook::generate`] but admits `n_tests == 0`, the
    /// no-information limit used by the Monte Carlo harness.
    pub(crate) fn draw(n_items: usize, n_tests: usize, p: f64, seed: u64) -> Self {
        let words_per_row = words_for(n_tests);
        let mut bits = vec![0u64; n_items * words_per_row];
        let coin = Bernoulli::new(p).expect("p checked by caller");
        for (i, row) in bits.chunks_mut(words_per_row.max(1)).enumerate().take(n_items) {
            let mut rng = keyed_stream(seed, i as u64);
            for t in 0..n_tests {
                if coin.sample(&mut rng) {
                    row[t / WORD] |= 1 << (t % WORD);
                }
            }
        }
        Codebook {
            n_items,
            n_tests,
            p_bits: p.to_bits(),
            seed,
            words_per_row,
            bits,
        }
    }

    /// Builds a codebook from explicit rows of `0`/`1` values. Hand-built
    /// codebooks record `p = 0.5` and `seed = 0`.
    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
        let n_items = rows.len();
        if n_items == 0 {
            return Err(Error::param("n_items", "must be at least 1"));
        }
        let n_tests = rows[0].as_ref().len();
        if n_tests == 0 {
            return Err(Error::param("n_tests", "must be at least 1"));
        }
        let words_per_row = words_for(n_tests);
        let mut bits = vec![0u64; n_items * words_per_row];
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != n_tests {
                return Err(Error::param(
                    "rows",
                    format!("row {i} has {} entries, expected {n_tests}", row.len()),
                ));
            }
            for (t, &b) in row.iter().enumerate() {
                match b {
                    0 => {}
                    1 => bits[i * words_per_row + t / WORD] |= 1 << (t % WORD),
                    _ => return Err(Error::param("rows", format!("entry ({i},{t}) is {b}"))),
                }
            }
        }
        Ok(Codebook {
            n_items,
            n_tests,
            p_bits: 0.5f64.to_bits(),
            seed: 0,
            words_per_row,
            bits,
        })
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn n_tests(&self) -> usize {
        self.n_tests
    }

    pub fn p(&self) -> f64 {
        f64::from_bits(self.p_bits)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn words_per_row(&self) -> usize {
        self.words_per_row
    }

    /// Packed words of row `i`.
    pub fn row(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words_per_row..(i + 1) * self.words_per_row]
    }

    pub fn bit(&self, i: usize, t: usize) -> bool {
        assert!(i < self.n_items && t < self.n_tests, "bit ({i},{t}) out of range");
        self.row(i)[t / WORD] >> (t % WORD) & 1 == 1
    }

    /// Fraction of ones in the matrix.
    pub fn density(&self) -> f64 {
        let ones: u64 = self.bits.iter().map(|w| w.count_ones() as u64).sum();
        ones as f64 / (self.n_items * self.n_tests) as f64
    }

    /// Text form: a header line `N T p seed` followed by one line of `0`/`1`
    /// characters per row, LF terminated.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.n_items * (self.n_tests + 1) + 32);
        out.push_str(&format!(
            "{} {} {} {}\n",
            self.n_items,
            self.n_tests,
            self.p(),
            self.seed
        ));
        for i in 0..self.n_items {
            for t in 0..self.n_tests {
                out.push(if self.bit(i, t) { '1' } else { '0' });
            }
            out.push('\n');
        }
        out
    }

    /// Parses the format written by [`Codebook::to_text`].
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::param("codebook", "empty input"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::param("codebook", "header must be `N T p seed`"));
        }
        let bad = |what: &'static str| Error::param("codebook", format!("unparsable {what}"));
        let n_items: usize = fields[0].parse().map_err(|_| bad("N"))?;
        let n_tests: usize = fields[1].parse().map_err(|_| bad("T"))?;
        let p: f64 = fields[2].parse().map_err(|_| bad("p"))?;
        let seed: u64 = fields[3].parse().map_err(|_| bad("seed"))?;
        let rows: Vec<Vec<u8>> = lines
            .map(|l| {
                l.bytes()
                    .map(|c| match c {
                        b'0' => Ok(0),
                        b'1' => Ok(1),
                        _ => Err(Error::param("codebook", "rows may only contain 0 and 1")),
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        if rows.len() != n_items || rows.iter().any(|r| r.len() != n_tests) {
            return Err(Error::param(
                "codebook",
                "row count or width disagrees with header",
            ));
        }
        let mut cb = Codebook::from_rows(&rows)?;
        cb.p_bits = p.to_bits();
        cb.seed = seed;
        Ok(cb)
    }
}

impl fmt::Debug for Codebook {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Codebook")
            .field("n_items", &self.n_items)
            .field("n_tests", &self.n_tests)
            .field("p", &self.p())
            .field("seed", &self.seed)
            .finish_non_exhaustive()
    }
}

/// A K-subset of item indices, kept strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DefectiveSet {
    indices: Vec<usize>,
}

impl DefectiveSet {
    /// Sorts `indices` and checks they are distinct and below `n_items`.
    pub fn new(mut indices: Vec<usize>, n_items: usize) -> Result<Self> {
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::param("defectives", "duplicate item index"));
        }
        if let Some(&last) = indices.last() {
            if last >= n_items {
                return Err(Error::param(
                    "defectives",
                    format!("item {last} out of range for N = {n_items}"),
                ));
            }
        }
        Ok(DefectiveSet { indices })
    }

    /// Wraps indices already known to be strictly increasing.
    pub(crate) fn from_sorted(indices: Vec<usize>) -> Self {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        DefectiveSet { indices }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn k(&self) -> usize {
        self.indices.len()
    }

    pub fn contains(&self, item: usize) -> bool {
        self.indices.binary_search(&item).is_ok()
    }

    pub(crate) fn check_against(&self, codebook: &Codebook) -> Result<()> {
        match self.indices.last() {
            Some(&last) if last >= codebook.n_items() => Err(Error::param(
                "defectives",
                format!("item {last} out of range for N = {}", codebook.n_items()),
            )),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for DefectiveSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.indices.iter().map(|i| i.to_string()).collect();
        write!(f, "{{{}}}", parts.join(" "))
    }
}

/// The test channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    NoiseFree,
    /// A pool without defectives reads positive with probability `q`.
    Additive {
        q: f64,
    },
    /// Every defective present in a pool is independently missed with
    /// probability `u` (a Z-channel on each participation).
    Dilution {
        u: f64,
    },
}

impl NoiseModel {
    pub fn additive(q: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::domain("q", q, "[0, 1]"));
        }
        Ok(NoiseModel::Additive { q })
    }

    pub fn dilution(u: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::domain("u", u, "[0, 1]"));
        }
        Ok(NoiseModel::Dilution { u })
    }

    /// Short name used on the command line and in CSV output.
    pub fn name(&self) -> &'static str {
        match self {
            NoiseModel::NoiseFree => "noise-free",
            NoiseModel::Additive { .. } => "additive",
            NoiseModel::Dilution { .. } => "dilution",
        }
    }

    /// The channel parameter (`q` or `u`), if any.
    pub fn param(&self) -> Option<f64> {
        match *self {
            NoiseModel::NoiseFree => None,
            NoiseModel::Additive { q } => Some(q),
            NoiseModel::Dilution { u } => Some(u),
        }
    }

    /// Single-test law `P(Y = 1)` when `weight` defectives are in the pool.
    pub fn prob_positive(&self, weight: usize) -> f64 {
        match *self {
            NoiseModel::NoiseFree => {
                if weight > 0 {
                    1.0
                } else {
                    0.0
                }
            }
            NoiseModel::Additive { q } => {
                if weight > 0 {
                    1.0
                } else {
                    q
                }
            }
            NoiseModel::Dilution { u } => 1.0 - u.powi(weight as i32),
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        match *self {
            NoiseModel::NoiseFree => Ok(()),
            NoiseModel::Additive { q } => NoiseModel::additive(q).map(|_| ()),
            NoiseModel::Dilution { u } => NoiseModel::dilution(u).map(|_| ()),
        }
    }

    /// True when a pool that contains a defective can never read negative;
    /// the decoder then discards every item that appears in a negative test.
    pub(crate) fn positive_pools_are_reliable(&self) -> bool {
        match *self {
            NoiseModel::NoiseFree | NoiseModel::Additive { .. } => true,
            NoiseModel::Dilution { u } => u == 0.0,
        }
    }
}

impl fmt::Display for NoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            NoiseModel::NoiseFree => write!(f, "noise-free"),
            NoiseModel::Additive { q } => write!(f, "additive(q={q})"),
            NoiseModel::Dilution { u } => write!(f, "dilution(u={u})"),
        }
    }
}

/// The T test outcomes, bit-packed like a codebook row.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OutcomeVector {
    n_tests: usize,
    words: Vec<u64>,
}

impl OutcomeVector {
    pub fn zeros(n_tests: usize) -> Self {
        OutcomeVector {
            n_tests,
            words: vec![0; words_for(n_tests)],
        }
    }

    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        let mut out = OutcomeVector::zeros(bits.len());
        for (t, &b) in bits.iter().enumerate() {
            match b {
                0 => {}
                1 => out.set(t),
                _ => return Err(Error::param("outcome", format!("entry {t} is {b}"))),
            }
        }
        Ok(out)
    }

    pub fn n_tests(&self) -> usize {
        self.n_tests
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn bit(&self, t: usize) -> bool {
        assert!(t < self.n_tests, "test {t} out of range");
        self.words[t / WORD] >> (t % WORD) & 1 == 1
    }

    pub fn to_bits(&self) -> Vec<u8> {
        (0..self.n_tests).map(|t| self.bit(t) as u8).collect()
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    fn set(&mut self, t: usize) {
        self.words[t / WORD] |= 1 << (t % WORD);
    }

    /// Mask of valid bit positions in word `w`.
    pub(crate) fn tail_mask(&self, w: usize) -> u64 {
        let rem = self.n_tests - w * WORD;
        if rem >= WORD {
            u64::MAX
        } else {
            (1u64 << rem) - 1
        }
    }
}

/// Boolean sum of the defective rows.
pub fn noiseless_outcome(codebook: &Codebook, defectives: &DefectiveSet) -> Result<OutcomeVector> {
    defectives.check_against(codebook)?;
    let mut words = vec![0u64; codebook.words_per_row()];
    for &i in defectives.indices() {
        for (acc, w) in words.iter_mut().zip(codebook.row(i)) {
            *acc |= w;
        }
    }
    Ok(OutcomeVector {
        n_tests: codebook.n_tests(),
        words,
    })
}

/// Passes the defective set through `noise`. All noise is a deterministic
/// function of `noise_seed`: the additive false alarm of test `t` is draw
/// `t` of stream 0, and the dilution of defective `i` in test `t` is draw
/// `t` of stream `i`.
pub fn apply_channel(
    codebook: &Codebook,
    defectives: &DefectiveSet,
    noise: &NoiseModel,
    noise_seed: u64,
) -> Result<OutcomeVector> {
    noise.validate()?;
    match *noise {
        NoiseModel::NoiseFree => noiseless_outcome(codebook, defectives),
        NoiseModel::Additive { q } => {
            let mut out = noiseless_outcome(codebook, defectives)?;
            if q > 0.0 {
                let coin = bernoulli("q", q)?;
                let mut rng = keyed_stream(noise_seed, 0);
                for t in 0..codebook.n_tests() {
                    if coin.sample(&mut rng) {
                        out.set(t);
                    }
                }
            }
            Ok(out)
        }
        NoiseModel::Dilution { u } => {
            if u == 0.0 {
                return noiseless_outcome(codebook, defectives);
            }
            defectives.check_against(codebook)?;
            let coin = bernoulli("u", u)?;
            let mut out = OutcomeVector::zeros(codebook.n_tests());
            for &i in defectives.indices() {
                let mut rng = keyed_stream(noise_seed, i as u64);
                for t in 0..codebook.n_tests() {
                    let diluted = coin.sample(&mut rng);
                    if !diluted && codebook.bit(i, t) {
                        out.set(t);
                    }
                }
            }
            Ok(out)
        }
    }
}
