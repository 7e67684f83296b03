//! Variable-length scheme over a noiseless link.
//!
//! The transmitter observes `x^n`. On a reject event `x^n in S_n` it sends the
//! single bit `[0]`. Otherwise it looks for a codeword `u^n(m)` jointly typical
//! with `x^n` (tolerance `mu/2`) and sends the index of a random hit, or `[0]`
//! if there is none. The receiver declares `H1` on `[0]`, and otherwise accepts
//! `H0` iff `(u^n(m), y^n)` is `mu`-typical for `P_UY`.
//!
//! `S_n` is a union of whole type classes of `T_{mu/2}(P_X)`, taken in order of
//! decreasing per-sequence probability, plus one class that is included with a
//! probability chosen so the reject mass hits its target exactly.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::info::{
    aligned_typical, counts_typical, mutual_information, AuxChannel, JointSource, Pmf, PmfSampler,
};
use crate::stats::{trial_rng, wilson_interval, Interval, Z95};

/// Codebooks with more than `2^26` entries are refused.
pub const MAX_CODEBOOK_LOG2: f64 = 26.0;
/// Refuse type-class enumerations larger than this.
pub const MAX_TYPE_CLASSES: usize = 5_000_000;

const CODEBOOK_FAMILY: u64 = 0xC0DE;
const H0_FAMILY: u64 = 0x4830;
const H1_FAMILY: u64 = 0x4831;

/// Which hypothesis is true, or which one the receiver declares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Hypothesis {
    /// `(X, Y) ~ P_XY`.
    H0,
    /// `(X, Y) ~ P_X P_Y`.
    H1,
}

/// A bit string sent over the link.
///
/// The reject message is the single bit `0`. An index message has the
/// codebook's fixed width, which is at least 2, so it never collides with it.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Message {
    bits: Vec<bool>,
}

impl Message {
    pub fn reject() -> Self {
        Message { bits: vec![false] }
    }

    /// Index `m` (1-based) written as `m - 1` in `width` bits, most significant first.
    pub fn index(m: usize, width: usize) -> Result<Self> {
        if m == 0 || width < 2 || (width < usize::BITS as usize && (m - 1) >> width != 0) {
            return Err(Error::MalformedMessage(format!(
                "index {m} does not fit in {width} bits"
            )));
        }
        let v = m - 1;
        let bits = (0..width).rev().map(|b| (v >> b) & 1 == 1).collect();
        Ok(Message { bits })
    }

    pub fn from_bits(bits: Vec<bool>) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::MalformedMessage("empty bit string".into()));
        }
        Ok(Message { bits })
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn is_reject(&self) -> bool {
        self.bits == [false]
    }

    /// The 1-based index carried by the message, `None` for the reject bit.
    pub fn index_in(&self, codebook: &Codebook) -> Result<Option<usize>> {
        if self.is_reject() {
            return Ok(None);
        }
        if self.bits.len() != codebook.message_width() {
            return Err(Error::MalformedMessage(format!(
                "length {} is neither 1 nor the index width {}",
                self.bits.len(),
                codebook.message_width()
            )));
        }
        let v = self
            .bits
            .iter()
            .try_fold(0usize, |acc, &b| acc.checked_mul(2).map(|a| a + b as usize))
            .ok_or_else(|| Error::MalformedMessage("index overflows".into()))?;
        if v >= codebook.size() {
            return Err(Error::MalformedMessage(format!(
                "index {} exceeds codebook size {}",
                v + 1,
                codebook.size()
            )));
        }
        Ok(Some(v + 1))
    }
}

/// Random codebook `{u^n(m)}`, stored flat with one byte per symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    n: usize,
    rate: f64,
    size: usize,
    u_size: usize,
    entries: Vec<u8>,
}

/// `floor(2^{nR})`, refusing books beyond `2^26` entries.
pub fn codebook_size(n: usize, rate: f64) -> Result<usize> {
    if !(rate >= 0.0 && rate.is_finite()) {
        return Err(domain(format!("rate {rate} must be finite and >= 0")));
    }
    let log2 = n as f64 * rate;
    if log2 > MAX_CODEBOOK_LOG2 + 1e-9 {
        return Err(Error::ResourceLimit(format!(
            "codebook needs 2^{log2:.3} entries, limit is 2^{MAX_CODEBOOK_LOG2}"
        )));
    }
    // Guard against 2^{3.9999999999} style rounding of exact integers.
    Ok(((log2.exp2() * (1.0 + 1e-12)).floor() as usize).max(1))
}

impl Codebook {
    /// Explicit codebook; the nominal rate is `log2(size) / n`.
    pub fn from_codewords(codewords: &[Vec<usize>], u_size: usize) -> Result<Self> {
        let n = codewords.first().map(Vec::len).unwrap_or(0);
        if n == 0 {
            return Err(domain("codebook needs at least one nonempty codeword"));
        }
        check_u_size(u_size)?;
        let mut entries = Vec::with_capacity(codewords.len() * n);
        for c in codewords {
            if c.len() != n {
                return Err(Error::DimensionMismatch("codewords differ in length".into()));
            }
            for &u in c {
                if u >= u_size {
                    return Err(domain(format!("symbol {u} outside alphabet of size {u_size}")));
                }
                entries.push(u as u8);
            }
        }
        Ok(Codebook {
            n,
            rate: (codewords.len() as f64).log2() / n as f64,
            size: codewords.len(),
            u_size,
            entries,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn u_size(&self) -> usize {
        self.u_size
    }

    /// Bits per index message: `ceil(log2 size)`, but never below 2.
    pub fn message_width(&self) -> usize {
        let bits = if self.size <= 1 {
            0
        } else {
            (usize::BITS - (self.size - 1).leading_zeros()) as usize
        };
        bits.max(2)
    }

    /// Codeword `m`, 1-based.
    pub fn codeword(&self, m: usize) -> &[u8] {
        assert!(m >= 1 && m <= self.size, "codeword index {m} out of range");
        &self.entries[(m - 1) * self.n..m * self.n]
    }

    pub fn codewords(&self) -> impl Iterator<Item = &[u8]> {
        self.entries.chunks_exact(self.n)
    }
}

fn check_u_size(u_size: usize) -> Result<()> {
    if u_size == 0 || u_size > 256 {
        return Err(Error::ResourceLimit(format!(
            "auxiliary alphabet of size {u_size}; codebooks support 1..=256"
        )));
    }
    Ok(())
}

/// Draws `floor(2^{nR})` codewords i.i.d. `P_U`.
pub fn build_codebook<R: Rng + ?Sized>(p_u: &Pmf, n: usize, rate: f64, rng: &mut R) -> Result<Codebook> {
    if n == 0 {
        return Err(domain("block length must be >= 1"));
    }
    check_u_size(p_u.len())?;
    let size = codebook_size(n, rate)?;
    let sampler = p_u.sampler();
    let entries = (0..size * n).map(|_| sampler.sample(rng) as u8).collect();
    Ok(Codebook {
        n,
        rate,
        size,
        u_size: p_u.len(),
        entries,
    })
}

/// One type class of a typical set.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeClass {
    pub counts: Vec<usize>,
    /// `log2` of the probability of any single sequence in the class.
    pub log2_sequence_prob: f64,
    /// Probability of the whole class.
    pub mass: f64,
}

fn log_factorials(n: usize) -> Vec<f64> {
    let mut lf = vec![0.0; n + 1];
    for k in 1..=n {
        lf[k] = lf[k - 1] + (k as f64).ln();
    }
    lf
}

/// All type classes of length-`n` sequences in `T_mu(p)`.
pub fn typical_classes(p: &Pmf, n: usize, mu: f64) -> Result<Vec<TypeClass>> {
    if n == 0 {
        return Err(domain("block length must be >= 1"));
    }
    if !(mu >= 0.0) {
        return Err(domain(format!("mu {mu} must be >= 0")));
    }
    let probs = p.probs();
    let nf = n as f64;
    // Per-symbol count ranges; the exact test below decides membership.
    let ranges: Vec<(usize, usize)> = probs
        .iter()
        .map(|&q| {
            let e = nf * q;
            let lo = (e - mu * e - 1e-6).ceil().max(0.0) as usize;
            let hi = ((e + mu * e + 1e-6).floor() as usize).min(n);
            (lo, hi)
        })
        .collect();
    let lf = log_factorials(n);
    let mut out = Vec::new();
    let mut counts = vec![0usize; probs.len()];
    let mut suffix_lo = vec![0usize; probs.len() + 1];
    let mut suffix_hi = vec![0usize; probs.len() + 1];
    for i in (0..probs.len()).rev() {
        suffix_lo[i] = suffix_lo[i + 1] + ranges[i].0;
        suffix_hi[i] = suffix_hi[i + 1] + ranges[i].1;
    }
    #[allow(clippy::too_many_arguments)]
    fn walk(
        i: usize,
        rem: usize,
        ranges: &[(usize, usize)],
        lo: &[usize],
        hi: &[usize],
        counts: &mut Vec<usize>,
        visit: &mut dyn FnMut(&[usize]) -> Result<()>,
    ) -> Result<()> {
        if i == ranges.len() {
            return if rem == 0 { visit(counts) } else { Ok(()) };
        }
        let (a, b) = ranges[i];
        for c in a..=b.min(rem) {
            let left = rem - c;
            if left < lo[i + 1] || left > hi[i + 1] {
                continue;
            }
            counts[i] = c;
            walk(i + 1, left, ranges, lo, hi, counts, visit)?;
        }
        Ok(())
    }
    let mut visit = |c: &[usize]| -> Result<()> {
        if !counts_typical(c, probs, n, mu) {
            return Ok(());
        }
        if out.len() >= MAX_TYPE_CLASSES {
            return Err(Error::ResourceLimit(format!(
                "more than {MAX_TYPE_CLASSES} typical type classes"
            )));
        }
        let mut ln_seq = 0.0;
        let mut ln_mult = lf[n];
        for (&k, &q) in c.iter().zip(probs) {
            if k > 0 {
                ln_seq += k as f64 * q.ln();
                ln_mult -= lf[k];
            }
        }
        out.push(TypeClass {
            counts: c.to_vec(),
            log2_sequence_prob: ln_seq / std::f64::consts::LN_2,
            mass: (ln_mult + ln_seq).exp(),
        });
        Ok(())
    };
    walk(0, n, &ranges, &suffix_lo, &suffix_hi, &mut counts, &mut visit)?;
    Ok(out)
}

/// Exact probability of `T_mu(p)` at block length `n`.
pub fn typical_set_mass(p: &Pmf, n: usize, mu: f64) -> Result<f64> {
    Ok(typical_classes(p, n, mu)?.iter().map(|c| c.mass).sum())
}

/// The reject set `S_n` as a per-type-class inclusion probability.
#[derive(Debug, Clone, PartialEq)]
pub struct RejectSetSpec {
    n: usize,
    mu: f64,
    target_prob: f64,
    typical_mass: f64,
    /// Typical classes in inclusion order with their inclusion probability.
    classes: Vec<(TypeClass, f64)>,
    lookup: HashMap<Vec<usize>, usize>,
}

/// Builds `S_n` inside `T_{mu/2}(P_X)` with `Pr[X^n in S_n] = target_prob`.
pub fn build_reject_set(p_x: &Pmf, n: usize, mu: f64, target_prob: f64) -> Result<RejectSetSpec> {
    if !(0.0..=1.0).contains(&target_prob) {
        return Err(domain(format!("target probability {target_prob} outside [0,1]")));
    }
    let mut classes = typical_classes(p_x, n, mu / 2.0)?;
    let typical_mass: f64 = classes.iter().map(|c| c.mass).sum();
    if target_prob > typical_mass + 1e-13 {
        return Err(Error::InfeasibleTarget {
            target: target_prob,
            achievable: typical_mass,
        });
    }
    classes.sort_by(|a, b| {
        b.log2_sequence_prob
            .total_cmp(&a.log2_sequence_prob)
            .then_with(|| a.counts.cmp(&b.counts))
    });
    let mut cum = 0.0;
    let mut placed = Vec::with_capacity(classes.len());
    for c in classes {
        let inclusion = if cum + c.mass <= target_prob + 1e-13 {
            1.0
        } else {
            ((target_prob - cum) / c.mass).clamp(0.0, 1.0)
        };
        cum += inclusion * c.mass;
        placed.push((c, inclusion));
    }
    let lookup = placed
        .iter()
        .enumerate()
        .map(|(i, (c, _))| (c.counts.clone(), i))
        .collect();
    Ok(RejectSetSpec {
        n,
        mu,
        target_prob,
        typical_mass,
        classes: placed,
        lookup,
    })
}

impl RejectSetSpec {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn target_prob(&self) -> f64 {
        self.target_prob
    }

    /// Mass of `T_{mu/2}(P_X)`, the largest feasible target.
    pub fn typical_mass(&self) -> f64 {
        self.typical_mass
    }

    /// Typical classes in inclusion order, with their inclusion probabilities.
    pub fn classes(&self) -> &[(TypeClass, f64)] {
        &self.classes
    }

    /// `Pr[X^n in S_n]` including the randomized boundary class.
    pub fn analytical_mass(&self) -> f64 {
        self.classes.iter().map(|(c, g)| c.mass * g).sum()
    }

    /// Probability that a sequence with these symbol counts is put in `S_n`.
    pub fn inclusion_probability(&self, counts: &[usize]) -> f64 {
        self.lookup
            .get(counts)
            .map_or(0.0, |&i| self.classes[i].1)
    }

    /// Membership of `x_seq` given a uniform coin in `[0, 1)`.
    pub fn contains(&self, x_seq: &[usize], coin: f64) -> bool {
        let mut counts = vec![0usize; self.classes.first().map_or(0, |(c, _)| c.counts.len())];
        for &x in x_seq {
            match counts.get_mut(x) {
                Some(c) => *c += 1,
                None => return false,
            }
        }
        coin < self.inclusion_probability(&counts)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
}

/// Parameters of one noiseless-link experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiselessConfig {
    pub source: JointSource,
    pub aux: AuxChannel,
    pub n: usize,
    pub mu: f64,
    pub epsilon: f64,
    /// Codebook rate, bits per source symbol.
    pub rate: f64,
    pub seed: u64,
}

impl NoiselessConfig {
    /// Config with the scheme's rate `(1 - eps + mu) I(U;X) + mu`.
    pub fn new(source: JointSource, aux: AuxChannel, n: usize, mu: f64, epsilon: f64, seed: u64) -> Result<Self> {
        if aux.x_size() != source.x_size() {
            return Err(Error::DimensionMismatch(format!(
                "aux channel has {} inputs, source has {} symbols",
                aux.x_size(),
                source.x_size()
            )));
        }
        let rate = scheme_rate(&source, &aux, mu, epsilon)?;
        let cfg = NoiselessConfig {
            source,
            aux,
            n,
            mu,
            epsilon,
            rate,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(domain("block length must be >= 1"));
        }
        if !(self.mu > 0.0 && self.mu < self.epsilon && self.epsilon < 1.0) {
            return Err(domain(format!(
                "need 0 < mu < epsilon < 1, got mu {} and epsilon {}",
                self.mu, self.epsilon
            )));
        }
        if self.aux.x_size() != self.source.x_size() {
            return Err(Error::DimensionMismatch("aux channel and source disagree on |X|".into()));
        }
        check_u_size(self.aux.u_size())?;
        codebook_size(self.n, self.rate).map(|_| ())
    }
}

/// `(1 - eps + mu) I(U;X) + mu`.
pub fn scheme_rate(source: &JointSource, aux: &AuxChannel, mu: f64, epsilon: f64) -> Result<f64> {
    let iux = mutual_information(&aux.joint_ux(source.x_marginal())?);
    Ok((1.0 - epsilon + mu) * iux + mu)
}

/// Sends `[0]` on the reject event, else the index of a random `mu/2`-jointly
/// typical codeword, else `[0]`.
pub fn encode<R: Rng + ?Sized>(
    x_seq: &[usize],
    codebook: &Codebook,
    reject: &RejectSetSpec,
    joint_ux: &JointSource,
    mu: f64,
    rng: &mut R,
) -> Result<Message> {
    check_len(x_seq.len(), codebook.n())?;
    let coin: f64 = rng.random();
    if reject.contains(x_seq, coin) {
        return Ok(Message::reject());
    }
    let mut scratch = Vec::new();
    let mut hits = Vec::new();
    match search(x_seq, codebook, joint_ux, mu / 2.0, None, &mut scratch, &mut hits, rng) {
        Some(m) => Message::index(m, codebook.message_width()),
        None => Ok(Message::reject()),
    }
}

fn check_len(got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::DimensionMismatch(format!(
            "sequence length {got}, codebook block length {want}"
        )));
    }
    Ok(())
}

/// Within `mu` of typical with a loose slack; joint typicality at `mu` implies it.
fn loosely_typical(counts: &[usize], probs: &[f64], n: usize, mu: f64) -> bool {
    let n = n as f64;
    counts
        .iter()
        .zip(probs)
        .all(|(&c, &p)| (c as f64 - n * p).abs() <= mu * n * p + 1e-6)
}

#[allow(clippy::too_many_arguments)]
fn search<R: Rng + ?Sized>(
    x_seq: &[usize],
    codebook: &Codebook,
    joint_ux: &JointSource,
    tol: f64,
    mask: Option<&[bool]>,
    scratch: &mut Vec<usize>,
    hits: &mut Vec<usize>,
    rng: &mut R,
) -> Option<usize> {
    // A jointly typical pair has a typical x-marginal, so most draws skip the scan.
    let mut xc = vec![0usize; joint_ux.y_size()];
    for &x in x_seq {
        xc[x] += 1;
    }
    if !loosely_typical(&xc, joint_ux.y_marginal().probs(), x_seq.len(), tol) {
        return None;
    }
    hits.clear();
    for (i, u) in codebook.codewords().enumerate() {
        if mask.is_some_and(|m| !m[i]) {
            continue;
        }
        if aligned_typical(u, x_seq, joint_ux, tol, scratch) {
            hits.push(i + 1);
        }
    }
    if hits.is_empty() {
        None
    } else {
        Some(hits[rng.random_range(0..hits.len())])
    }
}

/// `[0]` means `H1`; an index means `H0` iff `(u^n(m), y^n)` is `mu`-typical for `P_UY`.
pub fn decode(msg: &Message, y_seq: &[usize], codebook: &Codebook, joint_uy: &JointSource, mu: f64) -> Result<Hypothesis> {
    let Some(m) = msg.index_in(codebook)? else {
        return Ok(Hypothesis::H1);
    };
    check_len(y_seq.len(), codebook.n())?;
    let mut scratch = Vec::new();
    Ok(if aligned_typical(codebook.codeword(m), y_seq, joint_uy, mu, &mut scratch) {
        Hypothesis::H0
    } else {
        Hypothesis::H1
    })
}

/// Monte Carlo estimates for one scheme variant.
#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub n: usize,
    pub rate: f64,
    pub codebook_size: usize,
    pub message_width: usize,
    /// Analytical `Pr[X^n in S_n]` (zero when the reject branch is disabled).
    pub reject_mass: f64,
    pub trials_h0: u64,
    pub trials_h1: u64,
    /// Trials under `H0` decided `H1`.
    pub type1_errors: u64,
    /// Trials under `H1` decided `H0`.
    pub type2_errors: u64,
    pub alpha_hat: f64,
    pub beta_hat: f64,
    pub alpha_ci: Interval,
    pub beta_ci: Interval,
    /// Mean message length under `H0`, bits per source symbol.
    pub mean_len_per_symbol: f64,
    pub mean_len_per_symbol_h1: f64,
    /// `-log2(max(beta_hat, 1/trials_h1)) / n`.
    pub empirical_exponent: f64,
    /// Fraction of `H0` trials sent `[0]` because of `S_n`.
    pub reject_rate_h0: f64,
    /// Fraction of `H0` trials outside `S_n` with no jointly typical codeword.
    pub encoder_miss_rate_h0: f64,
    /// Fraction of `H0` trials sent an index that the decoder turned down.
    pub decoder_miss_rate_h0: f64,
}

/// The same trials with and without the reject branch.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedReport {
    pub with_reject: SimReport,
    pub without_reject: SimReport,
    /// `H1` trials accepted with `S_n` but rejected without it. The reject
    /// branch only turns index messages into `[0]`, so this is always zero.
    pub beta_increases: u64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    trials: u64,
    in_reject: u64,
    encoder_miss: u64,
    decoder_miss: u64,
    h0_decisions: u64,
    bits: u64,
}

impl Tally {
    fn merge(self, o: Tally) -> Tally {
        Tally {
            trials: self.trials + o.trials,
            in_reject: self.in_reject + o.in_reject,
            encoder_miss: self.encoder_miss + o.encoder_miss,
            decoder_miss: self.decoder_miss + o.decoder_miss,
            h0_decisions: self.h0_decisions + o.h0_decisions,
            bits: self.bits + o.bits,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct PairTally {
    with: Tally,
    without: Tally,
    increases: u64,
}

impl PairTally {
    fn merge(self, o: PairTally) -> PairTally {
        PairTally {
            with: self.with.merge(o.with),
            without: self.without.merge(o.without),
            increases: self.increases + o.increases,
        }
    }
}

/// Outcome of a single trial under both variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialOutcome {
    pub in_reject: bool,
    /// Index picked by the codebook search, if any.
    pub hit: Option<usize>,
    /// Receiver decision when the index is sent.
    pub index_decision: Hypothesis,
    pub decision_with_reject: Hypothesis,
    pub decision_without_reject: Hypothesis,
}

/// Codebook, reject set and derived laws for one configuration.
#[derive(Debug, Clone)]
pub struct NoiselessScheme {
    cfg: NoiselessConfig,
    codebook: Codebook,
    reject: RejectSetSpec,
    joint_ux: JointSource,
    joint_uy: JointSource,
    /// Codewords whose own type is loosely `mu/2`-typical for `P_U`.
    mask: Vec<bool>,
    pair_sampler: PmfSampler,
    x_sampler: PmfSampler,
    y_sampler: PmfSampler,
}

impl NoiselessScheme {
    pub fn new(cfg: &NoiselessConfig) -> Result<Self> {
        cfg.validate()?;
        let px = cfg.source.x_marginal();
        let joint_ux = cfg.aux.joint_ux(px)?;
        let joint_uy = cfg.aux.joint_uy(&cfg.source)?;
        let p_u = cfg.aux.u_marginal(px);
        let mut rng = trial_rng(cfg.seed, CODEBOOK_FAMILY, 0);
        let codebook = build_codebook(&p_u, cfg.n, cfg.rate, &mut rng)?;
        let reject = build_reject_set(px, cfg.n, cfg.mu, cfg.epsilon - cfg.mu)?;
        let mask = codebook
            .codewords()
            .map(|u| {
                let mut c = vec![0usize; p_u.len()];
                for &s in u {
                    c[s as usize] += 1;
                }
                loosely_typical(&c, p_u.probs(), cfg.n, cfg.mu / 2.0)
            })
            .collect();
        Ok(NoiselessScheme {
            cfg: cfg.clone(),
            codebook,
            reject,
            joint_ux,
            joint_uy,
            mask,
            pair_sampler: cfg.source.as_pmf().sampler(),
            x_sampler: px.sampler(),
            y_sampler: cfg.source.y_marginal().sampler(),
        })
    }

    pub fn config(&self) -> &NoiselessConfig {
        &self.cfg
    }

    pub fn codebook(&self) -> &Codebook {
        &self.codebook
    }

    pub fn reject_set(&self) -> &RejectSetSpec {
        &self.reject
    }

    pub fn joint_uy(&self) -> &JointSource {
        &self.joint_uy
    }

    /// Draws `(x^n, y^n)` under `hypothesis`.
    pub fn draw<R: Rng + ?Sized>(&self, hypothesis: Hypothesis, rng: &mut R) -> (Vec<usize>, Vec<usize>) {
        let n = self.cfg.n;
        let ys = self.cfg.source.y_size();
        match hypothesis {
            Hypothesis::H0 => (0..n)
                .map(|_| {
                    let k = self.pair_sampler.sample(rng);
                    (k / ys, k % ys)
                })
                .unzip(),
            Hypothesis::H1 => (0..n)
                .map(|_| (self.x_sampler.sample(rng), self.y_sampler.sample(rng)))
                .unzip(),
        }
    }

    /// One trial. Draw order is source pair, reject coin, encoder pick, so the
    /// two variants see identical randomness.
    pub fn trial<R: Rng + ?Sized>(&self, hypothesis: Hypothesis, rng: &mut R) -> TrialOutcome {
        let (x, y) = self.draw(hypothesis, rng);
        let coin: f64 = rng.random();
        let in_reject = self.reject.contains(&x, coin);
        let mut scratch = Vec::new();
        let mut hits = Vec::new();
        let hit = search(
            &x,
            &self.codebook,
            &self.joint_ux,
            self.cfg.mu / 2.0,
            Some(&self.mask),
            &mut scratch,
            &mut hits,
            rng,
        );
        let index_decision = match hit {
            Some(m) if aligned_typical(self.codebook.codeword(m), &y, &self.joint_uy, self.cfg.mu, &mut scratch) => {
                Hypothesis::H0
            }
            _ => Hypothesis::H1,
        };
        TrialOutcome {
            in_reject,
            hit,
            index_decision,
            decision_with_reject: if in_reject { Hypothesis::H1 } else { index_decision },
            decision_without_reject: index_decision,
        }
    }

    fn tally(&self, hypothesis: Hypothesis, trials: u64) -> PairTally {
        let family = match hypothesis {
            Hypothesis::H0 => H0_FAMILY,
            Hypothesis::H1 => H1_FAMILY,
        };
        let width = self.codebook.message_width() as u64;
        (0..trials)
            .into_par_iter()
            .map(|i| {
                let mut rng = trial_rng(self.cfg.seed, family, i);
                let o = self.trial(hypothesis, &mut rng);
                let sent_index = o.hit.is_some();
                let variant = |reject_branch: bool| {
                    let rejected = reject_branch && o.in_reject;
                    let index = !rejected && sent_index;
                    Tally {
                        trials: 1,
                        in_reject: rejected as u64,
                        encoder_miss: (!rejected && !sent_index) as u64,
                        decoder_miss: (index && o.index_decision == Hypothesis::H1) as u64,
                        h0_decisions: (index && o.index_decision == Hypothesis::H0) as u64,
                        bits: if index { width } else { 1 },
                    }
                };
                PairTally {
                    with: variant(true),
                    without: variant(false),
                    increases: (o.decision_with_reject == Hypothesis::H0
                        && o.decision_without_reject == Hypothesis::H1) as u64,
                }
            })
            .reduce(PairTally::default, PairTally::merge)
    }

    fn report(&self, h0: Tally, h1: Tally, reject_mass: f64) -> SimReport {
        let n = self.cfg.n as f64;
        let t0 = h0.trials.max(1) as f64;
        let t1 = h1.trials.max(1) as f64;
        let type1 = h0.trials - h0.h0_decisions;
        let type2 = h1.h0_decisions;
        let beta_hat = type2 as f64 / t1;
        SimReport {
            n: self.cfg.n,
            rate: self.cfg.rate,
            codebook_size: self.codebook.size(),
            message_width: self.codebook.message_width(),
            reject_mass,
            trials_h0: h0.trials,
            trials_h1: h1.trials,
            type1_errors: type1,
            type2_errors: type2,
            alpha_hat: type1 as f64 / t0,
            beta_hat,
            alpha_ci: wilson_interval(type1, h0.trials, Z95),
            beta_ci: wilson_interval(type2, h1.trials, Z95),
            mean_len_per_symbol: h0.bits as f64 / t0 / n,
            mean_len_per_symbol_h1: h1.bits as f64 / t1 / n,
            empirical_exponent: -beta_hat.max(1.0 / t1).log2() / n,
            reject_rate_h0: h0.in_reject as f64 / t0,
            encoder_miss_rate_h0: h0.encoder_miss as f64 / t0,
            decoder_miss_rate_h0: h0.decoder_miss as f64 / t0,
        }
    }

    /// Runs `trials` trials per hypothesis under both variants.
    pub fn run_paired(&self, trials: u64) -> Result<PairedReport> {
        if trials == 0 {
            return Err(domain("need at least one trial per hypothesis"));
        }
        let h0 = self.tally(Hypothesis::H0, trials);
        let h1 = self.tally(Hypothesis::H1, trials);
        Ok(PairedReport {
            with_reject: self.report(h0.with, h1.with, self.reject.analytical_mass()),
            without_reject: self.report(h0.without, h1.without, 0.0),
            beta_increases: h1.increases,
        })
    }
}

/// Monte Carlo estimate of the scheme's error probabilities and message length.
pub fn run_trials(cfg: &NoiselessConfig, trials_per_hypothesis: u64) -> Result<SimReport> {
    Ok(run_paired_trials(cfg, trials_per_hypothesis)?.with_reject)
}

/// [`run_trials`] together with the same trials with `S_n` disabled.
pub fn run_paired_trials(cfg: &NoiselessConfig, trials_per_hypothesis: u64) -> Result<PairedReport> {
    NoiselessScheme::new(cfg)?.run_paired(trials_per_hypothesis)
}
