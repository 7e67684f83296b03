//! Two-phase variable-length scheme over a DMC with stop-feedback.
//!
//! Phase 1 spends `q(n)` channel uses repeating `w1` if `x^n in S_n` and `w0`
//! otherwise. The receiver runs a randomized Neyman-Pearson test on those
//! outputs alone. Detecting `w1` means "declare `H1` and stop". Otherwise
//! phase 2 sends the channel codeword of the source index over `n'` uses, and
//! the receiver decodes it by unique joint typicality before testing
//! `(u^n(m), y^n)` against `P_UY`.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::exponent::Dmc;
use crate::info::{aligned_typical, kl_divergence, mutual_information, AuxChannel, JointSource, Pmf, PmfSampler};
use crate::noiseless::{build_codebook, build_reject_set, codebook_size, Codebook, Hypothesis, RejectSetSpec};
use crate::stats::{ks_statistic, trial_rng, wilson_interval, Interval, Z95};

const SOURCE_BOOK_FAMILY: u64 = 0xB00C;
const CHANNEL_BOOK_FAMILY: u64 = 0xB00D;
const H0_FAMILY: u64 = 0xD0;
const H1_FAMILY: u64 = 0xD1;

/// Log-likelihood ratios closer than this are one atom.
const LLR_TOLERANCE: f64 = 1e-9;
/// Refuse LLR distributions with more atoms than this.
pub const MAX_LLR_ATOMS: usize = 2_000_000;

/// Phase-1 signal, sent or detected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Signal {
    /// "Continue": the source sequence is outside `S_n`.
    W0,
    /// "Stop and declare `H1`".
    W1,
}

/// Randomized Neyman-Pearson test between `Gamma_{w0}^q` and `Gamma_{w1}^q`.
///
/// Declares `W1` when the summed LLR `log2(Gamma_{w1}/Gamma_{w0})` exceeds
/// `threshold`, and with probability `gamma` when it equals it.
#[derive(Debug, Clone, PartialEq)]
pub struct NpTest {
    pub threshold: f64,
    pub gamma: f64,
    pub q: usize,
    pub target_fa: f64,
    /// Per-output-symbol LLR, `+-inf` where one law vanishes.
    llr: Vec<f64>,
    /// Exact distribution of the summed LLR as `(value, P_w0, P_w1)`, ascending.
    atoms: Vec<(f64, f64, f64)>,
}

fn same_atom(a: f64, b: f64) -> bool {
    if a.is_infinite() || b.is_infinite() {
        return a == b;
    }
    a == b || (a - b).abs() <= LLR_TOLERANCE * a.abs().max(b.abs()).max(1.0)
}

/// Distribution of the sum of `q` i.i.d. per-symbol LLRs under both laws.
fn llr_distribution(llr: &[f64], g0: &[f64], g1: &[f64], q: usize) -> Result<Vec<(f64, f64, f64)>> {
    let mut single: Vec<(f64, f64, f64)> = llr
        .iter()
        .zip(g0.iter().zip(g1))
        .filter(|(_, (&a, &b))| a > 0.0 || b > 0.0)
        .map(|(&l, (&a, &b))| (l, a, b))
        .collect();
    merge_atoms(&mut single);
    let mut dist = vec![(0.0, 1.0, 1.0)];
    for _ in 0..q {
        let mut next = Vec::with_capacity(dist.len() * single.len());
        for &(s, p0, p1) in &dist {
            for &(l, a, b) in &single {
                let v = s + l;
                // +inf and -inf together have probability zero under both laws.
                if v.is_nan() {
                    continue;
                }
                let (m0, m1) = (p0 * a, p1 * b);
                if m0 > 0.0 || m1 > 0.0 {
                    next.push((v, m0, m1));
                }
            }
        }
        merge_atoms(&mut next);
        if next.len() > MAX_LLR_ATOMS {
            return Err(Error::ResourceLimit(format!(
                "likelihood-ratio distribution exceeds {MAX_LLR_ATOMS} atoms"
            )));
        }
        dist = next;
    }
    Ok(dist)
}

fn merge_atoms(v: &mut Vec<(f64, f64, f64)>) {
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64, f64)> = Vec::with_capacity(v.len());
    for &(x, a, b) in v.iter() {
        match out.last_mut() {
            Some(last) if same_atom(last.0, x) => {
                last.1 += a;
                last.2 += b;
            }
            _ => out.push((x, a, b)),
        }
    }
    *v = out;
}

/// Designs the test with false-alarm probability exactly `target_fa`.
pub fn design_np_test(gamma0: &Pmf, gamma1: &Pmf, q: usize, target_fa: f64) -> Result<NpTest> {
    if gamma0.len() != gamma1.len() {
        return Err(Error::DimensionMismatch("output laws differ in alphabet size".into()));
    }
    if gamma0 == gamma1 {
        return Err(Error::DegenerateChannels);
    }
    if !(target_fa > 0.0 && target_fa < 1.0) {
        return Err(domain(format!("false-alarm target {target_fa} outside (0,1)")));
    }
    if q == 0 {
        return Err(domain("phase 1 needs at least one channel use"));
    }
    let (g0, g1) = (gamma0.probs(), gamma1.probs());
    let llr: Vec<f64> = g0
        .iter()
        .zip(g1)
        .map(|(&a, &b)| match (a > 0.0, b > 0.0) {
            (true, true) => (b / a).log2(),
            (true, false) => f64::NEG_INFINITY,
            (false, true) => f64::INFINITY,
            (false, false) => 0.0,
        })
        .collect();
    let atoms = llr_distribution(&llr, g0, g1, q)?;
    // Walk down from the largest LLR until the false-alarm budget is spent.
    let mut above = 0.0;
    let (mut threshold, mut gamma) = (f64::NEG_INFINITY, 1.0);
    for &(v, p0, _) in atoms.iter().rev() {
        if above + p0 >= target_fa {
            threshold = v;
            gamma = ((target_fa - above) / p0).clamp(0.0, 1.0);
            break;
        }
        above += p0;
    }
    Ok(NpTest {
        threshold,
        gamma,
        q,
        target_fa,
        llr,
        atoms,
    })
}

impl NpTest {
    /// Per-output-symbol log-likelihood ratios.
    pub fn symbol_llr(&self) -> &[f64] {
        &self.llr
    }

    /// Exact `(value, P_w0, P_w1)` atoms of the summed LLR.
    pub fn atoms(&self) -> &[(f64, f64, f64)] {
        &self.atoms
    }

    /// Probability of declaring `W1` on an atom of value `v`.
    fn w1_weight(&self, v: f64) -> f64 {
        if same_atom(v, self.threshold) {
            self.gamma
        } else if v > self.threshold {
            1.0
        } else {
            0.0
        }
    }

    /// Exact `Pr[detect w1 | w0 sent]`.
    pub fn false_alarm(&self) -> f64 {
        self.atoms.iter().map(|&(v, p0, _)| self.w1_weight(v) * p0).sum()
    }

    /// Exact `Pr[detect w0 | w1 sent]`.
    pub fn miss(&self) -> f64 {
        self.atoms.iter().map(|&(v, _, p1)| (1.0 - self.w1_weight(v)) * p1).sum()
    }
}

/// Decides on the phase-1 signal from the channel outputs alone.
///
/// The randomization coin is always drawn so that rng streams stay aligned.
pub fn phase1_detect<R: Rng + ?Sized>(test: &NpTest, outputs: &[usize], rng: &mut R) -> Result<Signal> {
    if outputs.len() != test.q {
        return Err(Error::DimensionMismatch(format!(
            "{} phase-1 outputs, test expects {}",
            outputs.len(),
            test.q
        )));
    }
    let mut s = 0.0;
    for &v in outputs {
        s += *test
            .llr
            .get(v)
            .ok_or_else(|| domain(format!("output symbol {v} outside alphabet")))?;
    }
    let coin: f64 = rng.random();
    let w1 = if s.is_nan() {
        false
    } else if same_atom(s, test.threshold) {
        coin < test.gamma
    } else {
        s > test.threshold
    };
    Ok(if w1 { Signal::W1 } else { Signal::W0 })
}

/// Exact miss probability and the Stein bracket `2^{-q(D -+ mu)}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MissBounds {
    pub exact: f64,
    pub lower: f64,
    pub upper: f64,
    /// `D(Gamma_{w0} || Gamma_{w1})` in bits.
    pub divergence: f64,
    pub inside: bool,
}

pub fn miss_probability_bounds(test: &NpTest, gamma0: &Pmf, gamma1: &Pmf, mu: f64) -> Result<MissBounds> {
    let d = kl_divergence(gamma0, gamma1).unwrap_or(f64::INFINITY);
    let q = test.q as f64;
    let exact = test.miss();
    let lower = (-q * (d + mu)).exp2();
    let upper = (-q * (d - mu)).exp2().min(1.0);
    Ok(MissBounds {
        exact,
        lower,
        upper,
        divergence: d,
        inside: lower <= exact && exact <= upper,
    })
}

/// Parameters of one DMC experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct DmcSchemeConfig {
    pub source: JointSource,
    pub aux: AuxChannel,
    pub dmc: Dmc,
    pub n: usize,
    /// Expected channel uses per source symbol.
    pub kappa: f64,
    pub epsilon: f64,
    /// Mass of `S_n`; `mu = epsilon - epsilon_prime`.
    pub epsilon_prime: f64,
    /// `q(n) = ceil(n^q_exponent)`.
    pub q_exponent: f64,
    pub w0: usize,
    pub w1: usize,
    /// Phase-2 input law.
    pub p_w: Pmf,
    /// Source codebook rate, `I(U;X) + mu`.
    pub rate: f64,
    pub seed: u64,
}

pub const DEFAULT_Q_EXPONENT: f64 = 0.75;

/// Ordered input pair with the largest `D(Gamma_{w0} || Gamma_{w1})`.
pub fn most_distinguishable_inputs(dmc: &Dmc) -> Result<(usize, usize)> {
    let mut best: Option<(f64, usize, usize)> = None;
    for a in 0..dmc.input_size() {
        for b in 0..dmc.input_size() {
            if a == b {
                continue;
            }
            let d = kl_divergence(dmc.output_law(a), dmc.output_law(b)).unwrap_or(f64::INFINITY);
            if d > 0.0 && best.is_none_or(|(bd, _, _)| d > bd) {
                best = Some((d, a, b));
            }
        }
    }
    best.map(|(_, a, b)| (a, b)).ok_or(Error::DegenerateChannels)
}

impl DmcSchemeConfig {
    /// Config with the capacity-achieving phase-2 input law, the most
    /// distinguishable phase-1 pair and `R = I(U;X) + mu`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        source: JointSource,
        aux: AuxChannel,
        dmc: Dmc,
        n: usize,
        kappa: f64,
        epsilon: f64,
        epsilon_prime: f64,
        seed: u64,
    ) -> Result<Self> {
        if aux.x_size() != source.x_size() {
            return Err(Error::DimensionMismatch("aux channel and source disagree on |X|".into()));
        }
        let p_w = dmc.capacity_result()?.input.clone();
        let (w0, w1) = most_distinguishable_inputs(&dmc)?;
        let iux = mutual_information(&aux.joint_ux(source.x_marginal())?);
        let cfg = DmcSchemeConfig {
            source,
            aux,
            dmc,
            n,
            kappa,
            epsilon,
            epsilon_prime,
            q_exponent: DEFAULT_Q_EXPONENT,
            w0,
            w1,
            p_w,
            rate: iux + epsilon - epsilon_prime,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn mu(&self) -> f64 {
        self.epsilon - self.epsilon_prime
    }

    /// `ceil(n^q_exponent)`.
    pub fn q(&self) -> usize {
        ((self.n as f64).powf(self.q_exponent) - 1e-9).ceil().max(1.0) as usize
    }

    /// `ceil(n kappa / (1 - eps'))`.
    pub fn n_prime(&self) -> usize {
        (self.n as f64 * self.kappa / (1.0 - self.epsilon_prime) - 1e-9).ceil().max(1.0) as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n == 0 {
            return bad("n must be >= 1".into());
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad(format!("epsilon {} outside (0,1)", self.epsilon));
        }
        if !(self.epsilon_prime >= 0.0 && self.epsilon_prime < self.epsilon) {
            return bad(format!("epsilon_prime {} outside [0, epsilon)", self.epsilon_prime));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return bad(format!("kappa {} must be positive", self.kappa));
        }
        if !(self.q_exponent > 0.0 && self.q_exponent < 1.0) {
            return bad(format!("q_exponent {} outside (0,1)", self.q_exponent));
        }
        let k = self.dmc.input_size();
        if self.w0 >= k || self.w1 >= k || self.p_w.len() != k {
            return bad("phase-1 inputs or phase-2 law do not match the channel".into());
        }
        if self.dmc.output_size() > 256 || k > 256 {
            return Err(Error::ResourceLimit("channel alphabets are limited to 256 symbols".into()));
        }
        let d = kl_divergence(self.dmc.output_law(self.w0), self.dmc.output_law(self.w1)).unwrap_or(f64::INFINITY);
        if !(d > 0.0) {
            return Err(Error::DegenerateChannels);
        }
        let iwv = self.dmc.mutual_information(&self.p_w)?;
        let limit = self.kappa / (1.0 - self.epsilon_prime) * iwv;
        if !(self.rate < limit + 1e-9) {
            return bad(format!(
                "rate {} is not below kappa/(1-eps') I(W;V) = {limit}",
                self.rate
            ));
        }
        codebook_size(self.n, self.rate).map(|_| ())
    }
}

/// Outcome of one protocol run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DmcTrialRecord {
    pub hypothesis: Hypothesis,
    pub phase1_sent: Signal,
    pub phase1_detect: Signal,
    /// Channel uses until stop-feedback.
    pub tau: usize,
    pub decision: Hypothesis,
    /// Phase-2 channel index sent, `0` for encoder failure; `None` if stopped after phase 1.
    pub sent_index: Option<usize>,
    /// Uniquely decoded channel index; `None` if stopped or decoding failed.
    pub decoded_index: Option<usize>,
}

/// Codebooks, reject set and phase-1 test for one configuration.
#[derive(Debug, Clone)]
pub struct DmcScheme {
    cfg: DmcSchemeConfig,
    q: usize,
    n_prime: usize,
    source_book: Codebook,
    /// Entry `m + 1` carries index `m`; entry 1 is the failure word.
    channel_book: Codebook,
    reject: RejectSetSpec,
    test: NpTest,
    joint_ux: JointSource,
    joint_uy: JointSource,
    joint_wv: JointSource,
    pair_sampler: PmfSampler,
    x_sampler: PmfSampler,
    y_sampler: PmfSampler,
    channel: Vec<PmfSampler>,
}

impl DmcScheme {
    pub fn new(cfg: &DmcSchemeConfig) -> Result<Self> {
        cfg.validate()?;
        let px = cfg.source.x_marginal();
        let (q, n_prime) = (cfg.q(), cfg.n_prime());
        let p_u = cfg.aux.u_marginal(px);
        let source_book = build_codebook(&p_u, cfg.n, cfg.rate, &mut trial_rng(cfg.seed, SOURCE_BOOK_FAMILY, 0))?;
        // M + 1 channel codewords: log2(M + 1) / n' is the rate that fits.
        let m = source_book.size();
        let channel_rate = ((m + 1) as f64).log2() / n_prime as f64;
        let channel_book = build_codebook(&cfg.p_w, n_prime, channel_rate, &mut trial_rng(cfg.seed, CHANNEL_BOOK_FAMILY, 0))?;
        if channel_book.size() != m + 1 {
            return Err(Error::ResourceLimit(format!(
                "channel codebook has {} entries, need {}",
                channel_book.size(),
                m + 1
            )));
        }
        let reject = build_reject_set(px, cfg.n, cfg.mu(), cfg.epsilon_prime)?;
        let test = design_np_test(cfg.dmc.output_law(cfg.w0), cfg.dmc.output_law(cfg.w1), q, cfg.mu() / 3.0)?;
        Ok(DmcScheme {
            q,
            n_prime,
            source_book,
            channel_book,
            reject,
            test,
            joint_ux: cfg.aux.joint_ux(px)?,
            joint_uy: cfg.aux.joint_uy(&cfg.source)?,
            joint_wv: JointSource::from_channel(&cfg.p_w, cfg.dmc.rows())?,
            pair_sampler: cfg.source.as_pmf().sampler(),
            x_sampler: px.sampler(),
            y_sampler: cfg.source.y_marginal().sampler(),
            channel: cfg.dmc.rows().iter().map(Pmf::sampler).collect(),
            cfg: cfg.clone(),
        })
    }

    pub fn config(&self) -> &DmcSchemeConfig {
        &self.cfg
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn n_prime(&self) -> usize {
        self.n_prime
    }

    pub fn np_test(&self) -> &NpTest {
        &self.test
    }

    pub fn reject_set(&self) -> &RejectSetSpec {
        &self.reject
    }

    pub fn source_codebook(&self) -> &Codebook {
        &self.source_book
    }

    /// Channel codeword carrying index `m` (`0` is the failure word).
    pub fn channel_codeword(&self, m: usize) -> &[u8] {
        self.channel_book.codeword(m + 1)
    }

    fn transmit<R: Rng + ?Sized>(&self, inputs: impl Iterator<Item = usize>, rng: &mut R) -> Vec<usize> {
        inputs.map(|w| self.channel[w].sample(rng)).collect()
    }

    /// Unique `m` with `(w^{n'}(m), v^{n'})` jointly `mu`-typical.
    pub fn decode_channel(&self, v: &[usize]) -> Option<usize> {
        let mut scratch = Vec::new();
        let mut found = None;
        for (i, w) in self.channel_book.codewords().enumerate() {
            if aligned_typical(w, v, &self.joint_wv, self.cfg.mu(), &mut scratch) {
                if found.is_some() {
                    return None;
                }
                found = Some(i);
            }
        }
        found
    }

    /// One full protocol run. Draw order: source pair, reject coin, phase-1
    /// channel noise, detector coin, encoder pick, phase-2 channel noise.
    pub fn trial<R: Rng + ?Sized>(&self, hypothesis: Hypothesis, rng: &mut R) -> DmcTrialRecord {
        let n = self.cfg.n;
        let ys = self.cfg.source.y_size();
        let (x, y): (Vec<usize>, Vec<usize>) = match hypothesis {
            Hypothesis::H0 => (0..n)
                .map(|_| {
                    let k = self.pair_sampler.sample(rng);
                    (k / ys, k % ys)
                })
                .unzip(),
            Hypothesis::H1 => (0..n)
                .map(|_| (self.x_sampler.sample(rng), self.y_sampler.sample(rng)))
                .unzip(),
        };
        let coin: f64 = rng.random();
        let sent = if self.reject.contains(&x, coin) { Signal::W1 } else { Signal::W0 };
        let w = match sent {
            Signal::W0 => self.cfg.w0,
            Signal::W1 => self.cfg.w1,
        };
        let outputs = self.transmit(std::iter::repeat_n(w, self.q), rng);
        // The stop rule sees the phase-1 outputs and nothing else.
        let detect = phase1_detect(&self.test, &outputs, rng).expect("phase-1 outputs match the test");
        if detect == Signal::W1 {
            return DmcTrialRecord {
                hypothesis,
                phase1_sent: sent,
                phase1_detect: detect,
                tau: self.q,
                decision: Hypothesis::H1,
                sent_index: None,
                decoded_index: None,
            };
        }
        let index = self.encode_source(&x, rng);
        let v = self.transmit(self.channel_codeword(index).iter().map(|&s| s as usize), rng);
        let decoded = self.decode_channel(&v);
        let mut scratch = Vec::new();
        let decision = match decoded {
            Some(m) if m >= 1 && aligned_typical(self.source_book.codeword(m), &y, &self.joint_uy, self.cfg.mu(), &mut scratch) => {
                Hypothesis::H0
            }
            _ => Hypothesis::H1,
        };
        DmcTrialRecord {
            hypothesis,
            phase1_sent: sent,
            phase1_detect: detect,
            tau: self.q + self.n_prime,
            decision,
            sent_index: Some(index),
            decoded_index: decoded,
        }
    }

    /// Random `mu/2`-jointly typical codeword index, `0` if none.
    fn encode_source<R: Rng + ?Sized>(&self, x: &[usize], rng: &mut R) -> usize {
        let mut scratch = Vec::new();
        let hits: Vec<usize> = (1..=self.source_book.size())
            .filter(|&m| aligned_typical(self.source_book.codeword(m), x, &self.joint_ux, self.cfg.mu() / 2.0, &mut scratch))
            .collect();
        if hits.is_empty() {
            0
        } else {
            hits[rng.random_range(0..hits.len())]
        }
    }

    /// `Pr[L = 1] = (1 - s)(1 - fa) + s * miss` with `s = Pr[X^n in S_n]`.
    pub fn analytical_continue_probability(&self) -> f64 {
        let s = self.reject.analytical_mass();
        (1.0 - s) * (1.0 - self.test.false_alarm()) + s * self.test.miss()
    }

    /// `(q + n' Pr[L = 1]) / n`.
    pub fn analytical_mean_tau_over_n(&self) -> f64 {
        (self.q as f64 + self.n_prime as f64 * self.analytical_continue_probability()) / self.cfg.n as f64
    }

    fn tally(&self, hypothesis: Hypothesis, trials: u64) -> DmcTally {
        let family = match hypothesis {
            Hypothesis::H0 => H0_FAMILY,
            Hypothesis::H1 => H1_FAMILY,
        };
        (0..trials)
            .into_par_iter()
            .map(|i| DmcTally::of(&self.trial(hypothesis, &mut trial_rng(self.cfg.seed, family, i))))
            .reduce(DmcTally::default, DmcTally::merge)
    }

    pub fn run(&self, trials_per_hypothesis: u64) -> Result<DmcSimReport> {
        if trials_per_hypothesis == 0 {
            return Err(domain("need at least one trial per hypothesis"));
        }
        let h0 = self.tally(Hypothesis::H0, trials_per_hypothesis);
        let h1 = self.tally(Hypothesis::H1, trials_per_hypothesis);
        let all = h0.clone().merge(h1.clone());
        let n = self.cfg.n as f64;
        let t0 = h0.trials as f64;
        let t1 = h1.trials as f64;
        let type1 = h0.trials - h0.h0_decisions;
        let type2 = h1.h0_decisions;
        let beta_hat = type2 as f64 / t1;
        let mean_tau = |t: &DmcTally| t.tau_sum as f64 / t.trials as f64 / n;
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let samples = |t: &DmcTally| -> Vec<f64> {
            t.tau_hist
                .iter()
                .flat_map(|(&tau, &c)| std::iter::repeat_n(tau as f64, c as usize))
                .collect()
        };
        Ok(DmcSimReport {
            n: self.cfg.n,
            q: self.q,
            n_prime: self.n_prime,
            trials_h0: h0.trials,
            trials_h1: h1.trials,
            type1_errors: type1,
            type2_errors: type2,
            alpha_hat: type1 as f64 / t0,
            beta_hat,
            alpha_ci: wilson_interval(type1, h0.trials, Z95),
            beta_ci: wilson_interval(type2, h1.trials, Z95),
            empirical_exponent: -beta_hat.max(1.0 / t1).log2() / n,
            mean_tau_over_n: mean_tau(&all),
            mean_tau_over_n_h0: mean_tau(&h0),
            mean_tau_over_n_h1: mean_tau(&h1),
            continue_hat: ratio(all.continued, all.trials),
            phase1_w0_sent: all.w0_sent,
            phase1_false_alarms: all.false_alarms,
            phase1_w1_sent: all.w1_sent,
            phase1_misses: all.misses,
            phase1_fa_hat: ratio(all.false_alarms, all.w0_sent),
            phase1_miss_hat: ratio(all.misses, all.w1_sent),
            phase1_fa_ci: wilson_interval(all.false_alarms, all.w0_sent, Z95),
            channel_decoding_error_rate: ratio(all.decode_errors, all.continued),
            exact_false_alarm: self.test.false_alarm(),
            exact_miss: self.test.miss(),
            analytical_continue: self.analytical_continue_probability(),
            analytical_mean_tau_over_n: self.analytical_mean_tau_over_n(),
            tau_ks_statistic: ks_statistic(&samples(&h0), &samples(&h1)),
            tau_histogram_h0: h0.tau_hist.into_iter().collect(),
            tau_histogram_h1: h1.tau_hist.into_iter().collect(),
        })
    }
}

#[derive(Debug, Clone, Default)]
struct DmcTally {
    trials: u64,
    h0_decisions: u64,
    tau_sum: u64,
    continued: u64,
    w0_sent: u64,
    w1_sent: u64,
    false_alarms: u64,
    misses: u64,
    decode_errors: u64,
    tau_hist: BTreeMap<usize, u64>,
}

impl DmcTally {
    fn of(r: &DmcTrialRecord) -> Self {
        let mut tau_hist = BTreeMap::new();
        tau_hist.insert(r.tau, 1);
        DmcTally {
            trials: 1,
            h0_decisions: (r.decision == Hypothesis::H0) as u64,
            tau_sum: r.tau as u64,
            continued: (r.phase1_detect == Signal::W0) as u64,
            w0_sent: (r.phase1_sent == Signal::W0) as u64,
            w1_sent: (r.phase1_sent == Signal::W1) as u64,
            false_alarms: (r.phase1_sent == Signal::W0 && r.phase1_detect == Signal::W1) as u64,
            misses: (r.phase1_sent == Signal::W1 && r.phase1_detect == Signal::W0) as u64,
            decode_errors: (r.sent_index.is_some() && r.decoded_index != r.sent_index) as u64,
            tau_hist,
        }
    }

    fn merge(mut self, o: DmcTally) -> DmcTally {
        self.trials += o.trials;
        self.h0_decisions += o.h0_decisions;
        self.tau_sum += o.tau_sum;
        self.continued += o.continued;
        self.w0_sent += o.w0_sent;
        self.w1_sent += o.w1_sent;
        self.false_alarms += o.false_alarms;
        self.misses += o.misses;
        self.decode_errors += o.decode_errors;
        for (k, v) in o.tau_hist {
            *self.tau_hist.entry(k).or_insert(0) += v;
        }
        self
    }
}

/// Monte Carlo estimates for the DMC scheme with their analytical counterparts.
#[derive(Debug, Clone, PartialEq)]
pub struct DmcSimReport {
    pub n: usize,
    pub q: usize,
    pub n_prime: usize,
    pub trials_h0: u64,
    pub trials_h1: u64,
    pub type1_errors: u64,
    pub type2_errors: u64,
    pub alpha_hat: f64,
    pub beta_hat: f64,
    pub alpha_ci: Interval,
    pub beta_ci: Interval,
    pub empirical_exponent: f64,
    /// Mean stopping time over all trials, per source symbol.
    pub mean_tau_over_n: f64,
    pub mean_tau_over_n_h0: f64,
    pub mean_tau_over_n_h1: f64,
    /// Fraction of trials that entered phase 2.
    pub continue_hat: f64,
    pub phase1_w0_sent: u64,
    pub phase1_false_alarms: u64,
    pub phase1_w1_sent: u64,
    pub phase1_misses: u64,
    pub phase1_fa_hat: f64,
    pub phase1_miss_hat: f64,
    pub phase1_fa_ci: Interval,
    /// Fraction of phase-2 runs whose channel index was not recovered.
    pub channel_decoding_error_rate: f64,
    pub exact_false_alarm: f64,
    pub exact_miss: f64,
    /// Analytical `Pr[L = 1]`.
    pub analytical_continue: f64,
    pub analytical_mean_tau_over_n: f64,
    /// Two-sample KS distance between stopping times under `H0` and `H1`.
    pub tau_ks_statistic: f64,
    pub tau_histogram_h0: Vec<(usize, u64)>,
    pub tau_histogram_h1: Vec<(usize, u64)>,
}

/// One protocol run with the given scheme.
pub fn run_dmc_trial<R: Rng + ?Sized>(scheme: &DmcScheme, hypothesis: Hypothesis, rng: &mut R) -> DmcTrialRecord {
    scheme.trial(hypothesis, rng)
}

/// Monte Carlo evaluation of the two-phase scheme.
pub fn run_dmc_trials(cfg: &DmcSchemeConfig, trials_per_hypothesis: u64) -> Result<DmcSimReport> {
    DmcScheme::new(cfg)?.run(trials_per_hypothesis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::info::star;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bern_noise(p: f64) -> Pmf {
        Pmf::new(vec![1.0 - p, p]).unwrap()
    }

    fn binom_pmf(n: usize, k: usize, p: f64) -> f64 {
        let c = (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64);
        c * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
    }

    #[test]
    fn degenerate_and_bad_targets() {
        let g = bern_noise(0.2);
        assert_eq!(design_np_test(&g, &g, 3, 0.1), Err(Error::DegenerateChannels));
        assert!(design_np_test(&g, &bern_noise(0.7), 3, 0.0).is_err());
    }

    #[test]
    fn binomial_test_has_exact_false_alarm() {
        let (g0, g1) = (bern_noise(0.1), bern_noise(0.9));
        let t = design_np_test(&g0, &g1, 20, 0.05).unwrap();
        assert!((t.false_alarm() - 0.05).abs() < 1e-12);
        // Oracle: the LLR increases with the number of ones k, so the test
        // rejects k > k* and randomizes at k*.
        let tail = |k0: usize, p: f64| (k0..=20).map(|k| binom_pmf(20, k, p)).sum::<f64>();
        let kstar = (0..=20).find(|&k| tail(k + 1, 0.1) <= 0.05 && tail(k, 0.1) > 0.05).unwrap();
        let gamma = (0.05 - tail(kstar + 1, 0.1)) / binom_pmf(20, kstar, 0.1);
        assert!((t.gamma - gamma).abs() < 1e-9);
        let expected_t = kstar as f64 * 9f64.log2() - (20 - kstar) as f64 * 9f64.log2();
        assert!((t.threshold - expected_t).abs() < 1e-9);
        let miss = 1.0 - tail(kstar + 1, 0.9) - gamma * binom_pmf(20, kstar, 0.9);
        assert!((t.miss() - miss).abs() < 1e-12);
    }

    #[test]
    fn threshold_on_an_atom_randomizes() {
        let (g0, g1) = (bern_noise(0.3), bern_noise(0.7));
        let t = design_np_test(&g0, &g1, 1, 0.15).unwrap();
        assert!(t.gamma > 0.0 && t.gamma < 1.0);
        assert!((t.false_alarm() - 0.15).abs() < 1e-15);
    }

    #[test]
    fn single_sample_miss_by_hand() {
        let (g0, g1) = (bern_noise(0.3), bern_noise(0.7));
        let t = design_np_test(&g0, &g1, 1, 0.3).unwrap();
        // Declare w1 exactly on output 1: fa = 0.3, miss = P_w1(output 0) = 0.3.
        assert!((t.miss() - 0.3).abs() < 1e-12);
        let b = miss_probability_bounds(&t, &g0, &g1, 0.1).unwrap();
        assert!((b.exact - 0.3).abs() < 1e-12);
    }

    #[test]
    fn disjoint_supports_never_miss() {
        let g0 = Pmf::new(vec![0.5, 0.5, 0.0, 0.0]).unwrap();
        let g1 = Pmf::new(vec![0.0, 0.0, 0.2, 0.8]).unwrap();
        let t = design_np_test(&g0, &g1, 1, 0.01).unwrap();
        assert_eq!(t.miss(), 0.0);
        let mut r = ChaCha8Rng::seed_from_u64(0);
        for v in 0..2 {
            assert_eq!(phase1_detect(&t, &[v], &mut r).unwrap(), Signal::W0);
        }
        for v in 2..4 {
            assert_eq!(phase1_detect(&t, &[v], &mut r).unwrap(), Signal::W1);
        }
        let b = miss_probability_bounds(&t, &g0, &g1, 0.1).unwrap();
        assert_eq!(b.exact, 0.0);
        assert!(b.divergence.is_infinite());
    }

    #[test]
    fn detector_obeys_gamma_at_threshold() {
        let (g0, g1) = (bern_noise(0.3), bern_noise(0.7));
        let mut t = design_np_test(&g0, &g1, 1, 0.15).unwrap();
        t.gamma = 1.0;
        let mut r = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(phase1_detect(&t, &[1], &mut r).unwrap(), Signal::W1);
            assert_eq!(phase1_detect(&t, &[0], &mut r).unwrap(), Signal::W0);
        }
    }

    #[test]
    fn detector_reproduces_false_alarm() {
        let (g0, g1) = (bern_noise(0.2), bern_noise(0.6));
        let t = design_np_test(&g0, &g1, 7, 0.04).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(2);
        let s = g0.sampler();
        let trials = 100_000;
        let hits = (0..trials)
            .filter(|_| {
                let v: Vec<usize> = (0..7).map(|_| s.sample(&mut r)).collect();
                phase1_detect(&t, &v, &mut r).unwrap() == Signal::W1
            })
            .count() as u64;
        let sd = (0.04 * 0.96 / trials as f64).sqrt();
        assert!((hits as f64 / trials as f64 - 0.04).abs() < 4.0 * sd, "{hits}");
    }

    #[test]
    fn long_test_miss_sits_in_stein_bracket() {
        let (g0, g1) = (bern_noise(0.4), bern_noise(0.6));
        let t = design_np_test(&g0, &g1, 200, 0.1 / 3.0).unwrap();
        let b = miss_probability_bounds(&t, &g0, &g1, 0.1).unwrap();
        assert!(b.inside, "{b:?}");
        assert!((b.divergence - 0.2 * 1.5f64.log2()).abs() < 1e-12);
        // With a wide per-sample LLR spread the sqrt(q) correction still
        // exceeds mu at q = 200: the bracket only holds asymptotically.
        let (h0, h1) = (bern_noise(0.1), bern_noise(0.9));
        let wide = design_np_test(&h0, &h1, 200, 0.1 / 3.0).unwrap();
        let b = miss_probability_bounds(&wide, &h0, &h1, 0.1).unwrap();
        assert!(!b.inside && b.exact > b.upper);
    }

    fn bsc_cfg(eps_prime: f64, trials_seed: u64) -> DmcSchemeConfig {
        DmcSchemeConfig::new(
            JointSource::dsbs(0.1).unwrap(),
            AuxChannel::bsc(0.125).unwrap(),
            Dmc::bsc(0.05).unwrap(),
            16,
            1.0,
            0.2,
            eps_prime,
            trials_seed,
        )
        .unwrap()
    }

    #[test]
    fn config_defaults() {
        let cfg = bsc_cfg(0.15, 0);
        assert_eq!(cfg.q(), 8);
        assert_eq!(cfg.n_prime(), 19);
        assert_eq!((cfg.w0, cfg.w1), (0, 1));
        assert!((cfg.mu() - 0.05).abs() < 1e-15);
        let iux = mutual_information(&cfg.aux.joint_ux(cfg.source.x_marginal()).unwrap());
        assert!((cfg.rate - (iux + 0.05)).abs() < 1e-12);
        // A rate above kappa C / (1 - eps') is refused.
        let mut bad = cfg.clone();
        bad.kappa = 0.3;
        assert!(matches!(bad.validate(), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn every_trial_stops_at_one_of_two_times() {
        let scheme = DmcScheme::new(&bsc_cfg(0.15, 3)).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(4);
        for i in 0..2000 {
            let h = if i % 2 == 0 { Hypothesis::H0 } else { Hypothesis::H1 };
            let rec = scheme.trial(h, &mut r);
            assert!(rec.tau == scheme.q() || rec.tau == scheme.q() + scheme.n_prime());
            if rec.phase1_detect == Signal::W1 {
                assert_eq!(rec.tau, scheme.q());
                assert_eq!(rec.decision, Hypothesis::H1);
            }
        }
    }

    #[test]
    fn noiseless_channel_decodes_exactly() {
        let cfg = DmcSchemeConfig::new(
            JointSource::dsbs(0.1).unwrap(),
            AuxChannel::bsc(0.125).unwrap(),
            Dmc::identity(2).unwrap(),
            16,
            1.0625,
            0.2,
            0.15,
            5,
        )
        .unwrap();
        let scheme = DmcScheme::new(&cfg).unwrap();
        let m_max = scheme.source_codebook().size();
        let mut words: Vec<&[u8]> = (0..=m_max).map(|m| scheme.channel_codeword(m)).collect();
        words.sort();
        assert!(words.windows(2).all(|w| w[0] != w[1]), "codewords collide");
        // Output equals input, so any other codeword pairs off the diagonal of
        // P_WV and only the sent word can be typical; it is iff its own type is.
        let mut decoded = 0;
        for m in 0..=m_max {
            let v: Vec<usize> = scheme.channel_codeword(m).iter().map(|&s| s as usize).collect();
            let typical = crate::info::is_typical(&v, &cfg.p_w, cfg.mu());
            assert_eq!(scheme.decode_channel(&v), typical.then_some(m));
            decoded += typical as usize;
        }
        assert!(decoded > 0);
    }

    #[test]
    fn continue_probability_without_reject_set() {
        let scheme = DmcScheme::new(&bsc_cfg(0.0, 7)).unwrap();
        assert_eq!(scheme.reject_set().analytical_mass(), 0.0);
        let p = scheme.analytical_continue_probability();
        assert!((p - (1.0 - 0.2 / 3.0)).abs() < 1e-12);
        let rep = scheme.run(20_000).unwrap();
        let sd = (p * (1.0 - p) / 40_000.0).sqrt();
        assert!((rep.continue_hat - p).abs() < 4.0 * sd);
    }

    #[test]
    fn runs_are_deterministic_and_consistent() {
        let cfg = bsc_cfg(0.15, 9);
        let a = run_dmc_trials(&cfg, 5000).unwrap();
        assert_eq!(a, run_dmc_trials(&cfg, 5000).unwrap());
        let q = a.q as f64;
        let expect = (q + a.n_prime as f64 * a.continue_hat) / a.n as f64;
        assert!((a.mean_tau_over_n - expect).abs() < 1e-9);
        assert!(a.mean_tau_over_n >= q / 16.0 && a.mean_tau_over_n <= (q + a.n_prime as f64) / 16.0);
    }

    #[test]
    fn capacity_input_law_feeds_phase_two() {
        let cfg = bsc_cfg(0.15, 0);
        assert!((cfg.p_w.get(0) - 0.5).abs() < 1e-6);
        // P_UY is the cascade of the aux BSC and the source BSC.
        let scheme = DmcScheme::new(&cfg).unwrap();
        let juy = &scheme.joint_uy;
        assert!((juy.p(0, 1) - star(0.125, 0.1).unwrap() / 2.0).abs() < 1e-12);
    }
}
