//! Finite-alphabet information measures, typicality tests and i.i.d. sampling.
//!
//! All logarithms are base 2, so every entropy, divergence and mutual
//! information returned here is in bits. `0 log 0` is taken as `0`.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{domain, Error, Result};

/// Largest deviation of a pmf's total mass from 1 that is silently normalized.
pub const PMF_SUM_TOLERANCE: f64 = 1e-9;

/// Slack (in counts) added to typicality bounds so exact types survive rounding.
pub(crate) const TYPICALITY_SLACK: f64 = 1e-9;

/// A probability mass function over `{0, .., len-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf {
    probs: Vec<f64>,
}

impl Pmf {
    /// Validates and normalizes `probs`.
    ///
    /// Inputs whose sum is within [`PMF_SUM_TOLERANCE`] of 1 are renormalized;
    /// anything further away is rejected.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidPmf("empty alphabet".into()));
        }
        for (i, &p) in probs.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidPmf(format!("entry {i} is {p}")));
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PMF_SUM_TOLERANCE {
            return Err(Error::InvalidPmf(format!("entries sum to {sum}")));
        }
        let probs = probs.into_iter().map(|p| p / sum).collect();
        Ok(Pmf { probs })
    }

    pub fn uniform(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidPmf("empty alphabet".into()));
        }
        Ok(Pmf {
            probs: vec![1.0 / size as f64; size],
        })
    }

    pub fn point_mass(size: usize, symbol: usize) -> Result<Self> {
        if symbol >= size {
            return Err(Error::InvalidPmf(format!(
                "symbol {symbol} outside alphabet of size {size}"
            )));
        }
        let mut probs = vec![0.0; size];
        probs[symbol] = 1.0;
        Ok(Pmf { probs })
    }

    /// Bernoulli law on `{0, 1}` with `P(1) = p`.
    pub fn bernoulli(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(domain(format!("bernoulli parameter {p} outside [0,1]")));
        }
        Pmf::new(vec![1.0 - p, p])
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn get(&self, symbol: usize) -> f64 {
        self.probs[symbol]
    }

    pub fn in_support(&self, symbol: usize) -> bool {
        self.probs.get(symbol).is_some_and(|&p| p > 0.0)
    }

    /// Total probability of a set of symbols (duplicates counted once).
    pub fn mass_of(&self, symbols: &[usize]) -> f64 {
        let mut seen = vec![false; self.len()];
        let mut total = 0.0;
        for &s in symbols {
            if s < self.len() && !seen[s] {
                seen[s] = true;
                total += self.probs[s];
            }
        }
        total
    }

    /// Reusable sampler for repeated draws.
    pub fn sampler(&self) -> PmfSampler {
        PmfSampler {
            index: WeightedIndex::new(&self.probs).expect("validated pmf has positive mass"),
        }
    }
}

/// Draws symbols from a fixed [`Pmf`].
#[derive(Debug, Clone)]
pub struct PmfSampler {
    index: WeightedIndex<f64>,
}

impl PmfSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.index.sample(rng)
    }

    pub fn fill<R: Rng + ?Sized>(&self, out: &mut [usize], rng: &mut R) {
        for slot in out {
            *slot = self.index.sample(rng);
        }
    }
}

/// Joint law `P_XY` on a finite product alphabet with cached marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSource {
    rows: usize,
    cols: usize,
    joint: Vec<f64>,
    x_marginal: Pmf,
    y_marginal: Pmf,
}

impl JointSource {
    /// Builds a joint law from a `|X| x |Y|` table.
    pub fn new(table: Vec<Vec<f64>>) -> Result<Self> {
        let rows = table.len();
        if rows == 0 {
            return Err(Error::InvalidPmf("joint table has no rows".into()));
        }
        let cols = table[0].len();
        if cols == 0 || table.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch(
                "joint table rows must be non-empty and of equal length".into(),
            ));
        }
        let flat = Pmf::new(table.into_iter().flatten().collect())?;
        Ok(Self::from_flat(rows, cols, flat.probs))
    }

    fn from_flat(rows: usize, cols: usize, joint: Vec<f64>) -> Self {
        let mut px = vec![0.0; rows];
        let mut py = vec![0.0; cols];
        for x in 0..rows {
            for y in 0..cols {
                let p = joint[x * cols + y];
                px[x] += p;
                py[y] += p;
            }
        }
        JointSource {
            rows,
            cols,
            joint,
            x_marginal: Pmf { probs: px },
            y_marginal: Pmf { probs: py },
        }
    }

    /// Doubly symmetric binary source: `X ~ Bern(1/2)`, `Y = X xor Bern(alpha)`.
    pub fn dsbs(alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(domain(format!("crossover {alpha} outside [0,1]")));
        }
        JointSource::new(vec![
            vec![0.5 * (1.0 - alpha), 0.5 * alpha],
            vec![0.5 * alpha, 0.5 * (1.0 - alpha)],
        ])
    }

    /// Product law `P_X x P_Y`.
    pub fn product(px: &Pmf, py: &Pmf) -> Self {
        let joint = px
            .probs
            .iter()
            .flat_map(|&a| py.probs.iter().map(move |&b| a * b))
            .collect();
        Self::from_flat(px.len(), py.len(), joint)
    }

    /// `P_X(x) W(y|x)` for a stochastic matrix `W`.
    pub fn from_channel(px: &Pmf, channel: &[Pmf]) -> Result<Self> {
        if channel.len() != px.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} channel rows for an input alphabet of size {}",
                channel.len(),
                px.len()
            )));
        }
        let cols = channel[0].len();
        if channel.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("ragged channel rows".into()));
        }
        let joint = px
            .probs
            .iter()
            .zip(channel)
            .flat_map(|(&a, row)| row.probs.iter().map(move |&w| a * w))
            .collect();
        Ok(Self::from_flat(px.len(), cols, joint))
    }

    pub fn x_size(&self) -> usize {
        self.rows
    }

    pub fn y_size(&self) -> usize {
        self.cols
    }

    pub fn p(&self, x: usize, y: usize) -> f64 {
        self.joint[x * self.cols + y]
    }

    pub fn x_marginal(&self) -> &Pmf {
        &self.x_marginal
    }

    pub fn y_marginal(&self) -> &Pmf {
        &self.y_marginal
    }

    /// The joint law flattened row-major into a pmf over pair indices `x * |Y| + y`.
    pub fn flat(&self) -> &[f64] {
        &self.joint
    }

    pub fn as_pmf(&self) -> Pmf {
        Pmf {
            probs: self.joint.clone(),
        }
    }

    pub fn table(&self) -> Vec<Vec<f64>> {
        self.joint.chunks(self.cols).map(|r| r.to_vec()).collect()
    }

    /// Swaps the roles of `X` and `Y`.
    pub fn transpose(&self) -> Self {
        let mut joint = vec![0.0; self.joint.len()];
        for x in 0..self.rows {
            for y in 0..self.cols {
                joint[y * self.rows + x] = self.p(x, y);
            }
        }
        Self::from_flat(self.cols, self.rows, joint)
    }

    /// Rows of `P_{Y|X}`; rows with `P_X(x) = 0` are uniform.
    pub fn y_given_x(&self) -> Vec<Pmf> {
        (0..self.rows)
            .map(|x| {
                let px = self.x_marginal.probs[x];
                let probs = if px > 0.0 {
                    (0..self.cols).map(|y| self.p(x, y) / px).collect()
                } else {
                    vec![1.0 / self.cols as f64; self.cols]
                };
                Pmf { probs }
            })
            .collect()
    }

    /// The product of this source's own marginals (the law under the alternative).
    pub fn independent_counterpart(&self) -> Self {
        Self::product(&self.x_marginal, &self.y_marginal)
    }
}

/// Conditional law `P_{U|X}`: one pmf over the auxiliary alphabet per source symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxChannel {
    rows: Vec<Pmf>,
    u_size: usize,
}

impl AuxChannel {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let rows = rows.into_iter().map(Pmf::new).collect::<Result<Vec<_>>>()?;
        Self::from_pmfs(rows)
    }

    pub fn from_pmfs(rows: Vec<Pmf>) -> Result<Self> {
        let u_size = rows
            .first()
            .map(Pmf::len)
            .ok_or_else(|| Error::InvalidPmf("aux channel has no rows".into()))?;
        if rows.iter().any(|r| r.len() != u_size) {
            return Err(Error::DimensionMismatch("ragged aux channel rows".into()));
        }
        Ok(AuxChannel { rows, u_size })
    }

    /// Embeds `X` into `U` (`u = x`) with `u_size >= x_size`.
    pub fn identity(x_size: usize, u_size: usize) -> Result<Self> {
        if u_size < x_size {
            return Err(domain(format!(
                "cannot embed {x_size} symbols into {u_size}"
            )));
        }
        let rows = (0..x_size)
            .map(|x| Pmf::point_mass(u_size, x))
            .collect::<Result<Vec<_>>>()?;
        Self::from_pmfs(rows)
    }

    /// Every row equal to `p_u`, so `U` is independent of `X`.
    pub fn constant(x_size: usize, p_u: &Pmf) -> Result<Self> {
        Self::from_pmfs(vec![p_u.clone(); x_size])
    }

    /// Binary symmetric test channel with crossover `d`.
    pub fn bsc(d: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&d) {
            return Err(domain(format!("crossover {d} outside [0,1]")));
        }
        Self::new(vec![vec![1.0 - d, d], vec![d, 1.0 - d]])
    }

    pub fn rows(&self) -> &[Pmf] {
        &self.rows
    }

    pub fn x_size(&self) -> usize {
        self.rows.len()
    }

    pub fn u_size(&self) -> usize {
        self.u_size
    }

    pub fn w(&self, x: usize, u: usize) -> f64 {
        self.rows[x].probs[u]
    }

    /// `P_U = sum_x P_X(x) P_{U|X}(.|x)`.
    pub fn u_marginal(&self, px: &Pmf) -> Pmf {
        let mut pu = vec![0.0; self.u_size];
        for (row, &p) in self.rows.iter().zip(px.probs()) {
            for (acc, &w) in pu.iter_mut().zip(row.probs()) {
                *acc += p * w;
            }
        }
        Pmf { probs: pu }
    }

    /// Joint law of `(U, X)` with `U` as the first coordinate.
    pub fn joint_ux(&self, px: &Pmf) -> Result<JointSource> {
        self.check_x(px.len())?;
        let mut joint = vec![0.0; self.u_size * px.len()];
        for (x, row) in self.rows.iter().enumerate() {
            for u in 0..self.u_size {
                joint[u * px.len() + x] = px.probs[x] * row.probs[u];
            }
        }
        Ok(JointSource::from_flat(self.u_size, px.len(), joint))
    }

    /// Joint law of `(U, Y)` through the Markov chain `U - X - Y`.
    pub fn joint_uy(&self, source: &JointSource) -> Result<JointSource> {
        self.check_x(source.x_size())?;
        let ys = source.y_size();
        let mut joint = vec![0.0; self.u_size * ys];
        for (x, row) in self.rows.iter().enumerate() {
            for u in 0..self.u_size {
                let w = row.probs[u];
                if w == 0.0 {
                    continue;
                }
                for y in 0..ys {
                    joint[u * ys + y] += w * source.p(x, y);
                }
            }
        }
        Ok(JointSource::from_flat(self.u_size, ys, joint))
    }

    fn check_x(&self, x_size: usize) -> Result<()> {
        if x_size != self.rows.len() {
            return Err(Error::DimensionMismatch(format!(
                "aux channel has {} rows, source alphabet has {x_size} symbols",
                self.rows.len()
            )));
        }
        Ok(())
    }
}

/// Symbol counts of a sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmpiricalType {
    counts: Vec<usize>,
    n: usize,
}

impl EmpiricalType {
    /// Counts `seq` over an alphabet of `alphabet_size`; `None` if a symbol is out of range.
    pub fn from_sequence(seq: &[usize], alphabet_size: usize) -> Option<Self> {
        let mut counts = vec![0usize; alphabet_size];
        for &s in seq {
            *counts.get_mut(s)? += 1;
        }
        Some(EmpiricalType {
            counts,
            n: seq.len(),
        })
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn frequency(&self, symbol: usize) -> f64 {
        self.counts[symbol] as f64 / self.n as f64
    }
}

fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        p * p.log2()
    } else {
        0.0
    }
}

/// Shannon entropy in bits.
pub fn entropy(p: &Pmf) -> f64 {
    -p.probs.iter().map(|&x| plogp(x)).sum::<f64>()
}

/// `D(p || q)` in bits.
pub fn kl_divergence(p: &Pmf, q: &Pmf) -> Result<f64> {
    kl_slices(p.probs(), q.probs())
}

pub(crate) fn kl_slices(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch(format!(
            "alphabets of size {} and {}",
            p.len(),
            q.len()
        )));
    }
    let mut d = 0.0;
    for (i, (&a, &b)) in p.iter().zip(q).enumerate() {
        if a > 0.0 {
            if b <= 0.0 {
                return Err(Error::AbsoluteContinuityViolation { symbol: i });
            }
            d += a * (a / b).log2();
        }
    }
    // Rounding can leave tiny negatives for p ~= q.
    Ok(d.max(0.0))
}

/// `I(X;Y) = D(P_XY || P_X P_Y)` in bits.
pub fn mutual_information(j: &JointSource) -> f64 {
    let px = j.x_marginal.probs();
    let py = j.y_marginal.probs();
    let mut mi = 0.0;
    for x in 0..j.rows {
        for y in 0..j.cols {
            let p = j.p(x, y);
            if p > 0.0 {
                mi += p * (p / (px[x] * py[y])).log2();
            }
        }
    }
    mi.max(0.0)
}

fn check_unit(name: &str, a: f64) -> Result<()> {
    if (0.0..=1.0).contains(&a) {
        Ok(())
    } else {
        Err(domain(format!("{name} = {a} outside [0,1]")))
    }
}

/// Binary entropy `h_b(a)` in bits.
pub fn binary_entropy(a: f64) -> Result<f64> {
    check_unit("argument", a)?;
    Ok(binary_entropy_unchecked(a))
}

pub(crate) fn binary_entropy_unchecked(a: f64) -> f64 {
    -plogp(a) - plogp(1.0 - a)
}

/// Inverse of `h_b` restricted to `[0, 1/2]`, by bisection.
pub fn binary_entropy_inv(h: f64) -> Result<f64> {
    check_unit("entropy", h)?;
    if h == 0.0 {
        return Ok(0.0);
    }
    if h == 1.0 {
        return Ok(0.5);
    }
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if binary_entropy_unchecked(mid) < h {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Pick the endpoint closer in entropy.
    let a = if (binary_entropy_unchecked(lo) - h).abs() <= (binary_entropy_unchecked(hi) - h).abs()
    {
        lo
    } else {
        hi
    };
    Ok(a)
}

/// Binary convolution `a * b = a(1-b) + b(1-a)`.
pub fn star(a: f64, b: f64) -> Result<f64> {
    check_unit("a", a)?;
    check_unit("b", b)?;
    Ok(a * (1.0 - b) + b * (1.0 - a))
}

/// Relative-tolerance typicality on raw counts:
/// `|c_x - n P(x)| <= mu n P(x)` for every symbol.
pub(crate) fn counts_typical(counts: &[usize], probs: &[f64], n: usize, mu: f64) -> bool {
    let n = n as f64;
    counts.iter().zip(probs).all(|(&c, &p)| {
        let expected = n * p;
        (c as f64 - expected).abs() <= mu * expected + TYPICALITY_SLACK
    })
}

/// `true` iff `seq` lies in the `mu`-typical set of `p`.
///
/// The tolerance is relative: each symbol frequency may deviate from `P(x)` by
/// at most `mu * P(x)`, so any occurrence of a zero-probability symbol fails.
pub fn is_typical(seq: &[usize], p: &Pmf, mu: f64) -> bool {
    if seq.is_empty() {
        return false;
    }
    match EmpiricalType::from_sequence(seq, p.len()) {
        Some(t) => counts_typical(&t.counts, p.probs(), seq.len(), mu),
        None => false,
    }
}

/// Joint typicality of a pair sequence against `j` (same rule as [`is_typical`]
/// applied to the pair alphabet).
pub fn is_jointly_typical(pairs: &[(usize, usize)], j: &JointSource, mu: f64) -> bool {
    if pairs.is_empty() {
        return false;
    }
    let mut counts = vec![0usize; j.rows * j.cols];
    for &(x, y) in pairs {
        if x >= j.rows || y >= j.cols {
            return false;
        }
        counts[x * j.cols + y] += 1;
    }
    counts_typical(&counts, &j.joint, pairs.len(), mu)
}

/// Joint typicality of two aligned sequences, without materializing pairs.
pub(crate) fn aligned_typical<A, B>(a: &[A], b: &[B], j: &JointSource, mu: f64, scratch: &mut Vec<usize>) -> bool
where
    A: Copy + Into<usize>,
    B: Copy + Into<usize>,
{
    debug_assert_eq!(a.len(), b.len());
    scratch.clear();
    scratch.resize(j.rows * j.cols, 0);
    for (&x, &y) in a.iter().zip(b) {
        // Zero-probability pairs can never be typical.
        let idx = x.into() * j.cols + y.into();
        if j.joint[idx] == 0.0 {
            return false;
        }
        scratch[idx] += 1;
    }
    counts_typical(scratch, &j.joint, a.len(), mu)
}

/// `n` i.i.d. draws from `p`.
pub fn sample_iid<R: Rng + ?Sized>(p: &Pmf, n: usize, rng: &mut R) -> Vec<usize> {
    let sampler = p.sampler();
    (0..n).map(|_| sampler.sample(rng)).collect()
}
