//! Single-letter optimal type-II exponents.
//!
//! The variable-length exponent is
//!
//! ```text
//! theta_eps(R) = max { I(U;Y) : P_{U|X}, (1 - eps) I(U;X) <= R }
//! ```
//!
//! with `U - X - Y` a Markov chain. Over a DMC with stop-feedback the rate is
//! replaced by `kappa * C`. The fixed-length exponent is the `eps = 0` case.
//!
//! The maximization is non-concave in `P_{U|X}`. [`solve_vl_exponent`] runs a
//! projected gradient ascent over the product of row simplices from several
//! starting points. Iterates are kept feasible by blending towards the
//! constant channel with the same `P_U`; `I(U;X)` is convex along that segment
//! and vanishes at its end, so a bisection finds the feasible boundary.

use std::sync::OnceLock;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::info::{
    binary_entropy_inv, binary_entropy_unchecked, entropy, kl_slices, mutual_information,
    star, AuxChannel, JointSource, Pmf,
};
use crate::stats::trial_rng;

const SOLVER_STREAM: u64 = 0x5011;

/// Input to the exponent solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentQuery {
    pub source: JointSource,
    /// Expected message length budget, bits per source symbol.
    pub rate: f64,
    /// Largest admissible type-I error probability.
    pub epsilon: f64,
    /// Size of the auxiliary alphabet `U`.
    pub u_cardinality: usize,
}

impl ExponentQuery {
    /// Query with the default auxiliary alphabet size `|X| + 1`.
    pub fn new(source: JointSource, rate: f64, epsilon: f64) -> Result<Self> {
        let u_cardinality = source.x_size() + 1;
        let q = ExponentQuery {
            source,
            rate,
            epsilon,
            u_cardinality,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn with_u_cardinality(mut self, u_cardinality: usize) -> Result<Self> {
        self.u_cardinality = u_cardinality;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate >= 0.0 && self.rate.is_finite()) {
            return Err(domain(format!("rate {} must be finite and >= 0", self.rate)));
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(domain(format!("epsilon {} outside [0,1)", self.epsilon)));
        }
        if self.u_cardinality == 0 {
            return Err(domain("u_cardinality must be >= 1"));
        }
        Ok(())
    }

    /// The equivalent fixed-length rate `R / (1 - eps)`.
    pub fn effective_rate(&self) -> f64 {
        self.rate / (1.0 - self.epsilon)
    }
}

/// Maximizer and value of an exponent optimization.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentResult {
    /// Optimal exponent, bits.
    pub theta: f64,
    pub optimizer: AuxChannel,
    /// `I(U;X)` at the optimizer.
    pub iux: f64,
    /// `I(U;Y)` at the optimizer.
    pub iuy: f64,
    /// `R - (1 - eps) I(U;X)`.
    pub constraint_slack: f64,
    /// Number of starting points that met the stopping rule.
    pub converged_starts: usize,
}

/// Tuning knobs of the multi-start optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Random starting points in addition to the deterministic ones.
    pub restarts: usize,
    pub seed: u64,
    pub max_iterations: usize,
    /// Stop once the objective gained less than `min_improvement` over this many iterations.
    pub window: usize,
    pub min_improvement: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            restarts: 32,
            seed: 0,
            max_iterations: 20_000,
            window: 50,
            min_improvement: 1e-7,
        }
    }
}

/// Discrete memoryless channel `Gamma_{V|W}`.
#[derive(Debug, Clone)]
pub struct Dmc {
    rows: Vec<Pmf>,
    capacity_cache: OnceLock<CapacityResult>,
}

impl PartialEq for Dmc {
    fn eq(&self, other: &Self) -> bool {
        self.rows == other.rows
    }
}

impl Dmc {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let rows = rows.into_iter().map(Pmf::new).collect::<Result<Vec<_>>>()?;
        Self::from_pmfs(rows)
    }

    pub fn from_pmfs(rows: Vec<Pmf>) -> Result<Self> {
        let outputs = rows
            .first()
            .map(Pmf::len)
            .ok_or_else(|| Error::InvalidPmf("channel has no inputs".into()))?;
        if rows.iter().any(|r| r.len() != outputs) {
            return Err(Error::DimensionMismatch("ragged channel rows".into()));
        }
        Ok(Dmc {
            rows,
            capacity_cache: OnceLock::new(),
        })
    }

    /// Binary symmetric channel with crossover `p`.
    pub fn bsc(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(domain(format!("crossover {p} outside [0,1]")));
        }
        Self::new(vec![vec![1.0 - p, p], vec![p, 1.0 - p]])
    }

    /// Binary erasure channel; output `2` is the erasure.
    pub fn bec(e: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&e) {
            return Err(domain(format!("erasure probability {e} outside [0,1]")));
        }
        Self::new(vec![vec![1.0 - e, 0.0, e], vec![0.0, 1.0 - e, e]])
    }

    /// Noiseless channel on `k` symbols.
    pub fn identity(k: usize) -> Result<Self> {
        let rows = (0..k)
            .map(|i| Pmf::point_mass(k, i))
            .collect::<Result<Vec<_>>>()?;
        Self::from_pmfs(rows)
    }

    pub fn rows(&self) -> &[Pmf] {
        &self.rows
    }

    /// Output law for input symbol `w`.
    pub fn output_law(&self, w: usize) -> &Pmf {
        &self.rows[w]
    }

    pub fn input_size(&self) -> usize {
        self.rows.len()
    }

    pub fn output_size(&self) -> usize {
        self.rows[0].len()
    }

    /// Cached capacity (default tolerances).
    pub fn capacity(&self) -> Result<f64> {
        self.capacity_result().map(|c| c.capacity)
    }

    /// Cached capacity together with the maximizing input law.
    pub fn capacity_result(&self) -> Result<&CapacityResult> {
        if let Some(c) = self.capacity_cache.get() {
            return Ok(c);
        }
        let c = blahut_arimoto(self, CAPACITY_TOLERANCE, CAPACITY_MAX_ITERATIONS)?;
        Ok(self.capacity_cache.get_or_init(|| c))
    }

    /// `I(W;V)` for input law `pw`.
    pub fn mutual_information(&self, pw: &Pmf) -> Result<f64> {
        Ok(mutual_information(&JointSource::from_channel(pw, &self.rows)?))
    }
}

pub const CAPACITY_TOLERANCE: f64 = 1e-9;
pub const CAPACITY_MAX_ITERATIONS: usize = 100_000;

/// Outcome of the Blahut-Arimoto iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityResult {
    /// Lower bound `I(p; Gamma)` at the final input law.
    pub capacity: f64,
    /// Upper bound `max_w D(Gamma_w || q)`.
    pub upper_bound: f64,
    pub input: Pmf,
    pub iterations: usize,
}

/// DMC capacity in bits per channel use.
pub fn capacity(dmc: &Dmc) -> Result<f64> {
    dmc.capacity()
}

/// Blahut-Arimoto alternating maximization, stopped when the standard lower
/// and upper capacity bounds are within `tolerance`.
pub fn blahut_arimoto(dmc: &Dmc, tolerance: f64, max_iterations: usize) -> Result<CapacityResult> {
    let k = dmc.input_size();
    let m = dmc.output_size();
    let mut p = vec![1.0 / k as f64; k];
    let mut q = vec![0.0; m];
    let mut d = vec![0.0; k];
    for it in 0..max_iterations {
        q.iter_mut().for_each(|v| *v = 0.0);
        for (pw, row) in p.iter().zip(&dmc.rows) {
            for (qv, &g) in q.iter_mut().zip(row.probs()) {
                *qv += pw * g;
            }
        }
        for (dw, row) in d.iter_mut().zip(&dmc.rows) {
            // Every input keeps positive weight, so q dominates each row.
            *dw = kl_slices(row.probs(), &q)?;
        }
        let lower: f64 = p.iter().zip(&d).map(|(a, b)| a * b).sum();
        let upper = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if upper - lower <= tolerance {
            return Ok(CapacityResult {
                capacity: lower.max(0.0),
                upper_bound: upper,
                input: Pmf::new(p)?,
                iterations: it,
            });
        }
        let dmax = upper;
        let mut z = 0.0;
        for (pw, dw) in p.iter_mut().zip(&d) {
            *pw *= (dw - dmax).exp2();
            z += *pw;
        }
        p.iter_mut().for_each(|v| *v /= z);
    }
    Err(Error::NonConvergence(format!(
        "Blahut-Arimoto did not reach tolerance {tolerance} in {max_iterations} iterations"
    )))
}

/// Closed-form exponent for the doubly symmetric binary source,
/// `1 - h_b(h_b^{-1}(1 - R/(1-eps)) * alpha)`.
///
/// `R / (1 - eps)` is clamped to `[0, 1]`; beyond 1 the rate constraint is
/// inactive and the exponent saturates at `1 - h_b(alpha) = I(X;Y)`.
pub fn binary_example_exponent(alpha: f64, rate: f64, epsilon: f64) -> Result<f64> {
    if !(0.0..=0.5).contains(&alpha) {
        return Err(domain(format!("alpha {alpha} outside [0, 1/2]")));
    }
    check_rate_epsilon(rate, epsilon)?;
    let r = (rate / (1.0 - epsilon)).min(1.0);
    let a = binary_entropy_inv(1.0 - r)?;
    Ok(1.0 - binary_entropy_unchecked(star(a, alpha)?))
}

/// Closed-form exponent for the unit-variance Gaussian pair with correlation `rho`,
/// `1/2 log(1 / (1 - rho^2 + rho^2 2^{-2R/(1-eps)}))`.
pub fn gaussian_example_exponent(rho: f64, rate: f64, epsilon: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(domain(format!("rho {rho} outside [0,1]")));
    }
    check_rate_epsilon(rate, epsilon)?;
    let r = rate / (1.0 - epsilon);
    let rho2 = rho * rho;
    Ok(0.5 * (1.0 / (1.0 - rho2 + rho2 * (-2.0 * r).exp2())).log2())
}

fn check_rate_epsilon(rate: f64, epsilon: f64) -> Result<()> {
    if !(rate >= 0.0 && rate.is_finite()) {
        return Err(domain(format!("rate {rate} must be finite and >= 0")));
    }
    if !(0.0..1.0).contains(&epsilon) {
        return Err(domain(format!("epsilon {epsilon} outside [0,1)")));
    }
    Ok(())
}

/// Variable-length exponent with default solver options.
pub fn solve_vl_exponent(q: &ExponentQuery) -> Result<ExponentResult> {
    solve_vl_exponent_with(q, &SolverOptions::default())
}

/// Fixed-length exponent: the `eps = 0` variable-length problem.
pub fn solve_fl_exponent(source: &JointSource, rate: f64) -> Result<ExponentResult> {
    solve_vl_exponent(&ExponentQuery::new(source.clone(), rate, 0.0)?)
}

/// Exponent over a DMC with stop-feedback: the variable-length problem at `R = kappa C`.
pub fn solve_dmc_exponent(
    source: &JointSource,
    dmc: &Dmc,
    kappa: f64,
    epsilon: f64,
) -> Result<ExponentResult> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(domain(format!("kappa {kappa} must be positive")));
    }
    let rate = kappa * dmc.capacity()?;
    solve_vl_exponent(&ExponentQuery::new(source.clone(), rate, epsilon)?)
}

pub fn solve_vl_exponent_with(q: &ExponentQuery, opts: &SolverOptions) -> Result<ExponentResult> {
    q.validate()?;
    let problem = Problem::new(&q.source, q.u_cardinality, q.effective_rate());
    let starts = 2 + opts.restarts;
    let runs: Vec<Run> = (0..starts)
        .into_par_iter()
        .map(|k| {
            let w0 = problem.start(k, opts.seed);
            problem.ascend(w0, opts)
        })
        .collect();

    let converged_starts = runs.iter().filter(|r| r.converged).count();
    if converged_starts == 0 {
        return Err(Error::NonConvergence(format!(
            "none of {starts} starting points met the stopping rule within {} iterations",
            opts.max_iterations
        )));
    }
    // Max objective; ties go to the lowest start index.
    let best = runs
        .iter()
        .filter(|r| r.converged)
        .fold(None::<&Run>, |acc, r| match acc {
            Some(b) if b.value >= r.value => Some(b),
            _ => Some(r),
        })
        .expect("at least one converged run");

    let optimizer = problem.to_aux(&best.w)?;
    let iux = mutual_information(&optimizer.joint_ux(q.source.x_marginal())?);
    let iuy = mutual_information(&optimizer.joint_uy(&q.source)?);
    Ok(ExponentResult {
        theta: iuy,
        optimizer,
        iux,
        iuy,
        constraint_slack: q.rate - (1.0 - q.epsilon) * iux,
        converged_starts,
    })
}

struct Run {
    w: Vec<f64>,
    value: f64,
    converged: bool,
}

/// Flattened problem data; channels are row-major `|X| x |U|` vectors.
struct Problem {
    xs: usize,
    ys: usize,
    us: usize,
    px: Vec<f64>,
    pxy: Vec<f64>,
    py: Vec<f64>,
    budget: f64,
    hx: f64,
}

/// Floor on probability ratios inside logarithms of the gradient.
const RATIO_FLOOR: f64 = 1e-30;

impl Problem {
    fn new(source: &JointSource, us: usize, budget: f64) -> Self {
        Problem {
            xs: source.x_size(),
            ys: source.y_size(),
            us,
            px: source.x_marginal().probs().to_vec(),
            pxy: source.flat().to_vec(),
            py: source.y_marginal().probs().to_vec(),
            budget,
            hx: entropy(source.x_marginal()),
        }
    }

    fn to_aux(&self, w: &[f64]) -> Result<AuxChannel> {
        AuxChannel::from_pmfs(
            w.chunks(self.us)
                .map(|r| Pmf::new(r.to_vec()))
                .collect::<Result<Vec<_>>>()?,
        )
    }

    fn pu(&self, w: &[f64], pu: &mut [f64]) {
        pu.iter_mut().for_each(|v| *v = 0.0);
        for x in 0..self.xs {
            for u in 0..self.us {
                pu[u] += self.px[x] * w[x * self.us + u];
            }
        }
    }

    fn iux(&self, w: &[f64], pu: &[f64]) -> f64 {
        let mut s = 0.0;
        for x in 0..self.xs {
            for u in 0..self.us {
                let v = w[x * self.us + u];
                if v > 0.0 && self.px[x] > 0.0 {
                    s += self.px[x] * v * (v / pu[u]).log2();
                }
            }
        }
        s.max(0.0)
    }

    fn puy(&self, w: &[f64], puy: &mut [f64]) {
        puy.iter_mut().for_each(|v| *v = 0.0);
        for x in 0..self.xs {
            for u in 0..self.us {
                let v = w[x * self.us + u];
                if v == 0.0 {
                    continue;
                }
                for y in 0..self.ys {
                    puy[u * self.ys + y] += v * self.pxy[x * self.ys + y];
                }
            }
        }
    }

    fn iuy(&self, w: &[f64], pu: &[f64], puy: &mut [f64]) -> f64 {
        self.puy(w, puy);
        let mut s = 0.0;
        for u in 0..self.us {
            for y in 0..self.ys {
                let p = puy[u * self.ys + y];
                if p > 0.0 {
                    s += p * (p / (pu[u] * self.py[y])).log2();
                }
            }
        }
        s.max(0.0)
    }

    fn objective(&self, w: &[f64], s: &mut Scratch) -> f64 {
        self.pu(w, &mut s.pu);
        self.iuy(w, &s.pu, &mut s.puy)
    }

    fn constraint(&self, w: &[f64], s: &mut Scratch) -> f64 {
        self.pu(w, &mut s.pu);
        self.iux(w, &s.pu)
    }

    /// Gradients of `I(U;Y)` and `I(U;X)` with respect to each channel entry.
    fn gradients(&self, w: &[f64], s: &mut Scratch, gf: &mut [f64], gg: &mut [f64]) {
        self.pu(w, &mut s.pu);
        self.puy(w, &mut s.puy);
        for x in 0..self.xs {
            let px = self.px[x];
            for u in 0..self.us {
                let i = x * self.us + u;
                if px == 0.0 {
                    gf[i] = 0.0;
                    gg[i] = 0.0;
                    continue;
                }
                let pu = s.pu[u];
                // An unused symbol would copy row x.
                let ratio_ux = if pu > 0.0 { w[i] / pu } else { 1.0 / px };
                gg[i] = px * ratio_ux.max(RATIO_FLOOR).log2();
                let mut acc = 0.0;
                for y in 0..self.ys {
                    let pxy = self.pxy[x * self.ys + y];
                    if pxy == 0.0 {
                        continue;
                    }
                    let cond = if pu > 0.0 {
                        s.puy[u * self.ys + y] / pu
                    } else {
                        pxy / px
                    };
                    acc += pxy * cond.max(RATIO_FLOOR).log2();
                }
                gf[i] = acc;
            }
        }
    }

    /// Blends `w` towards the constant channel with the same `P_U` until the
    /// rate constraint holds. Returns the blended channel in place.
    fn restore(&self, w: &mut [f64], s: &mut Scratch) {
        if self.budget >= self.hx || self.constraint(w, s) <= self.budget {
            return;
        }
        self.pu(w, &mut s.pu);
        let base = w.to_vec();
        let pu = s.pu.clone();
        let blend = |t: f64, out: &mut [f64]| {
            for x in 0..self.xs {
                for u in 0..self.us {
                    let i = x * self.us + u;
                    out[i] = (1.0 - t) * base[i] + t * pu[u];
                }
            }
        };
        if self.budget <= 0.0 {
            blend(1.0, w);
            return;
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let mut trial = vec![0.0; w.len()];
        for _ in 0..64 {
            let mid = 0.5 * (lo + hi);
            blend(mid, &mut trial);
            if self.constraint(&trial, s) <= self.budget {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        blend(hi, w);
    }

    fn start(&self, k: usize, seed: u64) -> Vec<f64> {
        let mut w = vec![0.0; self.xs * self.us];
        match k {
            // U = X embedding (surplus symbols unused).
            0 => {
                for x in 0..self.xs {
                    w[x * self.us + (x % self.us)] = 1.0;
                }
            }
            // U independent of X.
            1 => w.iter_mut().for_each(|v| *v = 1.0 / self.us as f64),
            _ => {
                let mut rng = trial_rng(seed, SOLVER_STREAM, k as u64);
                for row in w.chunks_mut(self.us) {
                    // Flat Dirichlet via normalized exponentials.
                    let mut z = 0.0;
                    for v in row.iter_mut() {
                        let e: f64 = rng.random::<f64>();
                        *v = -(1.0 - e).ln();
                        z += *v;
                    }
                    row.iter_mut().for_each(|v| *v /= z);
                }
            }
        }
        w
    }

    fn ascend(&self, mut w: Vec<f64>, opts: &SolverOptions) -> Run {
        let mut s = Scratch::new(self);
        self.restore(&mut w, &mut s);
        let mut value = self.objective(&w, &mut s);
        let n = w.len();
        let mut gf = vec![0.0; n];
        let mut gg = vec![0.0; n];
        let mut dir = vec![0.0; n];
        let mut cand = vec![0.0; n];
        let mut history = Vec::with_capacity(opts.max_iterations + 1);
        history.push(value);
        let mut eta = 1.0f64;

        for it in 1..=opts.max_iterations {
            self.gradients(&w, &mut s, &mut gf, &mut gg);
            center_rows(&mut gf, self.us);
            center_rows(&mut gg, self.us);
            dir.copy_from_slice(&gf);
            let active = self.budget < self.hx
                && self.constraint(&w, &mut s) >= self.budget - 1e-9 * self.budget.max(1.0);
            if active {
                let fg: f64 = gf.iter().zip(&gg).map(|(a, b)| a * b).sum();
                let gg2: f64 = gg.iter().map(|a| a * a).sum();
                if fg > 0.0 && gg2 > 0.0 {
                    let c = fg / gg2;
                    dir.iter_mut().zip(&gg).for_each(|(d, g)| *d -= c * g);
                }
            }
            if dir.iter().all(|d| d.abs() < 1e-15) {
                return Run { w, value, converged: true };
            }

            let mut improved = false;
            while eta > 1e-14 {
                for i in 0..n {
                    cand[i] = w[i] + eta * dir[i];
                }
                for row in cand.chunks_mut(self.us) {
                    project_simplex(row);
                }
                self.restore(&mut cand, &mut s);
                let v = self.objective(&cand, &mut s);
                if v > value {
                    std::mem::swap(&mut w, &mut cand);
                    value = v;
                    eta = (eta * 2.0).min(1e3);
                    improved = true;
                    break;
                }
                eta *= 0.5;
            }
            history.push(value);
            if !improved {
                // No ascent direction survives projection and blending.
                return Run { w, value, converged: true };
            }
            if it >= opts.window && value - history[it - opts.window] < opts.min_improvement {
                return Run { w, value, converged: true };
            }
        }
        Run {
            w,
            value,
            converged: false,
        }
    }
}

struct Scratch {
    pu: Vec<f64>,
    puy: Vec<f64>,
}

impl Scratch {
    fn new(p: &Problem) -> Self {
        Scratch {
            pu: vec![0.0; p.us],
            puy: vec![0.0; p.us * p.ys],
        }
    }
}

fn center_rows(v: &mut [f64], width: usize) {
    for row in v.chunks_mut(width) {
        let mean = row.iter().sum::<f64>() / width as f64;
        row.iter_mut().for_each(|x| *x -= mean);
    }
}

/// Euclidean projection onto the probability simplex (sort-based).
pub(crate) fn project_simplex(v: &mut [f64]) {
    let mut sorted: Vec<f64> = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        cum += x;
        let t = (cum - 1.0) / (i + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::info::binary_entropy;

    #[test]
    fn simplex_projection() {
        let mut v = vec![0.5, 0.5];
        project_simplex(&mut v);
        assert_eq!(v, vec![0.5, 0.5]);
        let mut v = vec![2.0, 0.0, -1.0];
        project_simplex(&mut v);
        assert_eq!(v, vec![1.0, 0.0, 0.0]);
        let mut v = vec![0.6, 0.6];
        project_simplex(&mut v);
        assert!((v[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn capacity_examples() {
        assert!((capacity(&Dmc::identity(4).unwrap()).unwrap() - 2.0).abs() < 1e-9);
        for p in [0.05, 0.1, 0.2, 0.3] {
            let c = capacity(&Dmc::bsc(p).unwrap()).unwrap();
            assert!((c - (1.0 - binary_entropy(p).unwrap())).abs() < 1e-9);
        }
        let c = capacity(&Dmc::bec(0.3).unwrap()).unwrap();
        assert!((c - 0.7).abs() < 1e-9);
    }

    #[test]
    fn capacity_of_asymmetric_channel_brackets() {
        // Z-channel: known capacity log2(1 + (1-p) p^{p/(1-p)}) for crossover p on input 1.
        let p = 0.3f64;
        let dmc = Dmc::new(vec![vec![1.0, 0.0], vec![p, 1.0 - p]]).unwrap();
        let r = dmc.capacity_result().unwrap();
        let oracle = (1.0 + (1.0 - p) * p.powf(p / (1.0 - p))).log2();
        assert!((r.capacity - oracle).abs() < 1e-8);
        assert!(r.upper_bound - r.capacity <= 1e-9);
    }

    #[test]
    fn capacity_iteration_cap() {
        let dmc = Dmc::new(vec![vec![1.0, 0.0], vec![0.3, 0.7]]).unwrap();
        assert!(matches!(
            blahut_arimoto(&dmc, 1e-9, 1),
            Err(Error::NonConvergence(_))
        ));
    }

    #[test]
    fn binary_closed_form_examples() {
        assert!((binary_example_exponent(0.0, 0.45, 0.1).unwrap() - 0.5).abs() < 1e-9);
        assert!(binary_example_exponent(0.5, 0.8, 0.1).unwrap().abs() < 1e-15);
        assert!(binary_example_exponent(0.4999, 0.8, 0.1).unwrap() < 1e-6);
        // Saturation above R/(1-eps) = 1.
        let sat = binary_example_exponent(0.1, 2.0, 0.1).unwrap();
        assert!((sat - (1.0 - binary_entropy(0.1).unwrap())).abs() < 1e-12);
        assert!(binary_example_exponent(0.6, 0.5, 0.1).is_err());
        assert!(binary_example_exponent(0.1, 0.5, 1.0).is_err());

        // Hand evaluation at alpha = 0.1, R = 0.8, eps = 0.1.
        let r = 0.8 / 0.9;
        let a = binary_entropy_inv(1.0 - r).unwrap();
        let c = a * 0.9 + 0.1 * (1.0 - a);
        let oracle = 1.0 - binary_entropy(c).unwrap();
        assert!((binary_example_exponent(0.1, 0.8, 0.1).unwrap() - oracle).abs() < 1e-15);
    }

    #[test]
    fn gaussian_closed_form_examples() {
        for (r, e) in [(0.0, 0.0), (0.8, 0.1), (5.0, 0.5)] {
            assert_eq!(gaussian_example_exponent(0.0, r, e).unwrap(), 0.0);
        }
        assert!((gaussian_example_exponent(1.0, 0.9, 0.1).unwrap() - 1.0).abs() < 1e-12);
        // rho = 0.8, R = 0.8, eps = 0.1 by hand: 1 - 0.64 + 0.64 * 2^{-16/9}.
        let arg = 1.0 - 0.64 + 0.64 * (-16.0f64 / 9.0).exp2();
        let oracle = 0.5 * (1.0 / arg).log2();
        assert!((gaussian_example_exponent(0.8, 0.8, 0.1).unwrap() - oracle).abs() < 1e-15);
        assert!(gaussian_example_exponent(1.1, 0.5, 0.1).is_err());
        assert!(gaussian_example_exponent(0.5, -0.5, 0.1).is_err());
    }

    #[test]
    fn fixed_length_at_zero_rate_is_zero() {
        let src = JointSource::dsbs(0.2).unwrap();
        let r = solve_fl_exponent(&src, 0.0).unwrap();
        assert!(r.theta.abs() < 1e-12);
    }

    #[test]
    fn unconstrained_rate_gives_full_information() {
        let src = JointSource::new(vec![
            vec![0.2, 0.05, 0.05],
            vec![0.02, 0.3, 0.03],
            vec![0.1, 0.05, 0.2],
        ])
        .unwrap();
        let ixy = mutual_information(&src);
        let hx = entropy(src.x_marginal());
        for eps in [0.0, 0.3] {
            let q = ExponentQuery::new(src.clone(), (1.0 - eps) * hx + 1e-3, eps).unwrap();
            let r = solve_vl_exponent(&q).unwrap();
            assert!((r.theta - ixy).abs() < 1e-12);
        }
        let fl = solve_fl_exponent(&src, hx + 0.5).unwrap();
        assert!((fl.theta - ixy).abs() < 1e-12);
    }

    #[test]
    fn dsbs_matches_closed_form() {
        for &(alpha, rate, eps) in &[(0.1, 0.8, 0.1), (0.2, 0.5, 0.0), (0.3, 0.2, 0.2)] {
            let q = ExponentQuery::new(JointSource::dsbs(alpha).unwrap(), rate, eps).unwrap();
            let r = solve_vl_exponent(&q).unwrap();
            let cf = binary_example_exponent(alpha, rate, eps).unwrap();
            assert!((r.theta - cf).abs() <= 2e-3, "{alpha} {rate} {eps}: {} vs {cf}", r.theta);
            assert!((1.0 - eps) * r.iux <= rate + 1e-6);
            assert!((r.theta - r.iuy).abs() < 1e-12);
        }
    }

    #[test]
    fn dmc_examples() {
        let src = JointSource::dsbs(0.1).unwrap();
        let noiseless = Dmc::identity(2).unwrap();
        let a = solve_dmc_exponent(&src, &noiseless, 0.6, 0.1).unwrap();
        let b = solve_vl_exponent(&ExponentQuery::new(src.clone(), 0.6, 0.1).unwrap()).unwrap();
        assert!((a.theta - b.theta).abs() < 1e-12);

        let bsc = Dmc::bsc(0.1).unwrap();
        let r = solve_dmc_exponent(&src, &bsc, 1.0, 0.1).unwrap();
        let cf = binary_example_exponent(0.1, 1.0 - binary_entropy(0.1).unwrap(), 0.1).unwrap();
        assert!((r.theta - cf).abs() <= 2e-3);
        assert!(solve_dmc_exponent(&src, &bsc, 0.0, 0.1).is_err());
    }

    #[test]
    fn query_validation() {
        let src = JointSource::dsbs(0.1).unwrap();
        assert!(ExponentQuery::new(src.clone(), -0.1, 0.1).is_err());
        assert!(ExponentQuery::new(src.clone(), 0.1, 1.0).is_err());
        assert!(ExponentQuery::new(src.clone(), 0.1, 0.1)
            .unwrap()
            .with_u_cardinality(0)
            .is_err());
        assert_eq!(ExponentQuery::new(src, 0.1, 0.1).unwrap().u_cardinality, 3);
    }

    #[test]
    fn non_convergence_is_reported() {
        let q = ExponentQuery::new(JointSource::dsbs(0.1).unwrap(), 0.5, 0.1).unwrap();
        let opts = SolverOptions {
            restarts: 2,
            max_iterations: 1,
            window: 50,
            ..SolverOptions::default()
        };
        // One iteration cannot satisfy a 50-iteration window unless the run stalls;
        // the constant start stalls immediately, so at least it converges.
        let r = solve_vl_exponent_with(&q, &opts).unwrap();
        assert!(r.converged_starts >= 1);
    }
}
