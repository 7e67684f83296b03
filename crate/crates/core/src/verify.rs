//! Independent checks: the change-of-measure inequality
//! `-log Q(A) <= (D(P||Q) + 1) / P(A)` and a grid search that lower-bounds the
//! exponent optimum on small alphabets.

use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::info::{kl_divergence, AuxChannel, JointSource, Pmf};

/// Largest grid the brute-force search will enumerate.
pub const MAX_GRID_POINTS: u64 = 500_000_000;

/// Two pmfs on one alphabet and an event in it.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureTriple {
    pub p: Pmf,
    pub q: Pmf,
    /// Symbols of the event `A`.
    pub event: Vec<usize>,
}

impl MeasureTriple {
    pub fn new(p: Pmf, q: Pmf, mut event: Vec<usize>) -> Result<Self> {
        if p.len() != q.len() {
            return Err(Error::DimensionMismatch(format!(
                "alphabets of size {} and {}",
                p.len(),
                q.len()
            )));
        }
        event.sort_unstable();
        event.dedup();
        if event.last().is_some_and(|&s| s >= p.len()) {
            return Err(domain("event symbol outside the alphabet"));
        }
        Ok(MeasureTriple { p, q, event })
    }
}

/// Both sides of the change-of-measure inequality, in bits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChangeOfMeasure {
    /// `-log2 Q(A)`.
    pub lhs: f64,
    /// `(D(P||Q) + 1) / P(A)`, infinite when the divergence is.
    pub rhs: f64,
    pub holds: bool,
    pub finite_divergence: bool,
}

/// Evaluates the inequality; an infinite divergence holds vacuously.
pub fn check_change_of_measure(t: &MeasureTriple) -> Result<ChangeOfMeasure> {
    let pa = t.p.mass_of(&t.event);
    if !(pa > 0.0) {
        return Err(domain("P(A) must be positive"));
    }
    let qa = t.q.mass_of(&t.event);
    let lhs = -qa.log2();
    let d = match kl_divergence(&t.p, &t.q) {
        Ok(d) => Some(d),
        Err(Error::AbsoluteContinuityViolation { .. }) => None,
        Err(e) => return Err(e),
    };
    let rhs = d.map_or(f64::INFINITY, |d| (d + 1.0) / pa);
    Ok(ChangeOfMeasure {
        lhs,
        rhs,
        holds: d.is_none() || lhs <= rhs + 1e-12,
        finite_divergence: d.is_some(),
    })
}

/// Best grid point found by [`brute_force_exponent`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridOptimum {
    pub theta: f64,
    pub optimizer: AuxChannel,
    pub iux: f64,
    pub iuy: f64,
    pub points: u64,
}

/// Points of the simplex over `k` symbols with coordinates in `1/steps` units.
fn simplex_lattice(k: usize, steps: usize) -> Vec<Vec<f64>> {
    fn rec(k: usize, left: usize, steps: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if cur.len() + 1 == k {
            cur.push(left);
            out.push(cur.iter().map(|&c| c as f64 / steps as f64).collect());
            cur.pop();
            return;
        }
        for c in 0..=left {
            cur.push(c);
            rec(k, left - c, steps, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(k, steps, steps, &mut Vec::with_capacity(k), &mut out);
    out
}

fn binom(n: u64, k: u64) -> u64 {
    (0..k).fold(1u64, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Grid maximizer with `|U| = |X| + 1`.
pub fn brute_force_exponent(source: &JointSource, rate: f64, epsilon: f64, grid_steps: usize) -> Result<GridOptimum> {
    brute_force_exponent_with(source, rate, epsilon, grid_steps, source.x_size() + 1)
}

/// Maximizes `I(U;Y)` subject to `(1 - eps) I(U;X) <= R` over channels whose
/// rows lie on the `grid_steps` simplex lattice. Every point is feasible or
/// not by direct evaluation, so the value is a lower bound on the optimum.
pub fn brute_force_exponent_with(
    source: &JointSource,
    rate: f64,
    epsilon: f64,
    grid_steps: usize,
    u_cardinality: usize,
) -> Result<GridOptimum> {
    let (xs, ys) = (source.x_size(), source.y_size());
    if xs > 3 {
        return Err(Error::ResourceLimit(format!("|X| = {xs}, grid search supports at most 3")));
    }
    if u_cardinality == 0 || u_cardinality > xs + 1 {
        return Err(Error::ResourceLimit(format!("|U| = {u_cardinality} outside 1..=|X|+1")));
    }
    if grid_steps == 0 || grid_steps > 21 {
        return Err(Error::ResourceLimit(format!("grid_steps {grid_steps} outside 1..=21")));
    }
    if !(rate >= 0.0) || !(0.0..1.0).contains(&epsilon) {
        return Err(domain("need rate >= 0 and epsilon in [0,1)"));
    }
    let lattice = simplex_lattice(u_cardinality, grid_steps);
    let g = lattice.len() as u64;
    debug_assert_eq!(g, binom((grid_steps + u_cardinality - 1) as u64, (u_cardinality - 1) as u64));
    let points = g.checked_pow(xs as u32).filter(|&p| p <= MAX_GRID_POINTS).ok_or_else(|| {
        Error::ResourceLimit(format!("{g}^{xs} grid points exceed {MAX_GRID_POINTS}"))
    })?;
    let px = source.x_marginal().probs().to_vec();
    let py = source.y_marginal().probs().to_vec();
    let joint: Vec<f64> = source.flat().to_vec();
    let budget = rate / (1.0 - epsilon) + 1e-12;

    let eval = |rows: &[usize], pu: &mut [f64], puy: &mut [f64]| -> (f64, f64) {
        pu.iter_mut().for_each(|v| *v = 0.0);
        puy.iter_mut().for_each(|v| *v = 0.0);
        for (x, &r) in rows.iter().enumerate() {
            let w = &lattice[r];
            for u in 0..u_cardinality {
                pu[u] += px[x] * w[u];
                for y in 0..ys {
                    puy[u * ys + y] += w[u] * joint[x * ys + y];
                }
            }
        }
        let mut iux = 0.0;
        for (x, &r) in rows.iter().enumerate() {
            for (u, &w) in lattice[r].iter().enumerate() {
                if w > 0.0 && px[x] > 0.0 {
                    iux += px[x] * w * (w / pu[u]).log2();
                }
            }
        }
        let mut iuy = 0.0;
        for u in 0..u_cardinality {
            for y in 0..ys {
                let m = puy[u * ys + y];
                if m > 0.0 {
                    iuy += m * (m / (pu[u] * py[y])).log2();
                }
            }
        }
        (iux.max(0.0), iuy.max(0.0))
    };

    // Split on the first row; ties go to the lowest linear index.
    let best = (0..lattice.len())
        .into_par_iter()
        .map(|first| {
            let mut rows = vec![0usize; xs];
            rows[0] = first;
            let mut pu = vec![0.0; u_cardinality];
            let mut puy = vec![0.0; u_cardinality * ys];
            let mut best: Option<(f64, f64, Vec<usize>)> = None;
            loop {
                let (iux, iuy) = eval(&rows, &mut pu, &mut puy);
                if iux <= budget && best.as_ref().is_none_or(|b| iuy > b.0) {
                    best = Some((iuy, iux, rows.clone()));
                }
                // Odometer over rows 1..xs.
                let mut i = xs;
                loop {
                    i -= 1;
                    if i == 0 {
                        return best;
                    }
                    rows[i] += 1;
                    if rows[i] < lattice.len() {
                        break;
                    }
                    rows[i] = 0;
                }
            }
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .fold(None::<(f64, f64, Vec<usize>)>, |acc, b| match acc {
            Some(a) if a.0 >= b.0 => Some(a),
            _ => Some(b),
        })
        .expect("constant channels are always feasible");
    let optimizer = AuxChannel::new(best.2.iter().map(|&r| lattice[r].clone()).collect())?;
    Ok(GridOptimum {
        theta: best.0,
        optimizer,
        iux: best.1,
        iuy: best.0,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponent::{binary_example_exponent, solve_vl_exponent, ExponentQuery};
    use crate::info::{entropy, mutual_information};
    use proptest::prelude::*;

    #[test]
    fn identical_laws_full_alphabet() {
        let p = Pmf::new(vec![0.2, 0.3, 0.5]).unwrap();
        let r = check_change_of_measure(&MeasureTriple::new(p.clone(), p, vec![0, 1, 2]).unwrap()).unwrap();
        assert!(r.lhs.abs() < 1e-15);
        assert!((r.rhs - 1.0).abs() < 1e-15);
        assert!(r.holds);
    }

    #[test]
    fn identical_laws_any_event() {
        let p = Pmf::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let r = check_change_of_measure(&MeasureTriple::new(p.clone(), p, vec![0, 2]).unwrap()).unwrap();
        assert!((r.lhs + 0.4f64.log2()).abs() < 1e-12);
        assert!((r.rhs - 1.0 / 0.4).abs() < 1e-12);
        assert!(r.holds);
    }

    #[test]
    fn infinite_divergence_holds_vacuously() {
        let p = Pmf::new(vec![0.5, 0.5]).unwrap();
        let q = Pmf::new(vec![1.0, 0.0]).unwrap();
        let r = check_change_of_measure(&MeasureTriple::new(p, q, vec![1]).unwrap()).unwrap();
        assert!(r.lhs.is_infinite() && r.rhs.is_infinite());
        assert!(r.holds && !r.finite_divergence);
    }

    #[test]
    fn zero_probability_event_is_rejected() {
        let p = Pmf::new(vec![1.0, 0.0]).unwrap();
        let q = Pmf::uniform(2).unwrap();
        assert!(check_change_of_measure(&MeasureTriple::new(p, q, vec![1]).unwrap()).is_err());
    }

    fn pmf_strategy(k: usize) -> impl Strategy<Value = Pmf> {
        prop::collection::vec(0.0f64..1.0, k).prop_filter_map("zero mass", |v| {
            let s: f64 = v.iter().sum();
            (s > 1e-9).then(|| Pmf::new(v.iter().map(|x| x / s).collect()).unwrap())
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]
        #[test]
        fn change_of_measure_holds(
            (p, q, mask) in (1usize..=8).prop_flat_map(|k| (pmf_strategy(k), pmf_strategy(k), prop::collection::vec(any::<bool>(), k)))
        ) {
            let event: Vec<usize> = mask.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect();
            prop_assume!(p.mass_of(&event) > 0.0);
            let r = check_change_of_measure(&MeasureTriple::new(p, q, event).unwrap()).unwrap();
            prop_assert!(r.holds, "{:?}", r);
        }
    }

    #[test]
    fn lattice_size_matches_stars_and_bars() {
        assert_eq!(simplex_lattice(3, 21).len(), 253);
        assert_eq!(simplex_lattice(4, 11).len() as u64, binom(14, 3));
        assert!(simplex_lattice(3, 4).iter().all(|p| (p.iter().sum::<f64>() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn guards() {
        let big = JointSource::new(vec![vec![0.25; 1]; 4]).unwrap();
        assert!(matches!(brute_force_exponent(&big, 0.5, 0.1, 5), Err(Error::ResourceLimit(_))));
        let j = JointSource::dsbs(0.1).unwrap();
        assert!(matches!(brute_force_exponent(&j, 0.5, 0.1, 22), Err(Error::ResourceLimit(_))));
        assert!(matches!(brute_force_exponent_with(&j, 0.5, 0.1, 5, 4), Err(Error::ResourceLimit(_))));
    }

    #[test]
    fn unconstrained_rate_reaches_mutual_information() {
        let j = JointSource::dsbs(0.2).unwrap();
        let r = (1.0 - 0.1) * entropy(j.x_marginal());
        let g = brute_force_exponent(&j, r, 0.1, 21).unwrap();
        assert!((g.theta - mutual_information(&j)).abs() < 1e-3);
    }

    #[test]
    fn zero_rate_gives_zero() {
        let g = brute_force_exponent(&JointSource::dsbs(0.1).unwrap(), 0.0, 0.2, 11).unwrap();
        assert_eq!(g.theta, 0.0);
    }

    #[test]
    fn matches_binary_closed_form() {
        let j = JointSource::dsbs(0.1).unwrap();
        let g = brute_force_exponent(&j, 0.8, 0.1, 21).unwrap();
        let cf = binary_example_exponent(0.1, 0.8, 0.1).unwrap();
        assert!(g.theta <= cf + 1e-9);
        // The optimal crossover solves h(d) = 1 - 0.8/0.9, so d is about 0.015,
        // below the lattice resolution 1/21; the grid stays 0.014 short.
        assert!(cf - g.theta < 0.015, "{} vs {cf}", g.theta);
        // With the optimum on the lattice the two agree closely.
        let d = 2.0 / 21.0;
        let r = 0.9 * (1.0 - crate::info::binary_entropy(d).unwrap());
        let g = brute_force_exponent(&j, r, 0.1, 21).unwrap();
        let cf = binary_example_exponent(0.1, r, 0.1).unwrap();
        assert!((g.theta - cf).abs() < 1e-9, "{} vs {cf}", g.theta);
    }

    #[test]
    fn solver_beats_grid() {
        let j = JointSource::new(vec![vec![0.3, 0.05, 0.05], vec![0.05, 0.2, 0.05], vec![0.1, 0.05, 0.15]]).unwrap();
        for (r, e) in [(0.3, 0.1), (0.6, 0.25)] {
            let g = brute_force_exponent(&j, r, e, 5).unwrap();
            let s = solve_vl_exponent(&ExponentQuery::new(j.clone(), r, e).unwrap()).unwrap();
            assert!(s.theta >= g.theta - 1e-9, "{} < {}", s.theta, g.theta);
        }
    }
}
