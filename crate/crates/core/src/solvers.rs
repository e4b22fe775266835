//! Classical QUBO solvers: exhaustive Gray-code enumeration and restart-based
//! single-flip simulated annealing.

use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cqfs::QuboProblem;
use crate::error::{Error, Result};
use crate::io::{read_json, write_json};

/// Hard cap on the number of variables for [`solve_exhaustive`].
pub const MAX_EXHAUSTIVE_VARIABLES: usize = 25;

/// Default number of annealing samples.
pub const DEFAULT_NUM_SAMPLES: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Exhaustive,
    SimulatedAnnealing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub x: Vec<u8>,
    pub energy: f64,
    pub solver: SolverKind,
    pub seed: u64,
    pub samples_drawn: usize,
    #[serde(rename = "wall_time_s")]
    pub wall_time: f64,
}

impl SelectionResult {
    pub fn selected(&self) -> Vec<usize> {
        self.x
            .iter()
            .enumerate()
            .filter(|(_, &b)| b == 1)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn n_selected(&self) -> usize {
        self.x.iter().filter(|&&b| b == 1).count()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }
}

/// `xᵀQx + offset`.
pub fn energy(q: &QuboProblem, x: &[u8]) -> Result<f64> {
    if x.len() != q.n() {
        return Err(Error::DimensionMismatch {
            op: "energy",
            left: (q.n(), q.n()),
            right: (x.len(), 1),
        });
    }
    Ok(energy_unchecked(q, x))
}

fn energy_unchecked(q: &QuboProblem, x: &[u8]) -> f64 {
    let mut e = 0.0;
    for (i, &xi) in x.iter().enumerate() {
        if xi == 1 {
            let row = q.row(i);
            for (j, &xj) in x.iter().enumerate() {
                if xj == 1 {
                    e += row[j];
                }
            }
        }
    }
    e + q.offset
}

/// Incremental single-flip bookkeeping: `field[f] = Σ_{g≠f} q_fg x_g`.
struct FlipState<'a> {
    q: &'a QuboProblem,
    x: Vec<u8>,
    field: Vec<f64>,
    energy: f64,
}

impl<'a> FlipState<'a> {
    fn new(q: &'a QuboProblem, x: Vec<u8>) -> Self {
        let n = q.n();
        let mut field = vec![0.0; n];
        for (f, slot) in field.iter_mut().enumerate() {
            let row = q.row(f);
            *slot = (0..n).filter(|&g| g != f && x[g] == 1).map(|g| row[g]).sum();
        }
        let energy = energy_unchecked(q, &x);
        FlipState { q, x, field, energy }
    }

    #[inline]
    fn delta(&self, f: usize) -> f64 {
        let sign = 1.0 - 2.0 * f64::from(self.x[f]);
        sign * (self.q.get(f, f) + 2.0 * self.field[f])
    }

    #[inline]
    fn flip(&mut self, f: usize, delta: f64) {
        let step = if self.x[f] == 1 { -1.0 } else { 1.0 };
        self.x[f] ^= 1;
        self.energy += delta;
        let row = self.q.row(f);
        for (g, slot) in self.field.iter_mut().enumerate() {
            if g != f {
                *slot += step * row[g];
            }
        }
    }
}

fn encode(x: &[u8]) -> u64 {
    x.iter()
        .enumerate()
        .fold(0u64, |acc, (i, &b)| acc | (u64::from(b) << i))
}

fn decode(code: u64, n: usize) -> Vec<u8> {
    (0..n).map(|i| ((code >> i) & 1) as u8).collect()
}

/// Bits enumerated per Gray-code block; the field vector is rebuilt from
/// scratch at the start of every block, which bounds drift.
const GRAY_BLOCK_BITS: usize = 16;

/// Global minimum over all `2ⁿ` assignments. Equal energies (within a
/// rounding tolerance) go to the assignment with the smaller integer
/// encoding, bit `f` weighted `2^f`.
pub fn solve_exhaustive(q: &QuboProblem) -> Result<SelectionResult> {
    let n = q.n();
    if n > MAX_EXHAUSTIVE_VARIABLES {
        return Err(Error::TooLarge {
            n,
            max: MAX_EXHAUSTIVE_VARIABLES,
        });
    }
    let start = Instant::now();
    let scale = q.coefficients().iter().map(|v| v.abs()).sum::<f64>() + q.offset.abs() + 1.0;
    let tol = 1e-12 * scale;
    let better = |a: (f64, u64), b: (f64, u64)| a.0 < b.0 - tol || (a.0 <= b.0 + tol && a.1 < b.1);

    let low = n.min(GRAY_BLOCK_BITS);
    let high = n - low;
    let blocks: Vec<(f64, u64)> = (0..1u64 << high)
        .into_par_iter()
        .map(|prefix| {
            let base = prefix << low;
            let mut state = FlipState::new(q, decode(base, n));
            let mut code = base;
            let mut best = (state.energy, code);
            for step in 1..1u64 << low {
                let f = step.trailing_zeros() as usize;
                let d = state.delta(f);
                state.flip(f, d);
                code ^= 1 << f;
                if better((state.energy, code), best) {
                    best = (state.energy, code);
                }
            }
            best
        })
        .collect();
    let (_, code) = blocks
        .into_iter()
        .reduce(|a, b| if better(b, a) { b } else { a })
        .expect("at least one block");
    let x = decode(code, n);
    Ok(SelectionResult {
        energy: energy_unchecked(q, &x),
        x,
        solver: SolverKind::Exhaustive,
        seed: 0,
        samples_drawn: 1,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnealSchedule {
    pub sweeps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    /// Independent anneals per sample; the best one is reported.
    pub restarts: usize,
}

impl AnnealSchedule {
    pub fn validate(&self) -> Result<()> {
        let betas_ok = self.beta_start.is_finite()
            && self.beta_end.is_finite()
            && self.beta_start > 0.0
            && self.beta_end >= self.beta_start;
        if self.sweeps == 0 || self.restarts == 0 || !betas_ok {
            return Err(Error::ConfigInvalid(format!(
                "anneal schedule needs sweeps, restarts >= 1 and 0 < beta_start <= beta_end: {self:?}"
            )));
        }
        Ok(())
    }

    /// Rescales a unit-scale schedule to the coefficient range of `q`:
    /// `beta_start / max|q|` and `beta_end / min nonzero |q|`.
    pub fn scaled_for(self, q: &QuboProblem) -> Self {
        let max = q.max_abs_coefficient();
        let min = q.min_nonzero_abs_coefficient().unwrap_or(1.0);
        let (beta_start, beta_end) = if max > 0.0 {
            (self.beta_start / max, self.beta_end / min)
        } else {
            (self.beta_start, self.beta_end)
        };
        AnnealSchedule {
            beta_start,
            beta_end: beta_end.max(beta_start),
            ..self
        }
    }

    #[inline]
    fn beta_at(&self, sweep: usize) -> f64 {
        if self.sweeps <= 1 {
            return self.beta_end;
        }
        let t = sweep as f64 / (self.sweeps - 1) as f64;
        self.beta_start * (self.beta_end / self.beta_start).powf(t)
    }
}

/// Unit-scale schedule: `max(1000, 50n)` sweeps, inverse temperature from 0.1
/// to 50, one restart per sample.
pub fn default_schedule(n: usize) -> AnnealSchedule {
    AnnealSchedule {
        sweeps: 1000.max(50 * n),
        beta_start: 0.1,
        beta_end: 50.0,
        restarts: 1,
    }
}

/// [`default_schedule`] rescaled to the coefficients of `q`.
pub fn default_schedule_for(q: &QuboProblem) -> AnnealSchedule {
    default_schedule(q.n()).scaled_for(q)
}

fn anneal_once(q: &QuboProblem, schedule: &AnnealSchedule, rng: &mut ChaCha8Rng) -> (Vec<u8>, f64) {
    let n = q.n();
    let x: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.5))).collect();
    let mut state = FlipState::new(q, x);
    let mut best_x = state.x.clone();
    let mut best_e = state.energy;
    let mut order: Vec<usize> = (0..n).collect();
    for sweep in 0..schedule.sweeps {
        let beta = schedule.beta_at(sweep);
        order.shuffle(rng);
        for &f in &order {
            let d = state.delta(f);
            if d <= 0.0 || rng.random::<f64>() < (-beta * d).exp() {
                state.flip(f, d);
                if state.energy < best_e {
                    best_e = state.energy;
                    best_x.clone_from(&state.x);
                }
            }
        }
    }
    (best_x, best_e)
}

/// Draws `num_samples` annealing samples and returns them best first.
///
/// Sample `i` uses its own ChaCha stream `(seed, i)`, so the result does not
/// depend on how samples are scheduled across threads.
pub fn solve_sa(
    q: &QuboProblem,
    schedule: &AnnealSchedule,
    num_samples: usize,
    seed: u64,
) -> Result<Vec<SelectionResult>> {
    schedule.validate()?;
    if num_samples == 0 {
        return Err(Error::ConfigInvalid("num_samples must be at least 1".into()));
    }
    let mut samples: Vec<(usize, SelectionResult)> = (0..num_samples)
        .into_par_iter()
        .map(|idx| {
            let start = Instant::now();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(idx as u64);
            let mut best: Option<(Vec<u8>, f64)> = None;
            for _ in 0..schedule.restarts {
                let (x, e) = anneal_once(q, schedule, &mut rng);
                if best.as_ref().is_none_or(|(_, be)| e < *be) {
                    best = Some((x, e));
                }
            }
            let (x, _) = best.expect("at least one restart");
            (
                idx,
                SelectionResult {
                    energy: energy_unchecked(q, &x),
                    x,
                    solver: SolverKind::SimulatedAnnealing,
                    seed,
                    samples_drawn: num_samples,
                    wall_time: start.elapsed().as_secs_f64(),
                },
            )
        })
        .collect();
    samples.sort_by(|a, b| {
        a.1.energy
            .total_cmp(&b.1.energy)
            .then_with(|| encode(&a.1.x).cmp(&encode(&b.1.x)))
            .then(a.0.cmp(&b.0))
    });
    Ok(samples.into_iter().map(|(_, r)| r).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cqfs::combination_penalty;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_qubo(n: usize, seed: u64) -> QuboProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut q = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v: f64 = rng.random_range(-1.0..=1.0);
                q[i * n + j] = v;
                q[j * n + i] = v;
            }
        }
        QuboProblem::from_dense(n, q, rng.random_range(-1.0..1.0)).unwrap()
    }

    fn naive_minimum(q: &QuboProblem) -> (u64, f64) {
        let n = q.n();
        let mut best = (0u64, f64::INFINITY);
        for code in 0..1u64 << n {
            let e = energy(q, &decode(code, n)).unwrap();
            if e < best.1 {
                best = (code, e);
            }
        }
        best
    }

    #[test]
    fn energy_examples() {
        let q = QuboProblem::from_dense(2, vec![-1.0, 2.0, 2.0, -1.0], 0.0).unwrap();
        assert_eq!(energy(&q, &[1, 1]).unwrap(), 2.0);
        assert_eq!(energy(&q, &[0, 1]).unwrap(), -1.0);
        let shifted = QuboProblem::from_dense(2, vec![-1.0, 2.0, 2.0, -1.0], 3.5).unwrap();
        assert_eq!(energy(&shifted, &[0, 0]).unwrap(), 3.5);
        assert!(energy(&q, &[1]).is_err());
    }

    #[test]
    fn exhaustive_examples() {
        let q = QuboProblem::from_dense(2, vec![-1.0, 0.0, 0.0, -1.0], 0.0).unwrap();
        let r = solve_exhaustive(&q).unwrap();
        assert_eq!((r.x, r.energy), (vec![1, 1], -2.0));

        let q = QuboProblem::from_dense(2, vec![-1.0, 1.0, 1.0, -1.0], 0.0).unwrap();
        let r = solve_exhaustive(&q).unwrap();
        assert_eq!((r.x, r.energy), (vec![1, 0], -1.0));

        let r = solve_exhaustive(&combination_penalty(6, 3.0, 1.0)).unwrap();
        assert_eq!(r.energy, 0.0);
        assert_eq!(r.n_selected(), 3);
        assert_eq!(r.x, vec![1, 1, 1, 0, 0, 0]);

        assert!(matches!(
            solve_exhaustive(&QuboProblem::zeros(26)),
            Err(Error::TooLarge { n: 26, .. })
        ));
        let empty = solve_exhaustive(&QuboProblem::zeros(0)).unwrap();
        assert!(empty.x.is_empty());
    }

    #[test]
    fn exhaustive_handles_multiple_blocks() {
        let q = random_qubo(19, 5);
        let r = solve_exhaustive(&q).unwrap();
        let (code, e) = naive_minimum(&q);
        assert_eq!(encode(&r.x), code);
        assert!((r.energy - e).abs() < 1e-9);
    }

    #[test]
    fn sa_single_variable() {
        let q = QuboProblem::from_dense(1, vec![-5.0], 0.0).unwrap();
        let schedule = AnnealSchedule {
            sweeps: 1,
            ..default_schedule(1)
        };
        for r in solve_sa(&q, &schedule, 10, 3).unwrap() {
            assert_eq!(r.x, vec![1]);
            assert_eq!(r.energy, -5.0);
            assert_eq!(r.samples_drawn, 10);
        }
    }

    #[test]
    fn sa_penalty_problem_reaches_zero() {
        let q = combination_penalty(8, 4.0, 1.0);
        let exact = solve_exhaustive(&q).unwrap();
        let samples = solve_sa(&q, &default_schedule_for(&q), 100, 0).unwrap();
        assert_eq!(exact.energy, 0.0);
        assert_eq!(samples[0].energy, 0.0);
        assert!(samples.windows(2).all(|w| w[0].energy <= w[1].energy));
    }

    #[test]
    fn sa_is_deterministic() {
        let q = random_qubo(10, 1);
        let s = default_schedule_for(&q);
        let strip =
            |v: Vec<SelectionResult>| -> Vec<(Vec<u8>, f64)> { v.into_iter().map(|r| (r.x, r.energy)).collect() };
        assert_eq!(
            strip(solve_sa(&q, &s, 20, 9).unwrap()),
            strip(solve_sa(&q, &s, 20, 9).unwrap())
        );
    }

    #[test]
    fn sa_all_negative_diagonal() {
        let n = 12;
        let mut q = vec![0.0; n * n];
        for i in 0..n {
            q[i * n + i] = -1.0 - i as f64 / 10.0;
        }
        let q = QuboProblem::from_dense(n, q, 0.0).unwrap();
        let schedule = AnnealSchedule {
            sweeps: 200,
            beta_start: 1.0,
            beta_end: 1e9,
            restarts: 1,
        };
        for r in solve_sa(&q, &schedule, 16, 4).unwrap() {
            assert_eq!(r.x, vec![1; n]);
        }
    }

    #[test]
    fn default_schedule_examples() {
        assert_eq!(default_schedule(1).sweeps, 1000);
        assert_eq!(default_schedule(100).sweeps, 5000);
        let s = default_schedule(7);
        assert!(s.beta_end >= s.beta_start);
        let q = random_qubo(7, 2);
        let scaled = default_schedule_for(&q);
        assert!(scaled.beta_end >= scaled.beta_start);
        assert!(scaled.validate().is_ok());
    }

    #[test]
    fn selection_json_layout() {
        let r = SelectionResult {
            x: vec![0, 1],
            energy: -1.0,
            solver: SolverKind::SimulatedAnnealing,
            seed: 4,
            samples_drawn: 100,
            wall_time: 0.5,
        };
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["solver"], "simulated_annealing");
        assert_eq!(v["wall_time_s"], 0.5);
        assert_eq!(v["x"], serde_json::json!([0, 1]));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn exhaustive_matches_naive(n in 1usize..=12, seed in any::<u64>()) {
            let q = random_qubo(n, seed);
            let r = solve_exhaustive(&q).unwrap();
            let (code, e) = naive_minimum(&q);
            prop_assert_eq!(encode(&r.x), code);
            prop_assert!((r.energy - e).abs() < 1e-9);
            prop_assert!((energy(&q, &r.x).unwrap() - r.energy).abs() < 1e-9);
        }

        #[test]
        fn incremental_energy_tracks_scratch(n in 1usize..=16, seed in any::<u64>(), flips in proptest::collection::vec(0usize..16, 1..200)) {
            let q = random_qubo(n, seed);
            let mut state = FlipState::new(&q, vec![0; n]);
            for f in flips {
                let f = f % n;
                let d = state.delta(f);
                state.flip(f, d);
                prop_assert!((state.energy - energy(&q, &state.x).unwrap()).abs() < 1e-9);
            }
        }

        #[test]
        fn sa_never_beats_exhaustive(n in 1usize..=10, seed in any::<u64>()) {
            let q = random_qubo(n, seed);
            let exact = solve_exhaustive(&q).unwrap();
            let schedule = AnnealSchedule { sweeps: 50, ..default_schedule_for(&q) };
            let best = &solve_sa(&q, &schedule, 4, seed).unwrap()[0];
            prop_assert!(best.energy >= exact.energy - 1e-9);
        }
    }
}
