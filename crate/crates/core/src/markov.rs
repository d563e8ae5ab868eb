//! Finite-state-machine analysis of the two-user ALO scheduling protocol:
//! stationary distribution, inter-renewal time, accumulated reward.

use crate::error::{Error, Result};
use crate::special::max_fading_sf;

/// A finite Markov reward model.
///
/// `transition[i][j]` is the probability of moving from state i to j;
/// `reward[i][j]` and `power[i][j]` are expected per-transition reward
/// (nats) and transmit power conditional on taking that transition.
#[derive(Debug, Clone)]
pub struct FsmModel {
    pub states: Vec<String>,
    pub transition: Vec<Vec<f64>>,
    pub reward: Vec<Vec<f64>>,
    pub power: Vec<Vec<f64>>,
    pub renewal_state: usize,
}

impl FsmModel {
    fn validate(&self) -> Result<()> {
        let n = self.states.len();
        if n == 0 {
            return Err(Error::Model("empty state space".into()));
        }
        for m in [&self.transition, &self.reward, &self.power] {
            if m.len() != n || m.iter().any(|row| row.len() != n) {
                return Err(Error::Model("matrix shape does not match state count".into()));
            }
        }
        for (i, row) in self.transition.iter().enumerate() {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::Model(format!("row {i} sums to {s}, not 1")));
            }
            if row.iter().any(|&p| p < -1e-15) {
                return Err(Error::Model(format!("row {i} has a negative probability")));
            }
        }
        if self.renewal_state >= n {
            return Err(Error::Model("renewal state out of range".into()));
        }
        Ok(())
    }

    /// Strong connectivity of the positive-probability transition graph.
    fn is_irreducible(&self) -> bool {
        let n = self.states.len();
        let reach = |forward: bool| -> Vec<bool> {
            let mut seen = vec![false; n];
            let mut stack = vec![0usize];
            seen[0] = true;
            while let Some(u) = stack.pop() {
                for v in 0..n {
                    let p = if forward {
                        self.transition[u][v]
                    } else {
                        self.transition[v][u]
                    };
                    if p > 0.0 && !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
            seen
        };
        reach(true).iter().all(|&b| b) && reach(false).iter().all(|&b| b)
    }

    /// Period of the (strongly connected) chain via BFS level labels:
    /// gcd over all edges (u,v) of d(u)+1-d(v).
    fn period(&self) -> u64 {
        let n = self.states.len();
        let mut dist = vec![usize::MAX; n];
        let mut queue = std::collections::VecDeque::new();
        dist[0] = 0;
        queue.push_back(0usize);
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                if self.transition[u][v] > 0.0 && dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        let mut g = 0u64;
        for u in 0..n {
            for v in 0..n {
                if self.transition[u][v] > 0.0 {
                    let diff = (dist[u] as i64 + 1 - dist[v] as i64).unsigned_abs();
                    g = gcd(g, diff);
                }
            }
        }
        g.max(1)
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Stationary distribution of an irreducible, aperiodic chain by dense
/// linear solve of pi P = pi with sum(pi) = 1.
pub fn stationary_distribution(fsm: &FsmModel) -> Result<Vec<f64>> {
    fsm.validate()?;
    if !fsm.is_irreducible() {
        return Err(Error::Model("chain is reducible".into()));
    }
    if fsm.period() != 1 {
        return Err(Error::Model(format!("chain has period {}", fsm.period())));
    }
    let n = fsm.states.len();
    // Rows of (P^T - I), last row replaced by the normalization constraint.
    let mut a = vec![vec![0.0; n + 1]; n];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = fsm.transition[j][i] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..n {
        a[n - 1][j] = 1.0;
    }
    a[n - 1][n] = 1.0;
    let pi = solve_dense(&mut a)?;
    // Residual check against the original system.
    let mut max_resid = 0.0f64;
    for i in 0..n {
        let mut r = -pi[i];
        for j in 0..n {
            r += fsm.transition[j][i] * pi[j];
        }
        max_resid = max_resid.max(r.abs());
    }
    let sum: f64 = pi.iter().sum();
    max_resid = max_resid.max((sum - 1.0).abs());
    if max_resid > 1e-12 {
        return Err(Error::Model(format!("stationary solve residual {max_resid:e}")));
    }
    Ok(pi.into_iter().map(|p| p.max(0.0)).collect())
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
fn solve_dense(a: &mut [Vec<f64>]) -> Result<Vec<f64>> {
    let n = a.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        if a[pivot][col].abs() < 1e-280 {
            return Err(Error::Model("singular linear system".into()));
        }
        a.swap(col, pivot);
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = a[row][col] / a[col][col];
            for k in col..=n {
                a[row][k] -= f * a[col][k];
            }
        }
    }
    Ok((0..n).map(|i| a[i][n] / a[i][i]).collect())
}

/// Renewal quantities of the ALO protocol for scheduling probability p
/// and per-packet rate R:
///
///   E[T] = 4 - p
///   E[R] = R p (4 - p),  split as right-branch R p (1-p) plus
///          left-branch 3 p R.
#[derive(Debug, Clone, Copy)]
pub struct AloRenewal {
    pub expected_time: f64,
    pub expected_reward: f64,
    pub reward_rx: f64,
    pub reward_lx: f64,
}

pub fn alo_renewal_quantities(p: f64, rate: f64) -> Result<AloRenewal> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Argument(format!("p must be in [0,1], got {p}")));
    }
    if rate < 0.0 {
        return Err(Error::Argument(format!("rate must be nonnegative, got {rate}")));
    }
    let rx = rate * p * (1.0 - p);
    let lx = 3.0 * p * rate;
    Ok(AloRenewal {
        expected_time: 4.0 - p,
        expected_reward: rate * p * (4.0 - p),
        reward_rx: rx,
        reward_lx: lx,
    })
}

/// Truncated-series evaluation of the left-branch reward sum, used as an
/// independent oracle for the 3pR closed form. Sums the per-cycle-length
/// binomial contributions up to `max_tau` (u64 arithmetic free; terms are
/// built multiplicatively).
pub fn alo_left_branch_series(p: f64, rate: f64, max_tau: usize) -> f64 {
    let a = p / 2.0;
    let b = 1.0 - p;
    let mut total = 0.0;
    for tau in 2..=max_tau {
        let n = tau - 2;
        let inner = if b <= 0.0 {
            // p = 1: only the k = n term survives
            (n as f64 + 2.0) * a.powi(n as i32)
        } else {
            // sum_k C(n,k) (k+2) a^k b^(n-k), term built recursively
            let mut term = b.powi(n as i32);
            if term == 0.0 {
                // underflow guard: b^n vanished; the cycle mass at this
                // length is far below the target accuracy
                continue;
            }
            let ratio = a / b;
            let mut acc = 0.0;
            for k in 0..=n {
                acc += (k as f64 + 2.0) * term;
                if k < n {
                    term *= (n - k) as f64 / (k + 1) as f64 * ratio;
                }
            }
            acc
        };
        total += 2.0 * rate * a * a * inner;
    }
    total
}

/// Build the 4-state FSM of the K=2, M=2 ALO protocol from the threshold
/// s and per-user budget. States: (1,1), (1,2), (2,1), (2,2); the pair is
/// the attempt index of each user, renewals happen at (1,1).
///
/// Feedback: B=0 when max gain <= s (probability 1-p with
/// p = 1-(1-e^(-s))^2), else B names the strongest user (p/2 each). A
/// scheduled user transmits at 2 P / p and always decodes.
pub fn build_alo_fsm(s: f64, power_budget: f64) -> Result<FsmModel> {
    if s < 0.0 {
        return Err(Error::Argument(format!("threshold must be >= 0, got {s}")));
    }
    let p = max_fading_sf(2, s);
    let rate = if p > 0.0 {
        (2.0 * power_budget * s / p).ln_1p()
    } else {
        0.0
    };
    let on_power = if p > 0.0 { 2.0 * power_budget / p } else { 0.0 };
    let states = ["(1,1)", "(1,2)", "(2,1)", "(2,2)"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let q = 1.0 - p;
    let half = p / 2.0;
    // Transitions: from (1,1): B=1 -> (1,2), B=2 -> (2,1), B=0 -> (2,2).
    // From (1,2): B=1 -> (1,1); B in {0,2} -> (2,1). Symmetric for (2,1).
    // (2,2) always renews.
    let transition = vec![
        vec![0.0, half, half, q],
        vec![half, 0.0, 1.0 - half, 0.0],
        vec![half, 1.0 - half, 0.0, 0.0],
        vec![1.0, 0.0, 0.0, 0.0],
    ];
    // Expected reward per transition: R whenever some user is scheduled.
    // Merged arrows ((1,2) -> (2,1) covers B=0 and B=2) carry the
    // conditional expectation.
    let merged = if 1.0 - half > 0.0 { rate * half / (1.0 - half) } else { 0.0 };
    let reward = vec![
        vec![0.0, rate, rate, 0.0],
        vec![rate, 0.0, merged, 0.0],
        vec![rate, merged, 0.0, 0.0],
        vec![rate * p, 0.0, 0.0, 0.0],
    ];
    let merged_pw = if 1.0 - half > 0.0 { on_power * half / (1.0 - half) } else { 0.0 };
    let power = vec![
        vec![0.0, on_power, on_power, 0.0],
        vec![on_power, 0.0, merged_pw, 0.0],
        vec![on_power, merged_pw, 0.0, 0.0],
        vec![on_power * p, 0.0, 0.0, 0.0],
    ];
    Ok(FsmModel {
        states,
        transition,
        reward,
        power,
        renewal_state: 0,
    })
}
