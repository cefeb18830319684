//! Prisoner's dilemma payoffs and memory-one strategies.
//!
//! A memory-one strategy is four cooperation probabilities, one for each
//! joint outcome of the previous round with the same opponent, read from the
//! focal player's side: `CC`, `CD`, `DC`, `DD` (own move first).

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StrategyError {
    #[error("payoffs must satisfy T > R > P > S (got T={t}, R={r}, P={p}, S={s})")]
    InvalidPayoffs { t: f64, r: f64, p: f64, s: f64 },
    #[error("cooperation probability {value} for state {state} is outside [0, 1]")]
    InvalidProbability { state: Outcome, value: f64 },
    #[error("no zero-determinant strategy for p1={p1}, p4={p4}: derived p2={p2}, p3={p3}")]
    InfeasibleZd { p1: f64, p4: f64, p2: f64, p3: f64 },
    #[error("unknown strategy '{0}'")]
    UnknownStrategy(String),
}

/// Joint outcome of one round, own move first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Outcome {
    CC,
    CD,
    DC,
    DD,
}

impl Outcome {
    pub const ALL: [Outcome; 4] = [Outcome::CC, Outcome::CD, Outcome::DC, Outcome::DD];

    pub fn from_moves(own_cooperates: bool, other_cooperates: bool) -> Self {
        match (own_cooperates, other_cooperates) {
            (true, true) => Outcome::CC,
            (true, false) => Outcome::CD,
            (false, true) => Outcome::DC,
            (false, false) => Outcome::DD,
        }
    }

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// The same outcome seen from the opponent's side.
    #[inline]
    pub fn swap(self) -> Self {
        match self {
            Outcome::CD => Outcome::DC,
            Outcome::DC => Outcome::CD,
            o => o,
        }
    }

    pub fn own_cooperated(self) -> bool {
        matches!(self, Outcome::CC | Outcome::CD)
    }

    pub fn other_cooperated(self) -> bool {
        matches!(self, Outcome::CC | Outcome::DC)
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Outcome::CC => "CC",
            Outcome::CD => "CD",
            Outcome::DC => "DC",
            Outcome::DD => "DD",
        };
        f.write_str(s)
    }
}

/// Prisoner's dilemma payoffs (temptation, reward, punishment, sucker).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PayoffMatrix {
    t: f64,
    r: f64,
    p: f64,
    s: f64,
}

impl PayoffMatrix {
    pub fn new(t: f64, r: f64, p: f64, s: f64) -> Result<Self, StrategyError> {
        if !(t > r && r > p && p > s) || ![t, r, p, s].iter().all(|x| x.is_finite()) {
            return Err(StrategyError::InvalidPayoffs { t, r, p, s });
        }
        Ok(Self { t, r, p, s })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// Payoffs `(own, other)` for an outcome read from the own side.
    #[inline]
    pub fn round_payoffs(&self, o: Outcome) -> (f64, f64) {
        match o {
            Outcome::CC => (self.r, self.r),
            Outcome::CD => (self.s, self.t),
            Outcome::DC => (self.t, self.s),
            Outcome::DD => (self.p, self.p),
        }
    }

    /// Own payoff for each of the four outcomes, in `Outcome::ALL` order.
    pub fn own_payoffs(&self) -> [f64; 4] {
        [self.r, self.s, self.t, self.p]
    }
}

impl Default for PayoffMatrix {
    fn default() -> Self {
        Self {
            t: 5.0,
            r: 3.0,
            p: 1.0,
            s: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryOneStrategy {
    probs: [f64; 4],
    label: String,
}

impl MemoryOneStrategy {
    pub fn new(label: impl Into<String>, probs: [f64; 4]) -> Result<Self, StrategyError> {
        for (state, &value) in Outcome::ALL.iter().zip(probs.iter()) {
            if !(0.0..=1.0).contains(&value) {
                return Err(StrategyError::InvalidProbability { state: *state, value });
            }
        }
        Ok(Self {
            probs,
            label: label.into(),
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn probs(&self) -> [f64; 4] {
        self.probs
    }

    /// Probability of cooperating after `last` (own side).
    #[inline]
    pub fn coop_prob(&self, last: Outcome) -> f64 {
        self.probs[last.index()]
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }
}

impl fmt::Display for MemoryOneStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.probs;
        write!(f, "{} ({a}, {b}, {c}, {d})", self.label)
    }
}

/// The two ZD constraints, giving `(p2, p3)` from `p1`, `p4`.
pub fn zd_constraints(p1: f64, p4: f64, m: &PayoffMatrix) -> (f64, f64) {
    let (t, r, p, s) = (m.t, m.r, m.p, m.s);
    let p2 = (p1 * (t - p) - (1.0 + p4) * (t - r)) / (r - p);
    let p3 = ((1.0 - p1) * (p - s) + p4 * (r - s)) / (r - p);
    (p2, p3)
}

/// Completes `(p1, p4)` into a zero-determinant strategy that pins the
/// opponent's long-run payoff.
///
/// Rejects combinations whose derived `p2` or `p3` are not probabilities;
/// nothing is clamped.
pub fn zd_complete(p1: f64, p4: f64, m: &PayoffMatrix) -> Result<MemoryOneStrategy, StrategyError> {
    for (state, value) in [(Outcome::CC, p1), (Outcome::DD, p4)] {
        if !(0.0..=1.0).contains(&value) {
            return Err(StrategyError::InvalidProbability { state, value });
        }
    }
    let (p2, p3) = zd_constraints(p1, p4, m);
    const EPS: f64 = 1e-12;
    let feasible = |x: f64| x.is_finite() && (-EPS..=1.0 + EPS).contains(&x);
    if !feasible(p2) || !feasible(p3) {
        return Err(StrategyError::InfeasibleZd { p1, p4, p2, p3 });
    }
    // Rounding residue only; genuinely infeasible values were rejected above.
    let (p2, p3) = (p2.clamp(0.0, 1.0), p3.clamp(0.0, 1.0));
    MemoryOneStrategy::new("zd", [p1, p2, p3, p4])
}

/// Long-run payoff any opponent receives against the ZD strategy built from
/// `(p1, p4)`.
pub fn zd_opponent_payoff(p1: f64, p4: f64, m: &PayoffMatrix) -> f64 {
    ((1.0 - p1) * m.p + p4 * m.r) / (1.0 - p1 + p4)
}

pub const ZD_DEFAULT_P1: f64 = 0.99;
pub const ZD_DEFAULT_P4: f64 = 0.01;

pub const CATALOG: [&str; 6] = [
    "pavlov",
    "general_cooperator",
    "cooperator",
    "defector",
    "tit_for_tat",
    "zd_default",
];

/// Looks up a catalog strategy. `zd_default` is completed against the
/// default payoff matrix.
pub fn named_strategy(name: &str) -> Result<MemoryOneStrategy, StrategyError> {
    let probs = match name {
        "pavlov" => [1.0, 0.0, 0.0, 1.0],
        "general_cooperator" => [0.935, 0.229, 0.266, 0.42],
        "cooperator" => [1.0; 4],
        "defector" => [0.0; 4],
        "tit_for_tat" => [1.0, 1.0, 0.0, 0.0],
        "zd_default" => {
            return zd_complete(ZD_DEFAULT_P1, ZD_DEFAULT_P4, &PayoffMatrix::default())
                .map(|s| s.with_label("zd_default"))
        }
        other => return Err(StrategyError::UnknownStrategy(other.to_string())),
    };
    MemoryOneStrategy::new(name, probs)
}

/// Like [`named_strategy`], but ZD entries are completed against `m`.
pub fn named_strategy_for(name: &str, m: &PayoffMatrix) -> Result<MemoryOneStrategy, StrategyError> {
    if name == "zd_default" {
        return zd_complete(ZD_DEFAULT_P1, ZD_DEFAULT_P4, m).map(|s| s.with_label("zd_default"));
    }
    named_strategy(name)
}
