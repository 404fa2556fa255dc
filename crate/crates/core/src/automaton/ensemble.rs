use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use super::Outcome;
use crate::error::{Error, Result};
use crate::hilbert::C64;

/// Default largest trial count enumerated in fresh-systems mode.
pub const DEFAULT_TRIAL_CAP: usize = 24;

/// Hard limit from the packed record representation.
pub const MAX_RECORD_LEN: usize = 127;

/// Slack when testing `|k/N − p| ≥ ε` so that lattice deviations count as
/// reaching `ε` despite rounding.
pub const DEVIATION_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum TrialMode {
    /// Each trial measures a new copy of the prepared system.
    FreshSystems,
    /// Every trial re-measures the one system.
    SameSystem,
}

impl FromStr for TrialMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fresh_systems" => Ok(TrialMode::FreshSystems),
            "same_system" => Ok(TrialMode::SameSystem),
            other => Err(Error::Mode(format!("unknown trial mode {other:?}"))),
        }
    }
}

impl fmt::Display for TrialMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrialMode::FreshSystems => "fresh_systems",
            TrialMode::SameSystem => "same_system",
        })
    }
}

/// A sequence of outcomes, packed as a bit set of `−` positions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Record {
    len: u8,
    minus_bits: u128,
}

impl Record {
    pub fn new(outcomes: &[Outcome]) -> Result<Self> {
        if outcomes.len() > MAX_RECORD_LEN {
            return Err(Error::Size {
                what: "record length",
                requested: outcomes.len(),
                limit: MAX_RECORD_LEN,
            });
        }
        let minus_bits = outcomes
            .iter()
            .enumerate()
            .filter(|(_, &o)| o == Outcome::Minus)
            .fold(0u128, |acc, (i, _)| acc | (1 << i));
        Ok(Self {
            len: outcomes.len() as u8,
            minus_bits,
        })
    }

    /// Record number `index` among the `2^len` records, `0` being all `+`
    /// and the first trial being the most significant digit.
    pub fn from_index(len: usize, index: u128) -> Self {
        let mut minus_bits = 0u128;
        for i in 0..len {
            if index >> (len - 1 - i) & 1 == 1 {
                minus_bits |= 1 << i;
            }
        }
        Self {
            len: len as u8,
            minus_bits,
        }
    }

    /// Inverse of [`Record::from_index`].
    pub fn index(&self) -> u128 {
        (0..self.len()).fold(0u128, |acc, i| acc << 1 | (self.minus_bits >> i & 1))
    }

    pub fn uniform(len: usize, o: Outcome) -> Self {
        let minus_bits = match o {
            Outcome::Plus => 0,
            Outcome::Minus if len == 128 => u128::MAX,
            Outcome::Minus => (1u128 << len) - 1,
        };
        Self {
            len: len as u8,
            minus_bits,
        }
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> Option<Outcome> {
        (i < self.len()).then(|| {
            if self.minus_bits >> i & 1 == 1 {
                Outcome::Minus
            } else {
                Outcome::Plus
            }
        })
    }

    pub fn outcomes(&self) -> impl Iterator<Item = Outcome> + '_ {
        (0..self.len()).map(|i| self.get(i).unwrap())
    }

    pub fn plus_count(&self) -> usize {
        self.len() - self.minus_bits.count_ones() as usize
    }
}

impl fmt::Display for Record {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for o in self.outcomes() {
            write!(f, "{o}")?;
        }
        Ok(())
    }
}

impl FromStr for Record {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let outcomes: Option<Vec<Outcome>> = s.chars().map(Outcome::from_symbol).collect();
        let outcomes = outcomes.ok_or_else(|| Error::Contract(format!("bad record {s:?}")))?;
        Record::new(&outcomes)
    }
}

impl Serialize for Record {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BranchRecord {
    pub record: Record,
    pub amplitude: C64,
    pub weight: f64,
}

impl BranchRecord {
    pub fn new(record: Record, amplitude: C64) -> Self {
        Self {
            record,
            amplitude,
            weight: amplitude.norm_sqr(),
        }
    }
}

/// All branches of `N` trials on the prepared state `c₊|φ+⟩ + c₋|φ−⟩`.
///
/// Branches are generated on demand; a fresh-systems ensemble has `2^N`
/// of them, so nothing is materialized until asked for.
#[derive(Clone, Debug, Serialize)]
pub struct BranchEnsemble {
    c_plus: C64,
    c_minus: C64,
    raw_norm_sqr: f64,
    p: f64,
    trials: usize,
    mode: TrialMode,
}

impl BranchEnsemble {
    /// Normalized `c₊`.
    pub fn c_plus(&self) -> C64 {
        self.c_plus
    }

    /// Normalized `c₋`.
    pub fn c_minus(&self) -> C64 {
        self.c_minus
    }

    /// `|c₊|² + |c₋|²` of the input before normalization.
    pub fn raw_norm_sqr(&self) -> f64 {
        self.raw_norm_sqr
    }

    /// `|c₊|² / (|c₊|² + |c₋|²)`.
    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn trials(&self) -> usize {
        self.trials
    }

    pub fn mode(&self) -> TrialMode {
        self.mode
    }

    pub fn len(&self) -> u128 {
        match self.mode {
            TrialMode::FreshSystems => 1u128 << self.trials,
            TrialMode::SameSystem => 2,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn amplitude(&self, record: &Record) -> C64 {
        if record.len() != self.trials {
            return C64::new(0.0, 0.0);
        }
        let k = record.plus_count() as i32;
        let n = self.trials as i32;
        match self.mode {
            TrialMode::FreshSystems => self.c_plus.powi(k) * self.c_minus.powi(n - k),
            TrialMode::SameSystem if k == n => self.c_plus,
            TrialMode::SameSystem if k == 0 => self.c_minus,
            TrialMode::SameSystem => C64::new(0.0, 0.0),
        }
    }

    pub fn branch(&self, index: u128) -> BranchRecord {
        let record = match self.mode {
            TrialMode::FreshSystems => Record::from_index(self.trials, index),
            TrialMode::SameSystem if index == 0 => Record::uniform(self.trials, Outcome::Plus),
            TrialMode::SameSystem => Record::uniform(self.trials, Outcome::Minus),
        };
        BranchRecord::new(record, self.amplitude(&record))
    }

    /// Every branch in record order, `+…+` first.
    pub fn branches(&self) -> impl Iterator<Item = BranchRecord> + '_ {
        (0..self.len()).map(|i| self.branch(i))
    }

    /// Branches carrying non-zero weight.
    pub fn support(&self) -> impl Iterator<Item = BranchRecord> + '_ {
        self.branches().filter(|b| b.weight > 0.0)
    }

    /// Sum of branch weights by enumeration. Chunks of records are summed
    /// in parallel and combined in record order, so the result does not
    /// depend on scheduling.
    pub fn total_weight(&self) -> f64 {
        const CHUNK: u128 = 1 << 12;
        let chunks = self.len().div_ceil(CHUNK);
        let partial: Vec<f64> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let end = ((c + 1) * CHUNK).min(self.len());
                (c * CHUNK..end).map(|i| self.branch(i).weight).sum()
            })
            .collect();
        partial.into_iter().sum()
    }

    fn require_fresh(&self) -> Result<()> {
        match self.mode {
            TrialMode::FreshSystems => Ok(()),
            TrialMode::SameSystem => Err(Error::Mode(
                "frequency statistics need independent trials (fresh_systems)".into(),
            )),
        }
    }
}

/// Branches for `N` trials with the default cap.
pub fn run_trials(c_plus: C64, c_minus: C64, trials: usize, mode: TrialMode) -> Result<BranchEnsemble> {
    run_trials_capped(c_plus, c_minus, trials, mode, DEFAULT_TRIAL_CAP)
}

/// Branches for `N` trials, refusing fresh-systems runs above `cap`.
pub fn run_trials_capped(
    c_plus: C64,
    c_minus: C64,
    trials: usize,
    mode: TrialMode,
    cap: usize,
) -> Result<BranchEnsemble> {
    let raw_norm_sqr = c_plus.norm_sqr() + c_minus.norm_sqr();
    if !(raw_norm_sqr > 0.0) || !raw_norm_sqr.is_finite() {
        return Err(Error::Contract("coefficients must be finite and not both zero".into()));
    }
    if trials == 0 {
        return Err(Error::Contract("at least one trial is required".into()));
    }
    let limit = match mode {
        TrialMode::FreshSystems => cap.min(MAX_RECORD_LEN),
        TrialMode::SameSystem => MAX_RECORD_LEN,
    };
    if trials > limit {
        return Err(Error::Size {
            what: "trial count",
            requested: trials,
            limit,
        });
    }
    let norm = raw_norm_sqr.sqrt();
    Ok(BranchEnsemble {
        c_plus: c_plus / norm,
        c_minus: c_minus / norm,
        raw_norm_sqr,
        p: c_plus.norm_sqr() / raw_norm_sqr,
        trials,
        mode,
    })
}

/// `ln C(n, k)` by accumulating ratios.
fn ln_choose(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).map(|i| ((n - i) as f64 / (i + 1) as f64).ln()).sum()
}

/// `C(N,k) p^k (1−p)^{N−k}`.
pub fn binomial_pmf(n: usize, k: usize, p: f64) -> f64 {
    if k > n {
        return 0.0;
    }
    let q = 1.0 - p;
    // exact endpoints avoid 0·ln 0
    match (p, k) {
        (p, k) if p == 0.0 => return if k == 0 { 1.0 } else { 0.0 },
        (p, k) if p == 1.0 => return if k == n { 1.0 } else { 0.0 },
        _ => {}
    }
    (ln_choose(n, k) + k as f64 * p.ln() + (n - k) as f64 * q.ln()).exp()
}

/// Total weight of the branches with exactly `k` `+` outcomes.
pub fn frequency_class_weight(ens: &BranchEnsemble, k: usize) -> Result<f64> {
    ens.require_fresh()?;
    if k > ens.trials {
        return Err(Error::Contract(format!("class {k} outside 0..={}", ens.trials)));
    }
    Ok(binomial_pmf(ens.trials, k, ens.p))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BernoulliParams {
    p: f64,
    trials: usize,
    epsilon: f64,
    kappa: f64,
}

impl BernoulliParams {
    pub fn new(p: f64, trials: usize, epsilon: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Contract(format!("p = {p} outside (0, 1)")));
        }
        if trials == 0 {
            return Err(Error::Contract("N must be positive".into()));
        }
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::Contract(format!("epsilon = {epsilon} must be non-negative")));
        }
        Ok(Self {
            p,
            trials,
            epsilon,
            kappa: 4.0 * p * (1.0 - p),
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn trials(&self) -> usize {
        self.trials
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// `N ε² / κ`.
    pub fn exponent(&self) -> f64 {
        self.trials as f64 * self.epsilon * self.epsilon / self.kappa
    }
}

/// `exp(−N ε² / κ)`.
pub fn bernoulli_envelope(params: &BernoulliParams) -> f64 {
    (-params.exponent()).exp()
}

/// Whether `k` successes out of `N` deviate from `p` by at least `ε`.
pub fn is_deviant(k: usize, trials: usize, p: f64, epsilon: f64) -> bool {
    (k as f64 / trials as f64 - p).abs() >= epsilon - DEVIATION_SLACK
}

/// Norm of the superposition of all branches whose `+` frequency deviates
/// from `p` by at least `ε`.
pub fn deviant_set_amplitude(ens: &BranchEnsemble, epsilon: f64) -> Result<f64> {
    ens.require_fresh()?;
    let w: f64 = (0..=ens.trials)
        .filter(|&k| is_deviant(k, ens.trials, ens.p, epsilon))
        .map(|k| binomial_pmf(ens.trials, k, ens.p))
        .sum();
    Ok(w.sqrt())
}

/// Distinct values of `|k/N − p|` in increasing order.
pub fn attainable_deviations(trials: usize, p: f64) -> Vec<f64> {
    let mut d: Vec<f64> = (0..=trials)
        .map(|k| (k as f64 / trials as f64 - p).abs())
        .collect();
    d.sort_by(f64::total_cmp);
    d.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    d
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FrequencyClass {
    pub k: usize,
    pub weight: f64,
    pub envelope: f64,
}

/// Per-class weights with the envelope evaluated at `ε = |k/N − p|`.
pub fn frequency_table(ens: &BranchEnsemble) -> Result<Vec<FrequencyClass>> {
    ens.require_fresh()?;
    (0..=ens.trials)
        .map(|k| {
            let eps = (k as f64 / ens.trials as f64 - ens.p).abs();
            let envelope = if ens.p > 0.0 && ens.p < 1.0 {
                bernoulli_envelope(&BernoulliParams::new(ens.p, ens.trials, eps)?)
            } else {
                f64::NAN
            };
            Ok(FrequencyClass {
                k,
                weight: frequency_class_weight(ens, k)?,
                envelope,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::{BigInt, BigRational, One, ToPrimitive, Zero};
    use proptest::prelude::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn h() -> f64 {
        std::f64::consts::FRAC_1_SQRT_2
    }

    fn exact_pmf(n: usize, k: usize, p: &BigRational) -> BigRational {
        let mut choose = BigInt::one();
        for i in 0..k {
            choose = choose * BigInt::from(n - i) / BigInt::from(i + 1);
        }
        let q = BigRational::one() - p;
        BigRational::from_integer(choose) * num::pow(p.clone(), k) * num::pow(q, n - k)
    }

    #[test]
    fn single_symmetric_trial() {
        let ens = run_trials(c(h()), c(h()), 1, TrialMode::FreshSystems).unwrap();
        let b: Vec<_> = ens.branches().collect();
        assert_eq!(b.len(), 2);
        assert_eq!(b[0].record.to_string(), "+");
        assert_eq!(b[1].record.to_string(), "-");
        for br in b {
            assert!((br.weight - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn certain_outcome_has_one_supported_branch() {
        let ens = run_trials(c(1.0), c(0.0), 3, TrialMode::FreshSystems).unwrap();
        assert_eq!(ens.len(), 8);
        let support: Vec<_> = ens.support().collect();
        assert_eq!(support.len(), 1);
        assert_eq!(support[0].record.to_string(), "+++");
        assert_eq!(support[0].weight, 1.0);
    }

    #[test]
    fn same_system_has_two_branches() {
        let ens = run_trials(c(0.6), c(0.8), 2, TrialMode::SameSystem).unwrap();
        let b: Vec<_> = ens.branches().collect();
        assert_eq!(b.len(), 2);
        assert_eq!(b[0].record.to_string(), "++");
        assert_eq!(b[1].record.to_string(), "--");
        assert!((b[0].weight - 0.36).abs() < 1e-15);
        assert!((b[1].weight - 0.64).abs() < 1e-15);
    }

    #[test]
    fn input_is_normalized_and_raw_norm_reported() {
        let ens = run_trials(c(3.0), c(4.0), 2, TrialMode::FreshSystems).unwrap();
        assert!((ens.raw_norm_sqr() - 25.0).abs() < 1e-12);
        assert!((ens.p() - 0.36).abs() < 1e-15);
        assert!((ens.total_weight() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cap_and_contract_errors() {
        assert!(matches!(
            run_trials(c(1.0), c(1.0), 25, TrialMode::FreshSystems),
            Err(Error::Size { .. })
        ));
        assert!(run_trials(c(1.0), c(1.0), 25, TrialMode::SameSystem).is_ok());
        assert!(run_trials_capped(c(1.0), c(1.0), 40, TrialMode::FreshSystems, 100).is_ok());
        assert!(matches!(
            run_trials(c(0.0), c(0.0), 2, TrialMode::FreshSystems),
            Err(Error::Contract(_))
        ));
        assert!(run_trials(c(1.0), c(0.0), 0, TrialMode::FreshSystems).is_err());
    }

    #[test]
    fn class_weight_examples() {
        let ens = run_trials(c(h()), c(h()), 2, TrialMode::FreshSystems).unwrap();
        assert!((frequency_class_weight(&ens, 1).unwrap() - 0.5).abs() < 1e-15);
        let ens = run_trials(c(h()), c(h()), 4, TrialMode::FreshSystems).unwrap();
        assert!((frequency_class_weight(&ens, 4).unwrap() - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn class_weight_matches_exact_pmf() {
        let ens = run_trials(c(0.6), c(0.8), 3, TrialMode::FreshSystems).unwrap();
        let p = BigRational::new(BigInt::from(9), BigInt::from(25));
        let want = exact_pmf(3, 2, &p).to_f64().unwrap();
        assert!((want - 0.248832).abs() < 1e-15);
        assert!((frequency_class_weight(&ens, 2).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn class_weight_rejects_same_system() {
        let ens = run_trials(c(0.6), c(0.8), 3, TrialMode::SameSystem).unwrap();
        assert!(matches!(frequency_class_weight(&ens, 1), Err(Error::Mode(_))));
        assert!(matches!(deviant_set_amplitude(&ens, 0.1), Err(Error::Mode(_))));
    }

    #[test]
    fn class_weights_equal_enumerated_sums() {
        let ens = run_trials(C64::new(0.3, 0.4), C64::new(0.0, -0.7), 10, TrialMode::FreshSystems)
            .unwrap();
        let mut by_class = vec![0.0; 11];
        for b in ens.branches() {
            by_class[b.record.plus_count()] += b.weight;
        }
        for (k, w) in by_class.iter().enumerate() {
            assert!((frequency_class_weight(&ens, k).unwrap() - w).abs() < 1e-14);
        }
    }

    #[test]
    fn envelope_examples() {
        let e = bernoulli_envelope(&BernoulliParams::new(0.5, 100, 0.1).unwrap());
        assert!((e - (-1.0f64).exp()).abs() < 1e-15);
        assert!((e - 0.36788).abs() < 1e-5);
        assert_eq!(bernoulli_envelope(&BernoulliParams::new(0.3, 10, 0.0).unwrap()), 1.0);
        let params = BernoulliParams::new(0.25, 64, 0.125).unwrap();
        assert_eq!(params.kappa(), 4.0 * 0.25 * 0.75);
        let e = bernoulli_envelope(&params);
        assert!((e - (-4.0f64 / 3.0).exp()).abs() < 1e-15);
    }

    #[test]
    fn deviant_amplitude_examples() {
        let ens = run_trials(c(h()), c(h()), 20, TrialMode::FreshSystems).unwrap();
        assert_eq!(deviant_set_amplitude(&ens, 0.51).unwrap(), 0.0);
        assert!((deviant_set_amplitude(&ens, 0.0).unwrap() - 1.0).abs() < 1e-12);

        let half = BigRational::new(BigInt::one(), BigInt::from(2));
        let tail = (0..=6).fold(BigRational::zero(), |acc, k| acc + exact_pmf(20, k, &half));
        let want = (BigRational::from_integer(BigInt::from(2)) * tail).to_f64().unwrap().sqrt();
        let got = deviant_set_amplitude(&ens, 0.2).unwrap();
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn hundred_trials_stay_lazy() {
        let ens = run_trials_capped(c(0.6), c(0.8), 100, TrialMode::FreshSystems, 100).unwrap();
        assert_eq!(ens.len(), 1u128 << 100);
        let last = ens.branch(ens.len() - 1);
        assert_eq!(last.record.plus_count(), 0);
        assert!((last.weight - 0.64f64.powi(100)).abs() < 1e-30);
        let p = BigRational::new(BigInt::from(9), BigInt::from(25));
        let tail = (0..=100)
            .filter(|&k| is_deviant(k, 100, 0.36, 0.2))
            .fold(BigRational::zero(), |acc, k| acc + exact_pmf(100, k, &p));
        let got = deviant_set_amplitude(&ens, 0.2).unwrap();
        assert!((got - tail.to_f64().unwrap().sqrt()).abs() < 1e-12);
        assert!(matches!(
            run_trials_capped(c(0.6), c(0.8), MAX_RECORD_LEN + 1, TrialMode::FreshSystems, 1000),
            Err(Error::Size { limit: MAX_RECORD_LEN, .. })
        ));
    }

    #[test]
    fn records_round_trip() {
        let r: Record = "+-+-".parse().unwrap();
        assert_eq!(r.plus_count(), 2);
        assert_eq!(r.to_string(), "+-+-");
        assert_eq!(Record::from_index(4, 0b0101), r);
        assert!("+x".parse::<Record>().is_err());
    }

    proptest! {
        #[test]
        fn weights_factorize_and_sum_to_one(
            a in -1.0f64..1.0, b in -1.0f64..1.0, c_ in -1.0f64..1.0, d in -1.0f64..1.0,
            n in 1usize..10,
        ) {
            prop_assume!(a * a + b * b + c_ * c_ + d * d > 1e-3);
            let ens = run_trials(C64::new(a, b), C64::new(c_, d), n, TrialMode::FreshSystems).unwrap();
            let p = ens.p();
            for br in ens.branches() {
                let k = br.record.plus_count() as i32;
                let born = p.powi(k) * (1.0 - p).powi(n as i32 - k);
                prop_assert!((br.weight - born).abs() < 1e-12);
                prop_assert!((br.weight - br.amplitude.norm_sqr()).abs() < 1e-12);
            }
            prop_assert!((ens.total_weight() - 1.0).abs() < 1e-10);
        }

        #[test]
        fn deviant_weight_matches_exact_tail(n in 1usize..60, k0 in 0usize..60, pnum in 1i64..24) {
            let p = BigRational::new(BigInt::from(pnum), BigInt::from(25));
            let pf = pnum as f64 / 25.0;
            let eps = (k0.min(n) as f64 / n as f64 - pf).abs();
            let ens = run_trials(c(pf.sqrt()), c((1.0 - pf).sqrt()), n, TrialMode::FreshSystems)
                .or_else(|_| run_trials_capped(c(pf.sqrt()), c((1.0 - pf).sqrt()), n, TrialMode::FreshSystems, 100))
                .unwrap();
            let exact = (0..=n)
                .filter(|&k| is_deviant(k, n, pf, eps))
                .fold(BigRational::zero(), |acc, k| acc + exact_pmf(n, k, &p));
            let want = exact.to_f64().unwrap().sqrt();
            prop_assert!((deviant_set_amplitude(&ens, eps).unwrap() - want).abs() < 1e-12);
        }
    }
}
