//! Trial-by-trial evolution of the full system ⊗ pointer ⊗ memory state.
//!
//! In fresh-systems mode the state lives on `2^N · 3 · 3^N` amplitudes,
//! far beyond dense storage for moderate `N`, but only `O(2^N)` of them are
//! ever non-zero. The state is therefore kept as a sparse map from basis
//! digits to amplitudes.

use std::collections::BTreeMap;

use super::{BranchRecord, MeasurementProtocol, Outcome, Record, TrialMode, POINTER_READY, SLOT_BLANK};
use crate::error::{Error, Result};
use crate::hilbert::C64;

/// Largest trial count the sparse simulation accepts.
pub const MAX_SIMULATED_TRIALS: usize = 16;

const PRUNE: f64 = 1e-300;

type Sparse = BTreeMap<Vec<u8>, C64>;

struct Layout {
    trials: usize,
    systems: usize,
}

impl Layout {
    fn pointer(&self) -> usize {
        self.systems
    }

    fn slot(&self, k: usize) -> usize {
        self.systems + 1 + k
    }

    fn system_for(&self, k: usize) -> usize {
        if self.systems == 1 {
            0
        } else {
            k
        }
    }
}

/// Apply the measurement unitary once per trial and decompose the final
/// state by memory record.
///
/// Each returned branch carries the overlap of its memory component with
/// the expected `|φ_r⟩ ⊗ |ready⟩` as amplitude, and the full norm² of
/// that component as weight, so any leakage shows up as a mismatch.
pub fn simulate_trials(
    proto: &MeasurementProtocol,
    c_plus: C64,
    c_minus: C64,
    trials: usize,
    mode: TrialMode,
) -> Result<Vec<BranchRecord>> {
    if trials == 0 {
        return Err(Error::Contract("at least one trial is required".into()));
    }
    if trials > MAX_SIMULATED_TRIALS {
        return Err(Error::Size {
            what: "simulated trial count",
            requested: trials,
            limit: MAX_SIMULATED_TRIALS,
        });
    }
    let norm = (c_plus.norm_sqr() + c_minus.norm_sqr()).sqrt();
    if !(norm > 0.0) {
        return Err(Error::Contract("coefficients must not both vanish".into()));
    }
    let system = proto.system_state(c_plus / norm, c_minus / norm);
    let layout = Layout {
        trials,
        systems: match mode {
            TrialMode::FreshSystems => trials,
            TrialMode::SameSystem => 1,
        },
    };

    let mut state = initial_state(&layout, system.amplitudes());
    let local = proto.local_unitary()?.to_dense();
    let levels = proto.slot_levels();
    let columns: Vec<Vec<(usize, C64)>> = (0..local.ncols())
        .map(|j| {
            (0..local.nrows())
                .filter(|&i| local[(i, j)].norm_sqr() > 0.0)
                .map(|i| (i, local[(i, j)]))
                .collect()
        })
        .collect();

    for k in 0..trials {
        let factors = [layout.system_for(k), layout.pointer(), layout.slot(k)];
        let mut next = Sparse::new();
        for (digits, amp) in &state {
            let (s, p, m) = (digits[factors[0]], digits[factors[1]], digits[factors[2]]);
            let col = (s as usize * 3 + p as usize) * levels + m as usize;
            for &(row, u) in &columns[col] {
                let mut out = digits.clone();
                out[factors[0]] = (row / (3 * levels)) as u8;
                out[factors[1]] = (row / levels % 3) as u8;
                out[factors[2]] = (row % levels) as u8;
                *next.entry(out).or_insert(C64::new(0.0, 0.0)) += u * amp;
            }
        }
        next.retain(|_, a| a.norm_sqr() > PRUNE);
        state = next;
    }
    read_branches(proto, &layout, &state)
}

fn initial_state(layout: &Layout, system: &[C64]) -> Sparse {
    let width = layout.systems + 1 + layout.trials;
    let mut state = Sparse::new();
    for combo in 0..1usize << layout.systems {
        let mut digits = vec![SLOT_BLANK as u8; width];
        let mut amp = C64::new(1.0, 0.0);
        for s in 0..layout.systems {
            let bit = combo >> (layout.systems - 1 - s) & 1;
            digits[s] = bit as u8;
            amp *= system[bit];
        }
        digits[layout.pointer()] = POINTER_READY as u8;
        if amp.norm_sqr() > PRUNE {
            state.insert(digits, amp);
        }
    }
    state
}

fn read_branches(proto: &MeasurementProtocol, layout: &Layout, state: &Sparse) -> Result<Vec<BranchRecord>> {
    let mut by_record: BTreeMap<Vec<u8>, (C64, f64)> = BTreeMap::new();
    for (digits, amp) in state {
        let memory = digits[layout.slot(0)..].to_vec();
        if memory.iter().any(|&m| m as usize == SLOT_BLANK) {
            return Err(Error::Structure("a memory slot stayed blank after its trial".into()));
        }
        let outcomes: Vec<Outcome> = memory.iter().map(|&m| slot_outcome(m)).collect();
        let mut expected = if digits[layout.pointer()] as usize == POINTER_READY {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        };
        for s in 0..layout.systems {
            // same-system branches end in the eigenstate of the last record
            let o = if layout.systems == 1 { outcomes[layout.trials - 1] } else { outcomes[s] };
            expected *= proto.eigenstate(o).amplitude(digits[s] as usize).conj();
        }
        let entry = by_record.entry(memory).or_insert((C64::new(0.0, 0.0), 0.0));
        entry.0 += expected * amp;
        entry.1 += amp.norm_sqr();
    }
    let mut out: Vec<BranchRecord> = by_record
        .into_iter()
        .map(|(memory, (amplitude, weight))| {
            let outcomes: Vec<Outcome> = memory.iter().map(|&m| slot_outcome(m)).collect();
            Ok(BranchRecord {
                record: Record::new(&outcomes)?,
                amplitude,
                weight,
            })
        })
        .collect::<Result<_>>()?;
    out.sort_by_key(|b| b.record.index());
    Ok(out)
}

fn slot_outcome(level: u8) -> Outcome {
    if level as usize == super::SLOT_PLUS {
        Outcome::Plus
    } else {
        Outcome::Minus
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::{device_state, run_trials, MemoryRegister, POINTER_LEVELS};
    use crate::hilbert::{apply_local, inner, StateVector, Tensor};

    fn rotated(theta: f64, repeatable: bool) -> MeasurementProtocol {
        let (c, s) = (theta.cos(), theta.sin());
        MeasurementProtocol::new(
            StateVector::new(vec![C64::new(c, 0.0), C64::new(0.0, s)], vec![2]).unwrap(),
            StateVector::new(vec![C64::new(0.0, s), C64::new(c, 0.0)], vec![2]).unwrap(),
            repeatable,
        )
        .unwrap()
    }

    fn assert_matches_combinatorics(proto: &MeasurementProtocol, cp: C64, cm: C64, n: usize, mode: TrialMode) {
        let sim = simulate_trials(proto, cp, cm, n, mode).unwrap();
        let ens = run_trials(cp, cm, n, mode).unwrap();
        let supported: Vec<_> = ens.support().collect();
        let sim: Vec<_> = sim.into_iter().filter(|b| b.weight > 1e-24).collect();
        assert_eq!(sim.len(), supported.len());
        for (a, b) in sim.iter().zip(&supported) {
            assert_eq!(a.record, b.record);
            assert!((a.amplitude - b.amplitude).norm() < 1e-10, "{}: {} vs {}", a.record, a.amplitude, b.amplitude);
            assert!((a.weight - b.weight).abs() < 1e-10);
        }
    }

    #[test]
    fn fresh_systems_match_combinatorics() {
        let proto = rotated(0.4, true);
        assert_matches_combinatorics(&proto, C64::new(0.6, 0.1), C64::new(-0.3, 0.7), 6, TrialMode::FreshSystems);
        assert_matches_combinatorics(&MeasurementProtocol::z_basis(), C64::new(0.6, 0.0), C64::new(0.8, 0.0), 10, TrialMode::FreshSystems);
    }

    #[test]
    fn same_system_matches_combinatorics() {
        let proto = rotated(1.1, true);
        assert_matches_combinatorics(&proto, C64::new(0.6, 0.0), C64::new(0.0, 0.8), 5, TrialMode::SameSystem);
    }

    #[test]
    fn non_repeatable_same_system_produces_mixed_records() {
        let proto = rotated(0.0, false);
        let sim = simulate_trials(&proto, C64::new(0.6, 0.0), C64::new(0.8, 0.0), 2, TrialMode::SameSystem).unwrap();
        let names: Vec<String> = sim.iter().map(|b| b.record.to_string()).collect();
        assert_eq!(names, ["++", "-+"]);
    }

    /// Dense reference: sequential apply_local on the full tensor state.
    #[test]
    fn sparse_agrees_with_dense_state() {
        let proto = rotated(0.3, true);
        let (cp, cm) = (C64::new(0.2, 0.5), C64::new(0.8, -0.1));
        let n = 3;
        let norm = (cp.norm_sqr() + cm.norm_sqr()).sqrt();
        let sys = proto.system_state(cp / norm, cm / norm);
        let mut state = sys.clone();
        for _ in 1..n {
            state = state.tensor(&sys).unwrap();
        }
        let tail = device_state(&StateVector::basis(vec![1], 0).unwrap(), POINTER_READY, &MemoryRegister::ready(n), 3)
            .unwrap();
        let mut state = state.tensor(&tail).unwrap();
        let mut dims = vec![2; n];
        dims.push(POINTER_LEVELS);
        dims.extend(vec![3; n]);
        state = state.with_factor_dims(dims.clone()).unwrap();
        let local = proto.local_unitary().unwrap();
        for k in 0..n {
            state = apply_local(&local, &state, &[k, n, n + 1 + k]).unwrap();
        }
        let sim = simulate_trials(&proto, cp, cm, n, TrialMode::FreshSystems).unwrap();
        for b in &sim {
            let mut expected = proto.eigenstate(b.record.get(0).unwrap()).clone();
            for o in b.record.outcomes().skip(1) {
                expected = expected.tensor(proto.eigenstate(o)).unwrap();
            }
            let reg = MemoryRegister::with_records(n, &b.record.outcomes().collect::<Vec<_>>()).unwrap();
            let full = device_state(&expected, POINTER_READY, &reg, 3).unwrap();
            let dense_amp = inner(&full, &state).unwrap();
            assert!((dense_amp - b.amplitude).norm() < 1e-12);
        }
    }

    #[test]
    fn distinct_records_stay_orthogonal_under_more_trials() {
        // after every further trial the weight of each prefix is unchanged
        let proto = rotated(0.7, true);
        let (cp, cm) = (C64::new(0.6, 0.0), C64::new(0.8, 0.0));
        let short = simulate_trials(&proto, cp, cm, 2, TrialMode::FreshSystems).unwrap();
        let long = simulate_trials(&proto, cp, cm, 5, TrialMode::FreshSystems).unwrap();
        for b in &short {
            let prefix = b.record.to_string();
            let w: f64 = long
                .iter()
                .filter(|l| l.record.to_string().starts_with(&prefix))
                .map(|l| l.weight)
                .sum();
            assert!((w - b.weight).abs() < 1e-12);
        }
    }

    #[test]
    fn too_many_trials_is_a_size_error() {
        let proto = MeasurementProtocol::z_basis();
        let r = simulate_trials(&proto, C64::new(1.0, 0.0), C64::new(1.0, 0.0), 17, TrialMode::FreshSystems);
        assert!(matches!(r, Err(Error::Size { .. })));
    }
}
