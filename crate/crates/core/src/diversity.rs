//! Population entropy: the diversity measure the EA maximises.
//!
//! For each (patient, room, day) triple, `n_prt` counts how many population
//! members assign patient `p` to room `r` on day `t`. The population entropy
//! is the sum of `h(n_prt)` over all triples, where
//! `h(x) = -(x/mu) * log(x/mu)`. Counts are kept sparsely per patient-day: a
//! patient-day has at most `mu` occupied rooms, while the instance may have
//! many more.

use crate::model::{RoomIdx, Solution};

/// Entropy contribution of a single count: `-(x/mu) * log(x/mu)` in the given
/// base, and 0 at both ends (`x = 0` by convention, `x = mu` since `log 1 = 0`).
///
/// Panics when `x > mu`: a count can never exceed the population size, so
/// that is corrupted state, not an input to tolerate.
pub fn h(x: u32, mu: u32, log_base: f64) -> f64 {
    assert!(mu >= 1, "population size must be at least 1");
    assert!(x <= mu, "count {x} exceeds population size {mu}");
    if x == 0 || x == mu {
        return 0.0;
    }
    let f = f64::from(x) / f64::from(mu);
    -f * f.ln() / log_base.ln()
}

/// Theoretical entropy ceiling: every patient-day spreads its `mu` members
/// over the rooms as evenly as the pigeonhole principle allows, so
/// `mu mod num_rooms` rooms hold one extra member. Multiplied by the total
/// patient-days `w`. With `mu <= num_rooms` this reduces to `w * log(mu)`.
pub fn max_entropy(w: u64, num_rooms: usize, mu: u32, log_base: f64) -> f64 {
    assert!(num_rooms >= 1, "need at least one room");
    let rooms = num_rooms as u32;
    let quotient = mu / rooms;
    let remainder = mu % rooms;
    // With a zero remainder `quotient + 1` may exceed `mu`, so the heavier
    // rooms only enter the sum when at least one exists.
    let mut per_day = f64::from(rooms - remainder) * h(quotient, mu, log_base);
    if remainder > 0 {
        per_day += f64::from(remainder) * h(quotient + 1, mu, log_base);
    }
    w as f64 * per_day
}

/// Sparse `n_prt` counters for one population, with the entropy cached.
///
/// The cache is updated through [`EntropyState::commit_replace`] only, along
/// the same float path [`EntropyState::replace_delta`] reports, so an accept
/// decision and the committed value can never disagree.
#[derive(Debug, Clone)]
pub struct EntropyState {
    /// `counts[patient][day_offset]` holds (room, n_prt) pairs; absent rooms
    /// have count 0 and entries are removed when they reach 0.
    counts: Vec<Vec<Vec<(RoomIdx, u32)>>>,
    mu: u32,
    log_base: f64,
    /// `h(x)` for `x` in `0..=mu`, so every code path evaluates `h` identically.
    h_table: Vec<f64>,
    cached_h: f64,
}

impl EntropyState {
    /// Builds counters from the current members and computes the entropy.
    /// All members must assign the same patients over the same stays.
    pub fn from_population(members: &[Solution], log_base: f64) -> Self {
        assert!(!members.is_empty(), "population must be non-empty");
        let mu = u32::try_from(members.len()).expect("population size fits u32");
        let num_patients = members[0].assignment().len();

        let mut counts: Vec<Vec<Vec<(RoomIdx, u32)>>> = (0..num_patients)
            .map(|p| vec![Vec::new(); members[0].patient_rooms(p).len()])
            .collect();
        for member in members {
            debug_assert_eq!(member.assignment().len(), num_patients);
            for (p, rooms) in member.assignment().iter().enumerate() {
                debug_assert_eq!(rooms.len(), counts[p].len());
                for (d, &room) in rooms.iter().enumerate() {
                    hist_incr(&mut counts[p][d], room);
                }
            }
        }

        let h_table: Vec<f64> = (0..=mu).map(|x| h(x, mu, log_base)).collect();
        let mut state = EntropyState {
            counts,
            mu,
            log_base,
            h_table,
            cached_h: 0.0,
        };
        state.cached_h = state.recompute();
        state
    }

    pub fn mu(&self) -> u32 {
        self.mu
    }

    pub fn log_base(&self) -> f64 {
        self.log_base
    }

    /// The cached entropy, maintained incrementally.
    pub fn cached(&self) -> f64 {
        self.cached_h
    }

    /// `n_prt` for one triple, addressed by stay-day offset.
    pub fn count(&self, patient: usize, day_offset: usize, room: RoomIdx) -> u32 {
        hist_count(&self.counts[patient][day_offset], room)
    }

    /// How often each of `patient`'s current rooms in `member` recurs across
    /// the population, summed over her stay. The biased mutation's weight.
    pub fn assignment_frequency(&self, member: &Solution, patient: usize) -> u64 {
        member
            .patient_rooms(patient)
            .iter()
            .enumerate()
            .map(|(d, &room)| u64::from(self.count(patient, d, room)))
            .sum()
    }

    /// Full recomputation from the counters; the oracle the cache is held to.
    pub fn recompute(&self) -> f64 {
        let mut total = 0.0;
        for per_patient in &self.counts {
            for hist in per_patient {
                for &(_, n) in hist {
                    total += self.h_table[n as usize];
                }
            }
        }
        total
    }

    /// Entropy of the population with `parent` swapped for `offspring`,
    /// touching only the triples where the two differ. Pure query; panics if
    /// a count to decrement is absent (the parent is not in the population).
    pub fn replace_delta(&self, parent: &Solution, offspring: &Solution) -> f64 {
        let mut delta = 0.0;
        for (p, (old_rooms, new_rooms)) in parent
            .assignment()
            .iter()
            .zip(offspring.assignment())
            .enumerate()
        {
            debug_assert_eq!(old_rooms.len(), new_rooms.len());
            for (d, (&old_room, &new_room)) in old_rooms.iter().zip(new_rooms).enumerate() {
                if old_room == new_room {
                    continue;
                }
                let n_old = hist_count(&self.counts[p][d], old_room);
                assert!(
                    n_old >= 1,
                    "count for patient {p}, stay day {d}, room {old_room} is 0; \
                     the parent is not part of this population"
                );
                let n_new = hist_count(&self.counts[p][d], new_room);
                delta += self.h_table[(n_old - 1) as usize] - self.h_table[n_old as usize]
                    + self.h_table[(n_new + 1) as usize]
                    - self.h_table[n_new as usize];
            }
        }
        self.cached_h + delta
    }

    /// Applies the parent-for-offspring swap to the counters and the cache.
    /// Returns the new entropy, bit-identical to what [`Self::replace_delta`]
    /// reported for the same pair.
    pub fn commit_replace(&mut self, parent: &Solution, offspring: &Solution) -> f64 {
        let new_h = self.replace_delta(parent, offspring);
        for (p, (old_rooms, new_rooms)) in parent
            .assignment()
            .iter()
            .zip(offspring.assignment())
            .enumerate()
        {
            for (d, (&old_room, &new_room)) in old_rooms.iter().zip(new_rooms).enumerate() {
                if old_room == new_room {
                    continue;
                }
                hist_decr(&mut self.counts[p][d], old_room);
                hist_incr(&mut self.counts[p][d], new_room);
            }
        }
        self.cached_h = new_h;
        new_h
    }
}

fn hist_count(hist: &[(RoomIdx, u32)], room: RoomIdx) -> u32 {
    hist.iter()
        .find(|&&(r, _)| r == room)
        .map_or(0, |&(_, n)| n)
}

fn hist_incr(hist: &mut Vec<(RoomIdx, u32)>, room: RoomIdx) {
    match hist.iter_mut().find(|(r, _)| *r == room) {
        Some((_, n)) => *n += 1,
        None => hist.push((room, 1)),
    }
}

fn hist_decr(hist: &mut Vec<(RoomIdx, u32)>, room: RoomIdx) {
    let idx = hist
        .iter()
        .position(|&(r, _)| r == room)
        .unwrap_or_else(|| panic!("decrement of zero count for room {room}"));
    if hist[idx].1 == 1 {
        hist.swap_remove(idx);
    } else {
        hist[idx].1 -= 1;
    }
}
