//! Per-module visit and transition counts.
//!
//! Every time-step belongs to module `t mod tau_mix`. Counts are kept per
//! `(module, state, action)` with transition counts over the birth-death
//! support `{s-1, s, s+1}`. In-episode counts `V` are folded into the
//! cumulative counts `N` at episode end; ramping-phase steps are never
//! recorded anywhere.

use crate::error::{Error, Result};
use crate::mdp::Action;

const ACTIONS: usize = 2;
/// Transition slots relative to the origin state.
pub const DOWN: usize = 0;
pub const STAY: usize = 1;
pub const UP: usize = 2;

#[derive(Debug, Clone)]
pub struct ModuleCounts {
    tau_mix: usize,
    n_states: usize,
    /// Cumulative visits, folded at episode ends: `[module][state][action]`.
    n: Vec<u64>,
    /// Cumulative transition counts: `[module][state][action][slot]`.
    n_trans: Vec<u64>,
    /// Current-episode visits.
    v: Vec<u64>,
    v_trans: Vec<u64>,
}

impl ModuleCounts {
    pub fn new(tau_mix: usize, n_states: usize) -> ModuleCounts {
        assert!(tau_mix >= 1 && n_states >= 1);
        let cells = tau_mix * n_states * ACTIONS;
        ModuleCounts {
            tau_mix,
            n_states,
            n: vec![0; cells],
            n_trans: vec![0; cells * 3],
            v: vec![0; cells],
            v_trans: vec![0; cells * 3],
        }
    }

    pub fn tau_mix(&self) -> usize {
        self.tau_mix
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    fn cell(&self, module: usize, s: usize, a: Action) -> usize {
        debug_assert!(module < self.tau_mix && s < self.n_states);
        (module * self.n_states + s) * ACTIONS + a.index()
    }

    /// Cumulative count `N^{(module)}(s, a)` up to the current episode start.
    pub fn cumulative(&self, module: usize, s: usize, a: Action) -> u64 {
        self.n[self.cell(module, s, a)]
    }

    /// In-episode count `V^{(module)}(s, a)`.
    pub fn in_episode(&self, module: usize, s: usize, a: Action) -> u64 {
        self.v[self.cell(module, s, a)]
    }

    /// Records one observed transition. Ramping steps are discarded; other
    /// steps are staged in `V` and folded into `N` at episode end.
    pub fn record(
        &mut self,
        module: usize,
        s: usize,
        a: Action,
        s_next: usize,
        in_ramping: bool,
    ) -> Result<()> {
        let slot = if s_next + 1 == s {
            DOWN
        } else if s_next == s {
            STAY
        } else if s_next == s + 1 && s_next < self.n_states {
            UP
        } else {
            return Err(Error::TransitionOutOfSupport {
                from: s,
                to: s_next,
            });
        };
        if in_ramping {
            return Ok(());
        }
        let cell = self.cell(module, s, a);
        self.v[cell] += 1;
        self.v_trans[cell * 3 + slot] += 1;
        Ok(())
    }

    /// Folds the episode counts into the cumulative ones.
    pub fn fold_episode(&mut self) {
        for (n, v) in self.n.iter_mut().zip(self.v.iter_mut()) {
            *n += *v;
            *v = 0;
        }
        for (n, v) in self.n_trans.iter_mut().zip(self.v_trans.iter_mut()) {
            *n += *v;
            *v = 0;
        }
    }

    /// The most-visited module for `(s, a)`, ties toward the smaller id.
    /// Its count is at least `N(s,a) / tau_mix`.
    pub fn best_module(&self, s: usize, a: Action) -> usize {
        let mut best = 0usize;
        let mut best_count = self.cumulative(0, s, a);
        for module in 1..self.tau_mix {
            let count = self.cumulative(module, s, a);
            if count > best_count {
                best = module;
                best_count = count;
            }
        }
        best
    }

    /// Empirical transition estimate `(p_hat over {down, stay, up}, N)` for
    /// one module, with `max{1, N}` in the denominator. With no
    /// observations the estimate is a self-loop point mass, which keeps the
    /// optimistic planner well-posed while the radius (at least 2) makes
    /// the confidence set cover every in-support distribution anyway.
    pub fn estimates(&self, s: usize, a: Action, module: usize) -> ([f64; 3], u64) {
        let cell = self.cell(module, s, a);
        let visits = self.n[cell];
        if visits == 0 {
            return ([0.0, 1.0, 0.0], 0);
        }
        let denom = visits as f64;
        let p = [
            self.n_trans[cell * 3 + DOWN] as f64 / denom,
            self.n_trans[cell * 3 + STAY] as f64 / denom,
            self.n_trans[cell * 3 + UP] as f64 / denom,
        ];
        (p, visits)
    }

    /// Total recorded steps (folded plus staged), for conservation checks.
    pub fn total_recorded(&self) -> u64 {
        self.n.iter().sum::<u64>() + self.v.iter().sum::<u64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ramping_steps_are_discarded() {
        let mut counts = ModuleCounts::new(3, 4);
        counts.record(1, 2, Action::Admit, 3, true).unwrap();
        assert_eq!(counts.total_recorded(), 0);
        counts.record(1, 2, Action::Admit, 3, false).unwrap();
        assert_eq!(counts.in_episode(1, 2, Action::Admit), 1);
        assert_eq!(counts.cumulative(1, 2, Action::Admit), 0);
        counts.fold_episode();
        assert_eq!(counts.cumulative(1, 2, Action::Admit), 1);
    }

    #[test]
    fn out_of_support_transition_is_an_error() {
        let mut counts = ModuleCounts::new(2, 5);
        assert!(counts.record(0, 2, Action::Admit, 4, false).is_err());
        assert!(counts.record(0, 2, Action::Admit, 0, false).is_err());
        assert!(counts.record(0, 4, Action::Admit, 5, false).is_err());
    }

    #[test]
    fn best_module_tie_breaks_toward_smaller_id() {
        let mut counts = ModuleCounts::new(3, 2);
        // Counts (5, 9, 9) for (s=0, admit).
        for _ in 0..5 {
            counts.record(0, 0, Action::Admit, 1, false).unwrap();
        }
        for _ in 0..9 {
            counts.record(1, 0, Action::Admit, 1, false).unwrap();
            counts.record(2, 0, Action::Admit, 1, false).unwrap();
        }
        counts.fold_episode();
        assert_eq!(counts.best_module(0, Action::Admit), 1);
        // All-zero counts pick module 0.
        assert_eq!(counts.best_module(1, Action::Reject), 0);
        // Counts (0, 0, 1) pick module 2.
        counts.record(2, 1, Action::Reject, 1, false).unwrap();
        counts.fold_episode();
        assert_eq!(counts.best_module(1, Action::Reject), 2);
    }

    #[test]
    fn estimates_match_counts() {
        let mut counts = ModuleCounts::new(1, 4);
        counts.record(0, 1, Action::Admit, 0, false).unwrap();
        counts.record(0, 1, Action::Admit, 1, false).unwrap();
        counts.record(0, 1, Action::Admit, 1, false).unwrap();
        counts.record(0, 1, Action::Admit, 2, false).unwrap();
        counts.fold_episode();
        let (p, visits) = counts.estimates(1, Action::Admit, 0);
        assert_eq!(visits, 4);
        assert_abs_diff_eq!(p[DOWN], 0.25, epsilon = 0.0);
        assert_abs_diff_eq!(p[STAY], 0.5, epsilon = 0.0);
        assert_abs_diff_eq!(p[UP], 0.25, epsilon = 0.0);
    }

    #[test]
    fn zero_count_prior_is_a_self_loop() {
        let counts = ModuleCounts::new(2, 3);
        let (p, visits) = counts.estimates(2, Action::Reject, 1);
        assert_eq!(visits, 0);
        assert_eq!(p, [0.0, 1.0, 0.0]);
    }
}
