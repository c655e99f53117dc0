//! Microneedle-cartridge reload state machine.
//!
//! Each sampling action spends one microneedle array; a magnetic-transfer
//! station swaps the spent array for a fresh one from a multi-array
//! cartridge. The machine serializes that cycle and does the per-trial
//! needle accounting.
//!
//! The physical protocol is collapsed to five machine events per cycle:
//! approach, align, advance, magnetic eject-and-seat, retract. The magnet
//! interaction itself (repulsive pair ejects the spent array while the
//! attractive pair guides the fresh one into its seat) is a single event;
//! the seat is confirmed when the retract completes. A fresh machine starts
//! in `NeedsReload` with a full cartridge, so a full cartridge yields
//! exactly `capacity` samples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_CAPACITY: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReloadPhase {
    /// Fresh array seated; sampling permitted.
    Ready,
    /// Array spent; the machine must visit the station before sampling.
    NeedsReload,
    AtStation,
    Advancing,
    Transferring,
    Retracting,
    /// Cartridge exhausted during a demanded reload.
    Empty,
    /// Unrecoverable actuation/planning failure during the cycle.
    Fault,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReloadEvent {
    ApproachStation,
    Align,
    Advance,
    MagneticEjectAndSeat,
    Retract,
}

/// One line of the newline-delimited JSON event log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EventRecord {
    /// Monotonic event counter.
    pub t: u64,
    pub event: ReloadEvent,
    pub state_from: ReloadPhase,
    pub state_to: ReloadPhase,
    pub arrays_remaining: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReloadState {
    phase: ReloadPhase,
    arrays_remaining: u32,
    capacity: u32,
    loaded: bool,
    tick: u64,
}

impl ReloadState {
    /// Fresh machine with a full cartridge and nothing seated yet.
    pub fn new(capacity: u32) -> Self {
        Self {
            phase: ReloadPhase::NeedsReload,
            arrays_remaining: capacity,
            capacity,
            loaded: false,
            tick: 0,
        }
    }

    pub fn phase(&self) -> ReloadPhase {
        self.phase
    }

    pub fn arrays_remaining(&self) -> u32 {
        self.arrays_remaining
    }

    pub fn capacity(&self) -> u32 {
        self.capacity
    }

    pub fn loaded(&self) -> bool {
        self.loaded
    }

    pub fn can_sample(&self) -> bool {
        self.phase == ReloadPhase::Ready && self.loaded
    }

    /// Spend the seated array on a leaf. Only legal in `Ready` with an
    /// array seated; afterwards the machine demands a reload.
    pub fn consume_array(&mut self) -> Result<()> {
        if self.phase != ReloadPhase::Ready || !self.loaded {
            return Err(Error::Protocol(format!(
                "consume_array in phase {:?} (loaded: {})",
                self.phase, self.loaded
            )));
        }
        self.loaded = false;
        self.phase = ReloadPhase::NeedsReload;
        Ok(())
    }

    /// Run one full reload cycle at the station, returning the event log.
    /// An exhausted cartridge is discovered at the alignment step: the
    /// machine parks in `Empty` and no later events fire.
    pub fn run_reload_cycle(&mut self) -> Result<Vec<EventRecord>> {
        if self.phase != ReloadPhase::NeedsReload {
            return Err(Error::Protocol(format!(
                "run_reload_cycle in phase {:?}",
                self.phase
            )));
        }
        let mut log = Vec::with_capacity(5);
        self.step(&mut log, ReloadEvent::ApproachStation, ReloadPhase::AtStation);
        if self.arrays_remaining == 0 {
            self.step(&mut log, ReloadEvent::Align, ReloadPhase::Empty);
            return Ok(log);
        }
        self.step(&mut log, ReloadEvent::Align, ReloadPhase::AtStation);
        self.step(&mut log, ReloadEvent::Advance, ReloadPhase::Advancing);

        let outcome = magnetic_transfer_check(self.loaded, true);
        debug_assert_eq!(outcome.seated, Seated::New);
        self.step(
            &mut log,
            ReloadEvent::MagneticEjectAndSeat,
            ReloadPhase::Transferring,
        );

        self.arrays_remaining -= 1;
        self.loaded = true;
        self.step(&mut log, ReloadEvent::Retract, ReloadPhase::Ready);
        Ok(log)
    }

    /// Record an unrecoverable failure; the machine stays in `Fault`.
    pub fn fault(&mut self) {
        self.phase = ReloadPhase::Fault;
        self.loaded = false;
    }

    fn step(&mut self, log: &mut Vec<EventRecord>, event: ReloadEvent, to: ReloadPhase) {
        log.push(EventRecord {
            t: self.tick,
            event,
            state_from: self.phase,
            state_to: to,
            arrays_remaining: self.arrays_remaining,
        });
        self.tick += 1;
        self.phase = to;
    }
}

/// Which array (if any) ends up seated after a transfer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Seated {
    New,
    Old,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransferOutcome {
    pub seated: Seated,
    pub ejected_old: bool,
}

/// Magnetic handoff invariant: advancing a fresh array simultaneously
/// ejects the spent one (repulsive pair) and seats itself (attractive
/// pair). At most one array is ever seated.
pub fn magnetic_transfer_check(old_seated: bool, new_advanced: bool) -> TransferOutcome {
    if new_advanced {
        TransferOutcome {
            seated: Seated::New,
            ejected_old: old_seated,
        }
    } else {
        TransferOutcome {
            seated: if old_seated { Seated::Old } else { Seated::None },
            ejected_old: false,
        }
    }
}
