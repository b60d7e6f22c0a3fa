//! Folds the inputs that arrive between two ticks into one sample.
//!
//! Axes are latest-wins. Button states are queued on change and released one
//! per tick, so a press and release landing in the same tick still produce a
//! rising edge followed by a falling edge.

use std::collections::VecDeque;

use pointgo_core::control::{Buttons, JoystickSample};
use serde::{Deserialize, Serialize};

pub type ClientId = u64;

/// Button changes held back beyond this many are dropped.
pub const MAX_PENDING_BUTTONS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputSource {
    pub client: ClientId,
    pub seq: u64,
}

#[derive(Debug, Clone, Default)]
pub struct Coalescer {
    axes: [f64; 3],
    /// Buttons of the last sample handed out.
    applied: Buttons,
    pending: VecDeque<Buttons>,
    /// Client whose input currently drives the axes.
    owner: Option<ClientId>,
    source: Option<InputSource>,
    dropped: u64,
}

impl Coalescer {
    pub fn push(&mut self, source: InputSource, sample: &JoystickSample) {
        self.axes = sample.axis_values();
        let last = self.pending.back().copied().unwrap_or(self.applied);
        if sample.buttons != last {
            if self.pending.len() < MAX_PENDING_BUTTONS {
                self.pending.push_back(sample.buttons);
            } else {
                self.dropped += 1;
            }
        }
        self.owner = Some(source.client);
        self.source = Some(source);
    }

    /// Latches to neutral if `client` was driving the input. Returns whether it was.
    pub fn disconnect(&mut self, client: ClientId) -> bool {
        if self.owner != Some(client) {
            return false;
        }
        self.axes = [0.0; 3];
        self.pending.clear();
        if self.applied != Buttons::default() {
            self.pending.push_back(Buttons::default());
        }
        self.owner = None;
        true
    }

    /// Sample for the next tick.
    pub fn next(&mut self, timestamp: f64) -> JoystickSample {
        if let Some(b) = self.pending.pop_front() {
            self.applied = b;
        }
        let [u_fb, u_lr, u_tw] = self.axes;
        JoystickSample::axes(u_fb, u_lr, u_tw)
            .with_buttons(self.applied)
            .at(timestamp)
    }

    pub fn source(&self) -> Option<InputSource> {
        self.source
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }
}
