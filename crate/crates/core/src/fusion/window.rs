//! Temporal recognition window.
//!
//! The first voice or gesture event opens a window of length `R_T`. Every
//! event arriving before it expires joins the same input tensor; the tensor
//! is zero padded to its fixed length when the window closes.

use thiserror::Error;

use super::vocab::{Channel, VOCAB_SIZE};
use crate::geometry::Vec3;

/// Slots in one window, equal to the classifier input size.
pub const WINDOW_SLOTS: usize = 4;
pub const DEFAULT_RECOGNITION_TIME: f64 = 2.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EventError {
    #[error("token {0} is outside the vocabulary")]
    UnknownToken(usize),
    #[error("token {token} does not belong to the {channel:?} channel")]
    WrongChannel { channel: Channel, token: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEvent {
    pub channel: Channel,
    pub token: usize,
    pub timestamp: f64,
    /// Pointing target in world coordinates.
    pub payload: Option<Vec3>,
}

impl ChannelEvent {
    pub fn new(channel: Channel, token: usize, timestamp: f64, payload: Option<Vec3>) -> Result<Self, EventError> {
        match Channel::of_token(token) {
            None => Err(EventError::UnknownToken(token)),
            Some(c) if c != channel => Err(EventError::WrongChannel { channel, token }),
            Some(_) => Ok(Self { channel, token, timestamp, payload }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputTensor {
    pub values: [f64; WINDOW_SLOTS],
}

impl InputTensor {
    /// `(token + 1) / VOCAB_SIZE` per event in arrival order, zero padded.
    pub fn encode(tokens: &[usize]) -> Self {
        let mut values = [0.0; WINDOW_SLOTS];
        for (slot, &t) in values.iter_mut().zip(tokens) {
            *slot = (t + 1) as f64 / VOCAB_SIZE as f64;
        }
        Self { values }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionWindow {
    pub open_time: f64,
    pub recognition_time: f64,
    pub slots: Vec<ChannelEvent>,
}

impl FusionWindow {
    pub fn expired(&self, now: f64) -> bool {
        now >= self.open_time + self.recognition_time
    }
}

/// A closed window ready for classification.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedWindow {
    pub open_time: f64,
    pub tensor: InputTensor,
    pub tokens: Vec<usize>,
    /// Last pointing payload seen in the window.
    pub payload: Option<Vec3>,
}

pub fn close_window(window: FusionWindow) -> ClosedWindow {
    let tokens: Vec<usize> = window.slots.iter().map(|e| e.token).collect();
    let payload = window.slots.iter().rev().find_map(|e| e.payload);
    ClosedWindow {
        open_time: window.open_time,
        tensor: InputTensor::encode(&tokens),
        tokens,
        payload,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FusionOutput {
    Closed(ClosedWindow),
    /// The window was full; the event was dropped.
    Overflow(ChannelEvent),
}

/// Owns the window state across events.
#[derive(Debug, Clone)]
pub struct Fuser {
    recognition_time: f64,
    window: Option<FusionWindow>,
}

impl Default for Fuser {
    fn default() -> Self {
        Self::new(DEFAULT_RECOGNITION_TIME)
    }
}

impl Fuser {
    pub fn new(recognition_time: f64) -> Self {
        Self { recognition_time, window: None }
    }

    pub fn window(&self) -> Option<&FusionWindow> {
        self.window.as_ref()
    }

    pub fn ingest(&mut self, event: ChannelEvent, now: f64) -> Vec<FusionOutput> {
        let mut out = Vec::new();
        if let Some(window) = self.window.as_mut() {
            if !window.expired(now) {
                if window.slots.len() < WINDOW_SLOTS {
                    window.slots.push(event);
                } else {
                    log::warn!("recognition window full, dropping token {}", event.token);
                    out.push(FusionOutput::Overflow(event));
                }
                return out;
            }
            out.push(FusionOutput::Closed(close_window(self.window.take().unwrap())));
        }
        self.window = Some(FusionWindow {
            open_time: event.timestamp,
            recognition_time: self.recognition_time,
            slots: vec![event],
        });
        out
    }

    /// Closes the window once `R_T` has elapsed.
    pub fn poll(&mut self, now: f64) -> Option<ClosedWindow> {
        if self.window.as_ref()?.expired(now) {
            self.window.take().map(close_window)
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(channel: Channel, token: usize, t: f64) -> ChannelEvent {
        ChannelEvent::new(channel, token, t, None).unwrap()
    }

    fn closed(out: &[FusionOutput]) -> Vec<&ClosedWindow> {
        out.iter()
            .filter_map(|o| match o {
                FusionOutput::Closed(c) => Some(c),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn events_within_window_share_tensor() {
        let mut f = Fuser::new(2.0);
        assert!(f.ingest(ev(Channel::Gesture, 12, 0.0), 0.0).is_empty());
        assert!(f.ingest(ev(Channel::Voice, 0, 1.2), 1.2).is_empty());
        assert_eq!(f.window().unwrap().slots.len(), 2);
        let w = f.poll(2.0).unwrap();
        assert_eq!(w.tokens, vec![12, 0]);
        assert!(f.poll(3.0).is_none());
    }

    #[test]
    fn late_event_opens_new_window() {
        let mut f = Fuser::new(2.0);
        f.ingest(ev(Channel::Gesture, 12, 0.0), 0.0);
        let out = f.ingest(ev(Channel::Voice, 0, 2.5), 2.5);
        let c = closed(&out);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].tokens, vec![12]);
        assert_eq!(f.poll(4.5).unwrap().tokens, vec![0]);
    }

    #[test]
    fn overflow_drops_fifth_event() {
        let mut f = Fuser::new(2.0);
        let mut overflow = 0;
        for (i, tok) in [0, 1, 2, 3, 4].into_iter().enumerate() {
            let t = 0.1 * i as f64;
            overflow += f
                .ingest(ev(Channel::Voice, tok, t), t)
                .iter()
                .filter(|o| matches!(o, FusionOutput::Overflow(_)))
                .count();
        }
        assert_eq!(overflow, 1);
        let w = f.poll(2.0).unwrap();
        assert_eq!(w.tokens, vec![0, 1, 2, 3]);
        assert!(w.tensor.values.iter().all(|&v| v != 0.0));
    }

    #[test]
    fn encoding() {
        assert_eq!(InputTensor::encode(&[0]).values, [0.05, 0.0, 0.0, 0.0]);
        let t = InputTensor::encode(&[3, 12]).values;
        assert!((t[0] - 0.20).abs() < 1e-15 && (t[1] - 0.65).abs() < 1e-15);
        assert_eq!(&t[2..], &[0.0, 0.0]);
    }

    #[test]
    fn payload_is_carried() {
        let mut f = Fuser::new(2.0);
        f.ingest(ev(Channel::Voice, 0, 0.0), 0.0);
        let p = Vec3::new(0.5, 0.4, 0.1);
        f.ingest(ChannelEvent::new(Channel::Gesture, 12, 0.5, Some(p)).unwrap(), 0.5);
        assert_eq!(f.poll(2.0).unwrap().payload, Some(p));
    }

    #[test]
    fn rejects_mismatched_channel() {
        assert_eq!(
            ChannelEvent::new(Channel::Voice, 12, 0.0, None).unwrap_err(),
            EventError::WrongChannel { channel: Channel::Voice, token: 12 }
        );
        assert_eq!(ChannelEvent::new(Channel::Gesture, 40, 0.0, None).unwrap_err(), EventError::UnknownToken(40));
    }
}
