//! Event data model: events, streams, sensor geometry, validation, and
//! time-domain handling.

pub mod codec;
pub mod synth;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use synth::{synthesize, SceneConfig, ShapeKind, ShapeSpec};

/// A single sensor event.
///
/// `t` is in raw microseconds or normalized `[0, 1]` time; the enclosing
/// [`EventStream`] records which. Polarity `p` is `+1.0` for a brightness
/// increase, `-1.0` for a decrease.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub x: u16,
    pub y: u16,
    pub t: f64,
    pub p: f64,
}

impl Event {
    pub fn new(x: u16, y: u16, t: f64, p: f64) -> Self {
        Event { x, y, t, p }
    }
}

/// Sensor extent in pixels. Both dimensions must be at least 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensorGeometry {
    pub width: u16,
    pub height: u16,
}

impl SensorGeometry {
    pub fn new(width: u16, height: u16) -> Self {
        assert!(width >= 1 && height >= 1, "geometry dimensions must be >= 1");
        SensorGeometry { width, height }
    }

    pub fn contains(&self, x: u16, y: u16) -> bool {
        x < self.width && y < self.height
    }

    pub fn num_pixels(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

/// Which unit the `t` field of every event in a stream is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeDomain {
    RawMicroseconds,
    NormalizedUnit,
}

/// An ordered sequence of events plus the geometry they live on.
///
/// Invariants (reported by [`EventStream::validate`], relied on elsewhere):
/// events sorted by `t` non-decreasing with stable order for ties, polarity
/// exactly `±1.0`, coordinates inside the geometry, and `t ∈ [0, 1]` when
/// the stream is normalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventStream {
    pub events: Vec<Event>,
    pub geometry: SensorGeometry,
    pub time_domain: TimeDomain,
}

/// A single invariant violation found by [`EventStream::validate`], with the
/// index of the offending event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    /// `t` at this index is smaller than at the previous index.
    Unsorted { index: usize },
    /// Polarity is not exactly `+1.0` or `-1.0`.
    BadPolarity { index: usize },
    /// Coordinate outside the attached geometry.
    CoordinateOutOfRange { index: usize },
    /// Timestamp outside the stream's declared domain (`[0, 1]` for
    /// normalized streams, non-negative finite for raw streams).
    TimeOutOfRange { index: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EventError {
    #[error("operation requires a nonempty stream")]
    EmptyStream,
    #[error("expected {expected:?} time domain, found {found:?}")]
    WrongTimeDomain {
        expected: TimeDomain,
        found: TimeDomain,
    },
    #[error("invalid scene config: {0}")]
    ConfigInvalid(String),
}

impl EventStream {
    pub fn new(events: Vec<Event>, geometry: SensorGeometry, time_domain: TimeDomain) -> Self {
        EventStream {
            events,
            geometry,
            time_domain,
        }
    }

    pub fn empty(geometry: SensorGeometry, time_domain: TimeDomain) -> Self {
        Self::new(Vec::new(), geometry, time_domain)
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Stable sort by timestamp; equal timestamps keep their current order.
    pub fn sort_by_time(&mut self) {
        self.events.sort_by(|a, b| a.t.total_cmp(&b.t));
    }

    pub fn require_domain(&self, expected: TimeDomain) -> Result<(), EventError> {
        if self.time_domain == expected {
            Ok(())
        } else {
            Err(EventError::WrongTimeDomain {
                expected,
                found: self.time_domain,
            })
        }
    }

    /// Check every stream invariant and report each violation with its index.
    /// An empty result means the stream is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (i, e) in self.events.iter().enumerate() {
            if i > 0 && e.t < self.events[i - 1].t {
                out.push(Violation::Unsorted { index: i });
            }
            if e.p != 1.0 && e.p != -1.0 {
                out.push(Violation::BadPolarity { index: i });
            }
            if !self.geometry.contains(e.x, e.y) {
                out.push(Violation::CoordinateOutOfRange { index: i });
            }
            let t_ok = match self.time_domain {
                TimeDomain::RawMicroseconds => e.t.is_finite() && e.t >= 0.0,
                TimeDomain::NormalizedUnit => e.t.is_finite() && (0.0..=1.0).contains(&e.t),
            };
            if !t_ok {
                out.push(Violation::TimeOutOfRange { index: i });
            }
        }
        out
    }

    /// Map raw-microsecond timestamps affinely onto `[0, 1]`:
    /// `t' = (t - t_min) / (t_max - t_min)`.
    ///
    /// A degenerate range (all timestamps equal) maps to 0 so single-event
    /// streams stay usable.
    pub fn normalize_time(&self) -> Result<EventStream, EventError> {
        self.require_domain(TimeDomain::RawMicroseconds)?;
        if self.is_empty() {
            return Err(EventError::EmptyStream);
        }
        let t_min = self.events.iter().map(|e| e.t).fold(f64::INFINITY, f64::min);
        let t_max = self
            .events
            .iter()
            .map(|e| e.t)
            .fold(f64::NEG_INFINITY, f64::max);
        let span = t_max - t_min;
        let events = self
            .events
            .iter()
            .map(|e| Event {
                t: if span > 0.0 { (e.t - t_min) / span } else { 0.0 },
                ..*e
            })
            .collect();
        Ok(EventStream::new(
            events,
            self.geometry,
            TimeDomain::NormalizedUnit,
        ))
    }

    /// Map normalized timestamps back onto raw microseconds spanning
    /// `[0, duration_us]`, rounding to whole microseconds. Used when writing
    /// synthesized (normalized) streams through the binary codec.
    pub fn denormalize_time(&self, duration_us: u32) -> Result<EventStream, EventError> {
        self.require_domain(TimeDomain::NormalizedUnit)?;
        let events = self
            .events
            .iter()
            .map(|e| Event {
                t: (e.t * duration_us as f64).round(),
                ..*e
            })
            .collect();
        Ok(EventStream::new(
            events,
            self.geometry,
            TimeDomain::RawMicroseconds,
        ))
    }

    pub fn t_min(&self) -> Option<f64> {
        self.events.first().map(|e| e.t)
    }

    pub fn t_max(&self) -> Option<f64> {
        self.events.last().map(|e| e.t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom() -> SensorGeometry {
        SensorGeometry::new(16, 16)
    }

    fn raw_stream(ts: &[f64]) -> EventStream {
        let events = ts
            .iter()
            .map(|&t| Event::new(1, 2, t, 1.0))
            .collect();
        EventStream::new(events, geom(), TimeDomain::RawMicroseconds)
    }

    #[test]
    fn normalize_maps_range_to_unit_interval() {
        let s = raw_stream(&[100.0, 200.0, 300.0]);
        let n = s.normalize_time().unwrap();
        let ts: Vec<f64> = n.events.iter().map(|e| e.t).collect();
        assert_eq!(ts, vec![0.0, 0.5, 1.0]);
        assert_eq!(n.time_domain, TimeDomain::NormalizedUnit);
    }

    #[test]
    fn normalize_degenerate_range_is_zero() {
        let s = raw_stream(&[42.0]);
        let n = s.normalize_time().unwrap();
        assert_eq!(n.events[0].t, 0.0);
    }

    #[test]
    fn normalize_empty_stream_errors() {
        let s = EventStream::empty(geom(), TimeDomain::RawMicroseconds);
        assert_eq!(s.normalize_time().unwrap_err(), EventError::EmptyStream);
    }

    #[test]
    fn normalize_wrong_domain_errors() {
        let mut s = raw_stream(&[1.0]);
        s.time_domain = TimeDomain::NormalizedUnit;
        assert!(matches!(
            s.normalize_time().unwrap_err(),
            EventError::WrongTimeDomain { .. }
        ));
    }

    #[test]
    fn validate_accepts_sorted_valid_stream() {
        let s = raw_stream(&[1.0, 2.0, 3.0]);
        assert!(s.validate().is_empty());
    }

    #[test]
    fn validate_flags_bad_polarity_with_index() {
        let mut s = raw_stream(&[1.0, 2.0, 3.0, 4.0]);
        s.events[3].p = 0.5;
        assert_eq!(s.validate(), vec![Violation::BadPolarity { index: 3 }]);
    }

    #[test]
    fn validate_flags_unsorted_with_index() {
        let mut s = raw_stream(&[1.0; 8]);
        s.events[7].t = 0.5;
        assert_eq!(s.validate(), vec![Violation::Unsorted { index: 7 }]);
    }

    #[test]
    fn validate_flags_out_of_range_coordinate() {
        let mut s = raw_stream(&[1.0]);
        s.events[0].x = 16;
        assert_eq!(
            s.validate(),
            vec![Violation::CoordinateOutOfRange { index: 0 }]
        );
    }

    #[test]
    fn validate_flags_normalized_time_out_of_range() {
        let mut s = raw_stream(&[0.0, 1.5]);
        s.time_domain = TimeDomain::NormalizedUnit;
        assert_eq!(s.validate(), vec![Violation::TimeOutOfRange { index: 1 }]);
    }

    #[test]
    fn normalize_is_order_preserving_and_idempotent() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = rng.random_range(1..200);
            let mut ts: Vec<f64> = (0..n)
                .map(|_| rng.random_range(0.0f64..1e6).floor())
                .collect();
            ts.sort_by(f64::total_cmp);
            let s = raw_stream(&ts);
            let norm = s.normalize_time().unwrap();
            // min 0, max 1 (or all zero for a degenerate range)
            let got: Vec<f64> = norm.events.iter().map(|e| e.t).collect();
            assert!(got.windows(2).all(|w| w[0] <= w[1]));
            if ts.first() != ts.last() {
                assert_eq!(got.first().copied(), Some(0.0));
                assert_eq!(got.last().copied(), Some(1.0));
            }
            // applying the same affine map to an already-normalized stream
            // moves nothing by more than 1e-15
            let mut relabeled = norm.clone();
            relabeled.time_domain = TimeDomain::RawMicroseconds;
            let twice = relabeled.normalize_time().unwrap();
            for (a, b) in norm.events.iter().zip(twice.events.iter()) {
                assert!((a.t - b.t).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn denormalize_round_trips_through_microseconds() {
        let s = raw_stream(&[0.0, 500.0, 1000.0]);
        let n = s.normalize_time().unwrap();
        let back = n.denormalize_time(1000).unwrap();
        assert_eq!(back.events.iter().map(|e| e.t).collect::<Vec<_>>(), vec![
            0.0, 500.0, 1000.0
        ]);
    }
}
