//! Piecewise-analytic speed, heading and pitch profiles.
//!
//! Every rate that can change (speed, turn rate, pitch) follows a raised-cosine
//! ramp so that speed and angular rate are continuous across segment joins.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SegmentKind {
    /// constant speed and heading
    Straight,
    /// constant speed, turn rate ramped in and out
    Arc,
    /// speed changes to `speed` over the segment
    SpeedRamp,
    /// vehicle at rest
    Pause,
}

/// One leg of a simulated drive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySegment {
    pub kind: SegmentKind,
    /// s
    pub duration: f64,
    /// m/s; the held speed (straight, arc) or the final speed (speed ramp)
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed: Option<f64>,
    /// rad/s, positive turns right (heading increases)
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub turn_rate: Option<f64>,
    /// s, length of the turn-rate ramps at each end of an arc
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub turn_ramp: Option<f64>,
    /// rad, change of road grade (vehicle pitch) across the segment
    #[serde(default)]
    pub grade_change: f64,
}

impl TrajectorySegment {
    pub fn straight(duration: f64, speed: f64) -> Self {
        Self {
            kind: SegmentKind::Straight,
            duration,
            speed: Some(speed),
            turn_rate: None,
            turn_ramp: None,
            grade_change: 0.0,
        }
    }

    pub fn arc(duration: f64, speed: f64, turn_rate: f64) -> Self {
        Self {
            kind: SegmentKind::Arc,
            duration,
            speed: Some(speed),
            turn_rate: Some(turn_rate),
            turn_ramp: None,
            grade_change: 0.0,
        }
    }

    pub fn speed_ramp(duration: f64, to_speed: f64) -> Self {
        Self {
            kind: SegmentKind::SpeedRamp,
            duration,
            speed: Some(to_speed),
            turn_rate: None,
            turn_ramp: None,
            grade_change: 0.0,
        }
    }

    pub fn pause(duration: f64) -> Self {
        Self {
            kind: SegmentKind::Pause,
            duration,
            speed: None,
            turn_rate: None,
            turn_ramp: None,
            grade_change: 0.0,
        }
    }

    pub fn with_grade_change(mut self, grade_change: f64) -> Self {
        self.grade_change = grade_change;
        self
    }

    pub fn with_turn_ramp(mut self, ramp: f64) -> Self {
        self.turn_ramp = Some(ramp);
        self
    }

    /// Default turn-rate ramp for arcs.
    pub fn effective_turn_ramp(&self) -> f64 {
        self.turn_ramp.unwrap_or_else(|| (self.duration / 2.0).min(2.0))
    }

    /// Heading change produced by an arc, rad.
    pub fn heading_change(&self) -> f64 {
        match self.kind {
            SegmentKind::Arc => self.turn_rate.unwrap_or(0.0) * (self.duration - self.effective_turn_ramp()),
            _ => 0.0,
        }
    }
}

/// Value and first two time derivatives.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub rate: f64,
    pub accel: f64,
}

/// Speed, heading and pitch of the vehicle at one instant.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ProfileSample {
    pub speed: Jet,
    pub heading: Jet,
    pub pitch: Jet,
}

/// Raised-cosine blend from 0 to 1 over `[0, span]`.
fn blend(tau: f64, span: f64) -> Jet {
    let u = PI * tau / span;
    Jet {
        value: 0.5 * (1.0 - u.cos()),
        rate: 0.5 * PI / span * u.sin(),
        accel: 0.5 * (PI / span).powi(2) * u.cos(),
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Piece {
    pub t0: f64,
    pub duration: f64,
    pub kind: SegmentKind,
    pub speed0: f64,
    pub speed1: f64,
    pub heading0: f64,
    pub turn_rate: f64,
    pub ramp: f64,
    pub pitch0: f64,
    pub pitch_change: f64,
}

impl Piece {
    pub fn end(&self) -> f64 {
        self.t0 + self.duration
    }

    /// Profile at local time `tau`; valid (as an analytic extension) slightly
    /// outside `[0, duration]` too.
    pub fn eval(&self, tau: f64) -> ProfileSample {
        let speed = match self.kind {
            SegmentKind::Pause => Jet::default(),
            SegmentKind::Straight | SegmentKind::Arc => Jet { value: self.speed0, rate: 0.0, accel: 0.0 },
            SegmentKind::SpeedRamp => {
                let b = blend(tau, self.duration);
                let d = self.speed1 - self.speed0;
                Jet { value: self.speed0 + d * b.value, rate: d * b.rate, accel: d * b.accel }
            }
        };
        let heading = if self.kind == SegmentKind::Arc {
            let (w_int, w, w_rate) = self.turn_window(tau);
            Jet {
                value: self.heading0 + self.turn_rate * w_int,
                rate: self.turn_rate * w,
                accel: self.turn_rate * w_rate,
            }
        } else {
            Jet { value: self.heading0, rate: 0.0, accel: 0.0 }
        };
        let pitch = if self.pitch_change != 0.0 {
            let b = blend(tau, self.duration);
            Jet {
                value: self.pitch0 + self.pitch_change * b.value,
                rate: self.pitch_change * b.rate,
                accel: self.pitch_change * b.accel,
            }
        } else {
            Jet { value: self.pitch0, rate: 0.0, accel: 0.0 }
        };
        ProfileSample { speed, heading, pitch }
    }

    /// Turn-rate window: (integral, value, derivative).
    fn turn_window(&self, tau: f64) -> (f64, f64, f64) {
        let r = self.ramp;
        let d = self.duration;
        let k = PI / r;
        if tau < r {
            (tau / 2.0 - (k * tau).sin() / (2.0 * k), 0.5 * (1.0 - (k * tau).cos()), 0.5 * k * (k * tau).sin())
        } else if tau <= d - r {
            (r / 2.0 + (tau - r), 1.0, 0.0)
        } else {
            let s = tau - (d - r);
            (
                r / 2.0 + (d - 2.0 * r) + s / 2.0 + (k * s).sin() / (2.0 * k),
                0.5 * (1.0 + (k * s).cos()),
                -0.5 * k * (k * s).sin(),
            )
        }
    }
}

/// Validates segment joins and lays the segments out in time.
pub(crate) fn build_pieces(segments: &[TrajectorySegment], initial_heading: f64) -> Result<Vec<Piece>> {
    if segments.is_empty() {
        return Err(Error::InvalidInput("trajectory has no segments".to_string()));
    }
    let mut pieces = Vec::with_capacity(segments.len());
    let mut t = 0.0f64;
    let mut speed = 0.0f64;
    let mut heading = initial_heading;
    let mut pitch: f64 = 0.0;
    for (index, seg) in segments.iter().enumerate() {
        let fail = |reason: String| Error::IllPosedSegment { index, reason };
        if !(seg.duration > 0.0 && seg.duration.is_finite()) {
            return Err(fail(format!("duration {} must be positive", seg.duration)));
        }
        if !seg.grade_change.is_finite() || (pitch + seg.grade_change).abs() > 0.5 {
            return Err(fail("grade outside +/-0.5 rad".to_string()));
        }
        let (speed1, turn_rate, ramp) = match seg.kind {
            SegmentKind::Pause => {
                if speed.abs() > 1e-9 {
                    return Err(fail(format!("pause entered at {speed} m/s")));
                }
                (0.0, 0.0, 0.0)
            }
            SegmentKind::Straight | SegmentKind::Arc => {
                let s = seg.speed.ok_or_else(|| fail("missing speed".to_string()))?;
                if (s - speed).abs() > 1e-9 {
                    return Err(fail(format!("speed jumps from {speed} to {s} m/s")));
                }
                if seg.kind == SegmentKind::Arc {
                    let rate = seg.turn_rate.ok_or_else(|| fail("missing turn_rate".to_string()))?;
                    let ramp = seg.effective_turn_ramp();
                    if !(ramp > 0.0 && 2.0 * ramp <= seg.duration + 1e-12) {
                        return Err(fail(format!("turn ramp {ramp} s does not fit the arc")));
                    }
                    (s, rate, ramp)
                } else {
                    (s, 0.0, 0.0)
                }
            }
            SegmentKind::SpeedRamp => {
                let s = seg.speed.ok_or_else(|| fail("missing target speed".to_string()))?;
                if s < 0.0 {
                    return Err(fail("negative target speed".to_string()));
                }
                (s, 0.0, 0.0)
            }
        };
        let piece = Piece {
            t0: t,
            duration: seg.duration,
            kind: seg.kind,
            speed0: speed,
            speed1,
            heading0: heading,
            turn_rate,
            ramp,
            pitch0: pitch,
            pitch_change: seg.grade_change,
        };
        let end = piece.eval(seg.duration);
        heading = end.heading.value;
        pitch += seg.grade_change;
        speed = speed1;
        t += seg.duration;
        pieces.push(piece);
    }
    Ok(pieces)
}

/// Incremental route construction that keeps track of the current speed.
#[derive(Debug, Clone, Default)]
pub struct RouteBuilder {
    segments: Vec<TrajectorySegment>,
    speed: f64,
}

impl RouteBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn pause(mut self, duration: f64) -> Self {
        self.segments.push(TrajectorySegment::pause(duration));
        self
    }

    pub fn ramp_to(mut self, duration: f64, speed: f64) -> Self {
        self.segments.push(TrajectorySegment::speed_ramp(duration, speed));
        self.speed = speed;
        self
    }

    pub fn straight(mut self, duration: f64) -> Self {
        self.segments.push(TrajectorySegment::straight(duration, self.speed));
        self
    }

    pub fn grade(mut self, duration: f64, grade_change: f64) -> Self {
        self.segments
            .push(TrajectorySegment::straight(duration, self.speed).with_grade_change(grade_change));
        self
    }

    /// Turn by `angle` (rad, positive right) at `rate` (rad/s, magnitude).
    pub fn turn(mut self, angle: f64, rate: f64) -> Self {
        let ramp = 2.0;
        // keep segment boundaries on a 10 ms grid; the rate absorbs the rounding
        let duration = ((angle.abs() / rate.abs() + ramp) * 100.0).round() / 100.0;
        let rate = angle / (duration - ramp);
        self.segments
            .push(TrajectorySegment::arc(duration, self.speed, rate).with_turn_ramp(ramp));
        self
    }

    pub fn build(self) -> Vec<TrajectorySegment> {
        self.segments
    }
}
