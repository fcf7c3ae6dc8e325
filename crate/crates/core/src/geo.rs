//! Planar spatio-temporal geometry.
//!
//! Regions are closed Euclidean disks in a meter-based plane; a point is a
//! disk of radius zero. Time is integer seconds since an epoch.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// A closed disk. Serialized as `{cx, cy, radius}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
}

impl Disk {
    pub fn new(center: Point, radius: f64) -> Self {
        debug_assert!(radius >= 0.0, "negative radius {radius}");
        Self {
            cx: center.x,
            cy: center.y,
            radius,
        }
    }

    /// Exact location.
    pub fn point(x: f64, y: f64) -> Self {
        Self::new(Point::new(x, y), 0.0)
    }

    pub fn center(&self) -> Point {
        Point::new(self.cx, self.cy)
    }

    pub fn with_radius(&self, radius: f64) -> Self {
        Self::new(self.center(), radius)
    }

    pub fn is_valid(&self) -> bool {
        self.center().is_finite() && self.radius.is_finite() && self.radius >= 0.0
    }

    pub fn contains_point(&self, p: Point, tolerance: f64) -> bool {
        dist_points(self.center(), p) <= self.radius + tolerance
    }

    /// `self ⊆ other`, analytically.
    pub fn is_within(&self, other: &Disk) -> bool {
        dist_points(self.center(), other.center()) + self.radius <= other.radius
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct TimeStamp(pub i64);

impl TimeStamp {
    pub fn abs_diff(self, other: TimeStamp) -> u64 {
        self.0.abs_diff(other.0)
    }

    pub fn shifted(self, by: i64) -> TimeStamp {
        TimeStamp(self.0.saturating_add(by))
    }

    pub fn seconds_between(self, other: TimeStamp) -> f64 {
        self.abs_diff(other) as f64
    }
}

/// Closed interval `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TimeInterval {
    pub start: TimeStamp,
    pub end: TimeStamp,
}

impl TimeInterval {
    pub fn new(start: i64, end: i64) -> Self {
        debug_assert!(start <= end, "interval [{start}, {end}] is reversed");
        Self {
            start: TimeStamp(start),
            end: TimeStamp(end),
        }
    }

    pub fn contains(&self, t: TimeStamp) -> bool {
        self.start <= t && t <= self.end
    }

    pub fn intersects(&self, other: &TimeInterval) -> bool {
        self.start <= other.end && other.start <= self.end
    }

    pub fn length(&self) -> i64 {
        self.end.0 - self.start.0
    }

    pub fn is_valid(&self) -> bool {
        self.start <= self.end
    }
}

/// System-wide bounds and tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    /// Maximum plausible user speed, m/s.
    pub v_max: f64,
    /// Longest preference window, seconds.
    pub t_max: i64,
    /// Largest preference distance and co-location graph radius, meters.
    pub d_max: f64,
    /// Containment tolerance for zero-elapsed-time reachability, meters.
    pub epsilon: f64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            v_max: 1.5,
            t_max: 86_400,
            d_max: 1000.0,
            epsilon: 1e-9,
        }
    }
}

impl Config {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.v_max.is_finite() && self.v_max > 0.0) {
            return Err(format!("v_max must be positive, got {}", self.v_max));
        }
        if self.t_max <= 0 {
            return Err(format!("t_max must be positive, got {}", self.t_max));
        }
        if !(self.d_max.is_finite() && self.d_max > 0.0) {
            return Err(format!("d_max must be positive, got {}", self.d_max));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(format!("epsilon must be non-negative, got {}", self.epsilon));
        }
        if self.epsilon >= self.d_max {
            return Err("epsilon must be much smaller than d_max".into());
        }
        Ok(())
    }
}

pub fn dist_points(p: Point, q: Point) -> f64 {
    (p.x - q.x).hypot(p.y - q.y)
}

/// Largest distance between a point of `a` and a point of `b`.
pub fn dmax_disks(a: &Disk, b: &Disk) -> f64 {
    dist_points(a.center(), b.center()) + (a.radius + b.radius)
}

/// Smallest distance between a point of `a` and a point of `b`.
pub fn dmin_disks(a: &Disk, b: &Disk) -> f64 {
    (dist_points(a.center(), b.center()) - (a.radius + b.radius)).max(0.0)
}

/// Every point reachable from `s` within `dt` seconds at speed `v_max`.
///
/// # Panics
/// If `dt` is negative.
pub fn ext(s: &Disk, dt: f64, v_max: f64) -> Disk {
    assert!(dt >= 0.0, "ext called with negative elapsed time {dt}");
    s.with_radius(s.radius + v_max * dt)
}

/// `sup_{p in a} inf_{q in b} |p - q|`: how far `a` sticks out of `b`.
pub fn directed_hausdorff(a: &Disk, b: &Disk) -> f64 {
    (dist_points(a.center(), b.center()) + a.radius - b.radius).max(0.0)
}

/// Whether the destination region is reachable from the source region: every
/// point of `to_s` lies strictly within `v_max * |dt|` of some point of
/// `from_s`. With no elapsed time the destination must be contained in the
/// source (within `epsilon`).
pub fn reachable(
    from_s: &Disk,
    from_t: TimeStamp,
    to_s: &Disk,
    to_t: TimeStamp,
    v_max: f64,
    epsilon: f64,
) -> bool {
    let gap = directed_hausdorff(to_s, from_s);
    let dt = from_t.abs_diff(to_t);
    if dt == 0 {
        gap <= epsilon
    } else {
        gap < v_max * dt as f64
    }
}

/// Projection of `t` onto the interval.
pub fn nearest_time(interval: &TimeInterval, t: TimeStamp) -> TimeStamp {
    t.clamp(interval.start, interval.end)
}
