//! Co-location predicates and their validity conditions.
//!
//! A direct co-location is one resource tagging a protected user together
//! with someone from the excluding set. An indirect co-location is a pair of
//! resources, close in space and time, that place the protected user and an
//! excluded user near each other. A co-location is valid when it still leaves
//! the users enough time to be farther apart than the preference distance
//! during the protected window.

use serde::{Deserialize, Serialize};

use crate::geo::{dmax_disks, ext, nearest_time, reachable, TimeInterval};
use crate::model::{PrivacyPreference, Resource, UserId};

/// How the time-overlap clause of indirect validity is read.
///
/// `Disjoint` requires the co-location span to avoid the window (matching
/// the direct rule). `Overlapping` requires it to intersect the window, which
/// is how the clause is literally written; it is kept for comparison runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlapRule {
    #[default]
    Disjoint,
    Overlapping,
}

/// `r ⊥ r2`: no shared users, or each is reachable from the other.
pub fn independent(r: &Resource, r2: &Resource, v_max: f64, epsilon: f64) -> bool {
    if !r.shares_users_with(r2) {
        return true;
    }
    reachable(&r2.space, r2.time, &r.space, r.time, v_max, epsilon)
        && reachable(&r.space, r.time, &r2.space, r2.time, v_max, epsilon)
}

pub fn is_direct_coloc(r: &Resource, u: &UserId, phi: &PrivacyPreference) -> bool {
    r.users.contains(u)
        && !r.users.is_disjoint(&phi.excluding)
        && r.users.is_disjoint(&phi.adversaries)
}

/// `½ · gap / dt`, with a zero denominator mapped to ±∞ by the numerator's
/// sign (0/0 is taken as 0).
fn half_rate(gap: f64, dt: u64) -> f64 {
    if dt == 0 {
        if gap > 0.0 {
            f64::INFINITY
        } else if gap < 0.0 {
            f64::NEG_INFINITY
        } else {
            0.0
        }
    } else {
        0.5 * gap / dt as f64
    }
}

/// A direct co-location outside the window that leaves the users time to
/// separate by `phi.distance` before the nearest instant of the window.
pub fn is_valid_direct(r: &Resource, phi: &PrivacyPreference, occ: &TimeInterval, v_max: f64) -> bool {
    if occ.contains(r.time) {
        return false;
    }
    let dt = r.time.abs_diff(nearest_time(occ, r.time));
    half_rate(phi.distance, dt) < v_max
}

pub fn is_indirect_coloc(
    r: &Resource,
    r2: &Resource,
    u: &UserId,
    phi: &PrivacyPreference,
    v_max: f64,
) -> bool {
    if r.rid == r2.rid
        || !r.users.contains(u)
        || r2.users.is_disjoint(&phi.excluding)
        || !r.users.is_disjoint(&phi.adversaries)
        || !r2.users.is_disjoint(&phi.adversaries)
    {
        return false;
    }
    let spread = dmax_disks(&r.space, &r2.space);
    let dt = r.time.abs_diff(r2.time);
    if dt == 0 {
        spread < phi.distance
    } else {
        (phi.distance - spread) / dt as f64 > v_max
    }
}

/// Earlier and later resource of a pair; ties keep argument order.
pub fn by_time<'a>(r: &'a Resource, r2: &'a Resource) -> (&'a Resource, &'a Resource) {
    if r2.time < r.time {
        (r2, r)
    } else {
        (r, r2)
    }
}

pub fn is_valid_indirect(
    r: &Resource,
    r2: &Resource,
    phi: &PrivacyPreference,
    occ: &TimeInterval,
    v_max: f64,
    overlap: OverlapRule,
) -> bool {
    let (early, late) = by_time(r, r2);
    let span = TimeInterval {
        start: early.time,
        end: late.time,
    };
    let overlap_ok = match overlap {
        OverlapRule::Disjoint => !span.intersects(occ),
        OverlapRule::Overlapping => span.intersects(occ),
    };
    if !overlap_ok {
        return false;
    }
    let dt = early.time.seconds_between(late.time);
    let grown = ext(&early.space, dt, v_max);
    let gap = phi.distance - dmax_disks(&grown, &late.space);
    let to_window = late.time.abs_diff(nearest_time(occ, late.time));
    half_rate(gap, to_window) < v_max
}

/// Any occurrence for which `r` is an invalid direct co-location of `u`.
pub fn first_invalid_direct(
    r: &Resource,
    u: &UserId,
    phi: &PrivacyPreference,
    occurrences: &[TimeInterval],
    v_max: f64,
) -> Option<TimeInterval> {
    if !is_direct_coloc(r, u, phi) {
        return None;
    }
    occurrences
        .iter()
        .find(|occ| !is_valid_direct(r, phi, occ, v_max))
        .copied()
}

/// Any occurrence for which `⟨r, r2⟩` is an invalid indirect co-location of
/// `u` (with `u` tagged in `r`).
pub fn first_invalid_indirect(
    r: &Resource,
    r2: &Resource,
    u: &UserId,
    phi: &PrivacyPreference,
    occurrences: &[TimeInterval],
    v_max: f64,
    overlap: OverlapRule,
) -> Option<TimeInterval> {
    if !is_indirect_coloc(r, r2, u, phi, v_max) {
        return None;
    }
    occurrences
        .iter()
        .find(|occ| !is_valid_indirect(r, r2, phi, occ, v_max, overlap))
        .copied()
}

/// Latest instant `t` such that a co-location at `t` could still be invalid
/// for some window; co-locations older than this are valid for every window.
pub fn validity_reach(distance: f64, v_max: f64) -> i64 {
    (distance / v_max).ceil() as i64
}
