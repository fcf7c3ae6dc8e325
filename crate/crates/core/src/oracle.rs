//! Brute-force adversary oracle.
//!
//! Two independent checks over a published resource set:
//!
//! * [`check_conditions`] enumerates every pair and every (resource or pair,
//!   user, preference, window) combination and re-evaluates independence and
//!   co-location validity straight from their definitions.
//! * [`check_semantic_privacy`] plays the adversary: for sampled instants in
//!   each protected window it intersects every reachability disk of the
//!   protected user and of each excluded user, and reports the instant if no
//!   placement inside those regions puts them farther apart than the
//!   preference distance.
//!
//! Nothing here calls into the engine or the rule predicates; only the
//! geometry primitives are shared.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::{PI, TAU};

use chrono::{DateTime, Months};
use serde::{Deserialize, Serialize};

use crate::geo::{
    dist_points, dmax_disks, ext, nearest_time, Config, Disk, Point, TimeInterval, TimeStamp,
};
use crate::model::{Pid, PreferenceStore, PrivacyPreference, Recurrence, Resource, ResourceStore, Rid, UserId};
use crate::rules::OverlapRule;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ViolationKind {
    DependentPair {
        a: Rid,
        b: Rid,
    },
    InvalidDirect {
        rid: Rid,
        user: UserId,
        pid: Pid,
        occurrence: TimeInterval,
    },
    InvalidIndirect {
        rid: Rid,
        other: Rid,
        user: UserId,
        pid: Pid,
        occurrence: TimeInterval,
    },
    SemanticColoc {
        user: UserId,
        excluded: UserId,
        pid: Pid,
        t: TimeStamp,
        /// `None` when one of the two regions is empty.
        max_feasible_distance: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    #[serde(flatten)]
    pub kind: ViolationKind,
    pub evidence: String,
}

/// Windows of `p` touching `horizon`, stepping one period at a time from the
/// first window.
fn windows(p: &PrivacyPreference, horizon: &TimeInterval) -> Vec<TimeInterval> {
    let w = p.window;
    let len = w.end.0 - w.start.0;
    let touches = |s: i64| s <= horizon.end.0 && s + len >= horizon.start.0;
    let step = match p.recurrence {
        Recurrence::Once => {
            return if touches(w.start.0) { vec![w] } else { vec![] };
        }
        Recurrence::Daily => 86_400,
        Recurrence::Weekly => 604_800,
        Recurrence::Yearly => {
            let mut out = Vec::new();
            let Some(base) = DateTime::from_timestamp(w.start.0, 0) else {
                return out;
            };
            for k in 0u32.. {
                let Some(s) = base.checked_add_months(Months::new(12 * k)) else {
                    break;
                };
                let s = s.timestamp();
                if s > horizon.end.0 {
                    break;
                }
                if touches(s) {
                    out.push(TimeInterval::new(s, s + len));
                }
            }
            return out;
        }
    };
    let mut k = ((horizon.start.0 - w.end.0) / step - 2).max(0);
    let mut out = Vec::new();
    while w.start.0 + k * step <= horizon.end.0 {
        let s = w.start.0 + k * step;
        if touches(s) {
            out.push(TimeInterval::new(s, s + len));
        }
        k += 1;
    }
    out
}

fn mutually_reachable(a: &Resource, b: &Resource, config: &Config) -> bool {
    // every point of each region within v·Δt of some point of the other
    let d = dist_points(a.space.center(), b.space.center());
    let a_out_of_b = (d + a.space.radius - b.space.radius).max(0.0);
    let b_out_of_a = (d + b.space.radius - a.space.radius).max(0.0);
    let dt = a.time.abs_diff(b.time);
    if dt == 0 {
        a_out_of_b <= config.epsilon && b_out_of_a <= config.epsilon
    } else {
        let budget = config.v_max * dt as f64;
        a_out_of_b < budget && b_out_of_a < budget
    }
}

fn meets(users: &BTreeSet<UserId>, group: &BTreeSet<UserId>) -> bool {
    users.iter().any(|u| group.contains(u))
}

fn direct_problem(r: &Resource, phi: &PrivacyPreference, occ: &TimeInterval, v: f64) -> Option<String> {
    if occ.contains(r.time) {
        return Some(format!("t={} lies inside [{}, {}]", r.time.0, occ.start.0, occ.end.0));
    }
    let gap = r.time.abs_diff(nearest_time(occ, r.time)) as f64;
    let needed = 0.5 * phi.distance / gap;
    (needed >= v).then(|| {
        format!(
            "separating by {} m in {gap} s needs {needed} m/s each, v_max {v}",
            phi.distance
        )
    })
}

fn pair_problem(
    r: &Resource,
    r2: &Resource,
    phi: &PrivacyPreference,
    occ: &TimeInterval,
    config: &Config,
    overlap: OverlapRule,
) -> Option<String> {
    let (first, second) = if r2.time < r.time { (r2, r) } else { (r, r2) };
    let touches = first.time <= occ.end && occ.start <= second.time;
    match overlap {
        OverlapRule::Disjoint if touches => {
            return Some(format!(
                "span [{}, {}] overlaps [{}, {}]",
                first.time.0, second.time.0, occ.start.0, occ.end.0
            ))
        }
        OverlapRule::Overlapping if !touches => {
            return Some("span does not overlap the window".to_string())
        }
        _ => {}
    }
    let dt = second.time.seconds_between(first.time);
    let spread = dmax_disks(&ext(&first.space, dt, config.v_max), &second.space);
    let remaining = phi.distance - spread;
    let to_window = second.time.abs_diff(nearest_time(occ, second.time));
    let needed = if to_window == 0 {
        if remaining > 0.0 {
            f64::INFINITY
        } else if remaining < 0.0 {
            f64::NEG_INFINITY
        } else {
            0.0
        }
    } else {
        0.5 * remaining / to_window as f64
    };
    (needed >= config.v_max).then(|| {
        format!(
            "worst-case spread {spread} m at t={}, {remaining} m left in {to_window} s needs {needed} m/s",
            second.time.0
        )
    })
}

/// Whether `⟨r, r2⟩` places `u` (tagged in `r`) near an excluded user of
/// `phi` closely enough in time.
fn pair_colocates(r: &Resource, r2: &Resource, u: &UserId, phi: &PrivacyPreference, v: f64) -> bool {
    if r.rid == r2.rid || !r.users.contains(u) || !meets(&r2.users, &phi.excluding) {
        return false;
    }
    if meets(&r.users, &phi.adversaries) || meets(&r2.users, &phi.adversaries) {
        return false;
    }
    let spread = dmax_disks(&r.space, &r2.space);
    let dt = r.time.abs_diff(r2.time);
    if dt == 0 {
        spread < phi.distance
    } else {
        phi.distance - spread > v * dt as f64
    }
}

/// Exhaustive check of pairwise independence and of the validity of every
/// direct and indirect co-location, over windows touching `horizon`.
pub fn check_conditions(
    store: &ResourceStore,
    prefs: &PreferenceStore,
    config: &Config,
    overlap: OverlapRule,
    horizon: &TimeInterval,
) -> Vec<Violation> {
    let resources: Vec<&Resource> = store.iter_sorted().collect();
    let mut out = Vec::new();
    let mut window_cache: BTreeMap<&Pid, Vec<TimeInterval>> = BTreeMap::new();
    let prefs_by_user: BTreeMap<&UserId, Vec<&PrivacyPreference>> =
        prefs.iter().fold(BTreeMap::new(), |mut m, p| {
            m.entry(&p.owner).or_default().push(p);
            m
        });
    for p in prefs.iter() {
        window_cache.insert(&p.pid, windows(p, horizon));
    }

    for (i, a) in resources.iter().enumerate() {
        for b in &resources[i + 1..] {
            if meets(&a.users, &b.users) && !mutually_reachable(a, b, config) {
                out.push(Violation {
                    kind: ViolationKind::DependentPair {
                        a: a.rid.clone(),
                        b: b.rid.clone(),
                    },
                    evidence: format!(
                        "share users but regions are not mutually reachable within {} s",
                        a.time.abs_diff(b.time)
                    ),
                });
            }
        }
    }

    for r in &resources {
        for u in &r.users {
            for phi in prefs_by_user.get(u).into_iter().flatten() {
                let direct = meets(&r.users, &phi.excluding) && !meets(&r.users, &phi.adversaries);
                if !direct {
                    continue;
                }
                for occ in &window_cache[&phi.pid] {
                    if let Some(why) = direct_problem(r, phi, occ, config.v_max) {
                        out.push(Violation {
                            kind: ViolationKind::InvalidDirect {
                                rid: r.rid.clone(),
                                user: u.clone(),
                                pid: phi.pid.clone(),
                                occurrence: *occ,
                            },
                            evidence: why,
                        });
                    }
                }
            }
        }
    }

    for r in &resources {
        for r2 in &resources {
            for u in &r.users {
                for phi in prefs_by_user.get(u).into_iter().flatten() {
                    if !pair_colocates(r, r2, u, phi, config.v_max) {
                        continue;
                    }
                    for occ in &window_cache[&phi.pid] {
                        if let Some(why) = pair_problem(r, r2, phi, occ, config, overlap) {
                            out.push(Violation {
                                kind: ViolationKind::InvalidIndirect {
                                    rid: r.rid.clone(),
                                    other: r2.rid.clone(),
                                    user: u.clone(),
                                    pid: phi.pid.clone(),
                                    occurrence: *occ,
                                },
                                evidence: why,
                            });
                        }
                    }
                }
            }
        }
    }
    out
}

/// Where a user can possibly be at `t`: the intersection of `disks`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub user: UserId,
    pub t: TimeStamp,
    pub disks: Vec<Disk>,
    /// No resource mentions the user; any location is possible.
    pub unconstrained: bool,
}

pub fn feasible_envelope(u: &UserId, t: TimeStamp, store: &ResourceStore, v_max: f64) -> Envelope {
    let disks: Vec<Disk> = store
        .tagging(u)
        .map(|r| ext(&r.space, t.seconds_between(r.time), v_max))
        .collect();
    Envelope {
        user: u.clone(),
        t,
        unconstrained: disks.is_empty(),
        disks,
    }
}

/// Intersection of disks reduced to the ones that bound it.
#[derive(Debug, Clone)]
pub struct Region {
    disks: Vec<Disk>,
    vertices: Vec<Point>,
}

fn tolerance(d: &Disk) -> f64 {
    1e-9 * (1.0 + d.radius + d.cx.abs() + d.cy.abs())
}

impl Region {
    /// `None` if the intersection is empty.
    pub fn new(disks: &[Disk]) -> Option<Region> {
        assert!(!disks.is_empty(), "region needs at least one disk");
        // drop disks that contain another one; keep one of exact duplicates
        let mut kept: Vec<Disk> = Vec::new();
        let mut sorted = disks.to_vec();
        sorted.sort_by(|a, b| a.radius.total_cmp(&b.radius));
        for d in sorted {
            if !kept.iter().any(|k| k.is_within(&d)) {
                kept.push(d);
            }
        }
        let mut region = Region {
            disks: kept,
            vertices: Vec::new(),
        };
        if region.disks.len() == 1 {
            return Some(region);
        }
        let n = region.disks.len();
        let mut vertices = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                for p in circle_intersections(&region.disks[i], &region.disks[j]) {
                    if region.contains(p) {
                        vertices.push(p);
                    }
                }
            }
        }
        if vertices.is_empty() {
            // with several non-nested disks the boundary has corners
            return None;
        }
        region.vertices = vertices;
        Some(region)
    }

    pub fn contains(&self, p: Point) -> bool {
        self.disks.iter().all(|d| d.contains_point(p, tolerance(d)))
    }

    pub fn disks(&self) -> &[Disk] {
        &self.disks
    }

    /// Feasible directions θ for which `c + ρ·θ` lies in the region.
    fn feasible_angles(&self, c: Point, rho: f64) -> ArcSet {
        let mut set = ArcSet::full();
        for d in &self.disks {
            set = set.intersect_arc(arc_inside(c, rho, d));
            if set.is_empty() {
                break;
            }
        }
        set
    }
}

fn circle_intersections(a: &Disk, b: &Disk) -> Vec<Point> {
    let d = dist_points(a.center(), b.center());
    let tol = tolerance(a).max(tolerance(b));
    if d == 0.0 || d > a.radius + b.radius + tol || d < (a.radius - b.radius).abs() - tol {
        return Vec::new();
    }
    let along = (d * d + a.radius * a.radius - b.radius * b.radius) / (2.0 * d);
    let h = (a.radius * a.radius - along * along).max(0.0).sqrt();
    let (ux, uy) = ((b.cx - a.cx) / d, (b.cy - a.cy) / d);
    let (mx, my) = (a.cx + along * ux, a.cy + along * uy);
    if h == 0.0 {
        return vec![Point::new(mx, my)];
    }
    vec![
        Point::new(mx - h * uy, my + h * ux),
        Point::new(mx + h * uy, my - h * ux),
    ]
}

/// Angles as a union of closed intervals within `[0, 2π)`.
#[derive(Debug, Clone)]
struct ArcSet {
    spans: Vec<(f64, f64)>,
}

enum Arc {
    Full,
    Empty,
    Around { mid: f64, half: f64 },
}

impl ArcSet {
    fn full() -> Self {
        Self {
            spans: vec![(0.0, TAU)],
        }
    }

    fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    fn intersect_arc(&self, arc: Arc) -> ArcSet {
        let pieces: Vec<(f64, f64)> = match arc {
            Arc::Full => return self.clone(),
            Arc::Empty => vec![],
            Arc::Around { mid, half } => {
                let lo = (mid - half).rem_euclid(TAU);
                let hi = lo + 2.0 * half;
                if hi <= TAU {
                    vec![(lo, hi)]
                } else {
                    vec![(lo, TAU), (0.0, hi - TAU)]
                }
            }
        };
        let mut spans = Vec::new();
        for &(a, b) in &self.spans {
            for &(c, d) in &pieces {
                let (lo, hi) = (a.max(c), b.min(d));
                if lo <= hi {
                    spans.push((lo, hi));
                }
            }
        }
        ArcSet { spans }
    }

    fn shifted_by_pi(&self) -> ArcSet {
        let mut out = ArcSet { spans: vec![] };
        for &(a, b) in &self.spans {
            let (a, b) = (a + PI, b + PI);
            if b <= TAU {
                out.spans.push((a, b));
            } else if a >= TAU {
                out.spans.push((a - TAU, b - TAU));
            } else {
                out.spans.push((a, TAU));
                out.spans.push((0.0, b - TAU));
            }
        }
        out
    }

    fn intersect(&self, other: &ArcSet) -> ArcSet {
        let mut spans = Vec::new();
        for &(a, b) in &self.spans {
            for &(c, d) in &other.spans {
                let (lo, hi) = (a.max(c), b.min(d));
                if lo <= hi {
                    spans.push((lo, hi));
                }
            }
        }
        ArcSet { spans }
    }
}

/// Directions θ with `c + ρθ` inside `d`.
fn arc_inside(c: Point, rho: f64, d: &Disk) -> Arc {
    let dist = dist_points(c, d.center());
    let tol = tolerance(d);
    if rho == 0.0 || dist == 0.0 {
        return if dist + rho <= d.radius + tol {
            Arc::Full
        } else {
            Arc::Empty
        };
    }
    let cos_min = (rho * rho + dist * dist - d.radius * d.radius) / (2.0 * rho * dist);
    let slack = tol / rho.min(dist).max(1e-300);
    if cos_min <= -1.0 {
        Arc::Full
    } else if cos_min > 1.0 + slack {
        Arc::Empty
    } else {
        let mid = (d.cy - c.y).atan2(d.cx - c.x);
        let half = cos_min.clamp(-1.0, 1.0).acos();
        Arc::Around { mid, half }
    }
}

fn unit(from: Point, to: Point) -> Option<(f64, f64)> {
    let (dx, dy) = (to.x - from.x, to.y - from.y);
    let n = dx.hypot(dy);
    (n > 0.0).then(|| (dx / n, dy / n))
}

/// Farthest point of `d` from `p`, if it lies in `region`.
fn farthest_on(d: &Disk, p: Point, region: &Region) -> Option<f64> {
    match unit(p, d.center()) {
        Some((ux, uy)) => {
            let q = Point::new(d.cx + d.radius * ux, d.cy + d.radius * uy);
            region.contains(q).then(|| dist_points(p, q))
        }
        // p is the center: every point of the circle is equally far
        None => (!region.feasible_angles(d.center(), d.radius).is_empty()).then_some(d.radius),
    }
}

/// Largest distance between a point of `a` and a point of `b`.
///
/// The maximum of a distance over two intersections of disks is attained at
/// corners or at points where both sit on arcs along the line of their
/// centers, so those candidates are enumerated exactly; concentric arcs are
/// resolved by intersecting the feasible direction intervals.
pub fn max_distance(a: &Region, b: &Region) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for pa in &a.vertices {
        for pb in &b.vertices {
            best = best.max(dist_points(*pa, *pb));
        }
        for db in &b.disks {
            if let Some(d) = farthest_on(db, *pa, b) {
                best = best.max(d);
            }
        }
    }
    for pb in &b.vertices {
        for da in &a.disks {
            if let Some(d) = farthest_on(da, *pb, a) {
                best = best.max(d);
            }
        }
    }
    for da in &a.disks {
        for db in &b.disks {
            match unit(db.center(), da.center()) {
                Some((ux, uy)) => {
                    for (sa, sb) in [(1.0, -1.0), (1.0, 1.0), (-1.0, -1.0), (-1.0, 1.0)] {
                        let pa = Point::new(da.cx + sa * da.radius * ux, da.cy + sa * da.radius * uy);
                        let pb = Point::new(db.cx + sb * db.radius * ux, db.cy + sb * db.radius * uy);
                        if a.contains(pa) && b.contains(pb) {
                            best = best.max(dist_points(pa, pb));
                        }
                    }
                }
                None => {
                    // same center: opposite directions give radius sum
                    let fa = a.feasible_angles(da.center(), da.radius);
                    let fb = b.feasible_angles(db.center(), db.radius).shifted_by_pi();
                    if !fa.intersect(&fb).is_empty() {
                        best = best.max(da.radius + db.radius);
                    }
                }
            }
        }
    }
    best
}

/// Brute-force lower bound on [`max_distance`]: boundary points of both
/// regions sampled every `spacing` meters along each bounding circle.
pub fn max_distance_sampled(a: &Region, b: &Region, spacing: f64, cap: usize) -> f64 {
    let sample = |r: &Region| -> Vec<Point> {
        let mut pts = r.vertices.clone();
        for d in &r.disks {
            let n = ((TAU * d.radius / spacing).ceil() as usize).clamp(8, cap);
            for k in 0..n {
                let th = TAU * k as f64 / n as f64;
                let p = Point::new(d.cx + d.radius * th.cos(), d.cy + d.radius * th.sin());
                if r.contains(p) {
                    pts.push(p);
                }
            }
        }
        pts
    };
    let (sa, sb) = (sample(a), sample(b));
    let mut best = f64::NEG_INFINITY;
    for p in &sa {
        for q in &sb {
            best = best.max(dist_points(*p, *q));
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemanticParams {
    /// Seconds between sampled instants inside each window.
    pub time_step: i64,
    /// Boundary spacing of the sampled cross-check, meters.
    pub grid_res: f64,
    /// Also sample envelope boundaries at `grid_res` and check the analytic
    /// maximum against them.
    pub cross_check: bool,
}

impl Default for SemanticParams {
    fn default() -> Self {
        Self {
            time_step: 60,
            grid_res: 1.0,
            cross_check: false,
        }
    }
}

/// Default time range for oracle checks: the store's span padded by the
/// longest co-location reach.
pub fn default_horizon(store: &ResourceStore, config: &Config) -> Option<TimeInterval> {
    let span = store.time_span()?;
    let pad = (config.d_max / config.v_max).ceil() as i64 + config.t_max + 1;
    Some(TimeInterval {
        start: span.start.shifted(-pad),
        end: span.end.shifted(pad),
    })
}

/// Instants where an adversary who sees every resource can prove that a
/// protected user and an excluded user were within the preference distance.
pub fn check_semantic_privacy(
    store: &ResourceStore,
    prefs: &PreferenceStore,
    config: &Config,
    horizon: &TimeInterval,
    params: &SemanticParams,
) -> Vec<Violation> {
    assert!(params.time_step >= 1, "time_step must be at least one second");
    assert!(params.grid_res > 0.0, "grid_res must be positive");
    let mut out = Vec::new();
    let mut regions: BTreeMap<(UserId, TimeStamp), Option<Option<Region>>> = BTreeMap::new();
    let mut region_of = |u: &UserId, t: TimeStamp| -> Option<Option<Region>> {
        regions
            .entry((u.clone(), t))
            .or_insert_with(|| {
                let env = feasible_envelope(u, t, store, config.v_max);
                (!env.unconstrained).then(|| Region::new(&env.disks))
            })
            .clone()
    };
    for phi in prefs.iter() {
        let reach = (phi.distance / config.v_max).ceil() as i64;
        for occ in windows(phi, horizon) {
            let near = TimeInterval {
                start: occ.start.shifted(-reach),
                end: occ.end.shifted(reach),
            };
            let lo = occ.start.max(horizon.start);
            let hi = occ.end.min(horizon.end);
            if lo > hi {
                continue;
            }
            for e in &phi.excluding {
                let exempt = store.iter().any(|r| {
                    near.contains(r.time)
                        && meets(&r.users, &phi.adversaries)
                        && (r.users.contains(&phi.owner) || r.users.contains(e))
                });
                if exempt {
                    continue;
                }
                let mut t = lo;
                loop {
                    let ru = region_of(&phi.owner, t);
                    let re = region_of(e, t);
                    if let (Some(ru), Some(re)) = (ru, re) {
                        let far = match (&ru, &re) {
                            (Some(a), Some(b)) => Some(max_distance(a, b)),
                            _ => None,
                        };
                        if let (true, Some(a), Some(b), Some(f)) = (params.cross_check, &ru, &re, far) {
                            let sampled = max_distance_sampled(a, b, params.grid_res, 1 << 14);
                            assert!(
                                sampled <= f + 1e-6,
                                "sampled placement {sampled} m beats analytic maximum {f} m"
                            );
                        }
                        if far.is_none_or(|f| f <= phi.distance) {
                            out.push(Violation {
                                kind: ViolationKind::SemanticColoc {
                                    user: phi.owner.clone(),
                                    excluded: e.clone(),
                                    pid: phi.pid.clone(),
                                    t,
                                    max_feasible_distance: far,
                                },
                                evidence: match far {
                                    Some(f) => format!(
                                        "every feasible placement at t={} is within {f} m ≤ {} m",
                                        t.0, phi.distance
                                    ),
                                    None => format!("a feasible region is empty at t={}", t.0),
                                },
                            });
                        }
                    }
                    if t >= hi {
                        break;
                    }
                    t = TimeStamp((t.0 + params.time_step).min(hi.0));
                }
            }
        }
    }
    out
}
