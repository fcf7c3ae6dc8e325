//! Users, resources, friendship, privacy preferences and their stores.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use base64::Engine as _;
use chrono::{DateTime, Months};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::geo::{dist_points, Config, Disk, TimeInterval, TimeStamp};

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }
    };
}

string_id!(UserId);
string_id!(
    /// Resource identifier.
    Rid
);
string_id!(
    /// Preference identifier.
    Pid
);

/// A published item: tagged users, timestamp, spatial region, and content.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resource {
    pub rid: Rid,
    pub users: BTreeSet<UserId>,
    pub owner: UserId,
    pub time: TimeStamp,
    pub space: Disk,
    #[serde(rename = "content_b64", with = "content_b64")]
    pub content: Vec<u8>,
}

mod content_b64 {
    use super::*;

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&base64::engine::general_purpose::STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let text = String::deserialize(d)?;
        base64::engine::general_purpose::STANDARD
            .decode(text.as_bytes())
            .map_err(serde::de::Error::custom)
    }
}

impl Resource {
    pub fn shares_users_with(&self, other: &Resource) -> bool {
        !self.users.is_disjoint(&other.users)
    }

    pub fn tags(&self, u: &UserId) -> bool {
        self.users.contains(u)
    }
}

/// Why a resource fails the tagging rule.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "kind", content = "user")]
pub enum TagViolation {
    #[error("owner is not among the tagged users")]
    OwnerMissing,
    #[error("owner {0} is not a registered user")]
    UnknownOwner(UserId),
    #[error("tagged user {0} is not a friend of the owner")]
    NonFriendTagged(UserId),
}

/// Symmetric friendship relation plus the set of registered users.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SocialGraph {
    users: BTreeSet<UserId>,
    edges: BTreeSet<(UserId, UserId)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FriendEdge {
    pub a: UserId,
    pub b: UserId,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SocialError {
    #[error("user id must be nonempty")]
    EmptyUserId,
    #[error("user {0} cannot befriend themselves")]
    SelfLoop(UserId),
    #[error("unknown user {0}")]
    UnknownUser(UserId),
}

impl SocialGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_user(&mut self, u: UserId) -> Result<bool, SocialError> {
        if u.0.is_empty() {
            return Err(SocialError::EmptyUserId);
        }
        Ok(self.users.insert(u))
    }

    pub fn has_user(&self, u: &UserId) -> bool {
        self.users.contains(u)
    }

    pub fn users(&self) -> impl Iterator<Item = &UserId> {
        self.users.iter()
    }

    pub fn add_friend(&mut self, a: UserId, b: UserId) -> Result<bool, SocialError> {
        if a == b {
            return Err(SocialError::SelfLoop(a));
        }
        for u in [&a, &b] {
            if !self.users.contains(u) {
                return Err(SocialError::UnknownUser(u.clone()));
            }
        }
        Ok(self.edges.insert(Self::key(a, b)))
    }

    pub fn friend(&self, a: &UserId, b: &UserId) -> bool {
        a != b && self.edges.contains(&Self::key(a.clone(), b.clone()))
    }

    pub fn edges(&self) -> impl Iterator<Item = FriendEdge> + '_ {
        self.edges.iter().map(|(a, b)| FriendEdge {
            a: a.clone(),
            b: b.clone(),
        })
    }

    pub fn friends_of<'a>(&'a self, u: &'a UserId) -> impl Iterator<Item = &'a UserId> + 'a {
        self.edges.iter().filter_map(move |(a, b)| {
            if a == u {
                Some(b)
            } else if b == u {
                Some(a)
            } else {
                None
            }
        })
    }

    fn key(a: UserId, b: UserId) -> (UserId, UserId) {
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    }
}

/// The owner must be tagged and every other tagged user must be the owner's
/// friend.
pub fn validate_resource(r: &Resource, g: &SocialGraph) -> Result<(), Vec<TagViolation>> {
    let mut violations = Vec::new();
    if !r.users.contains(&r.owner) {
        violations.push(TagViolation::OwnerMissing);
    }
    if !g.has_user(&r.owner) {
        violations.push(TagViolation::UnknownOwner(r.owner.clone()));
    }
    for u in &r.users {
        if *u != r.owner && !g.friend(&r.owner, u) {
            violations.push(TagViolation::NonFriendTagged(u.clone()));
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Recurrence {
    Once,
    Daily,
    Weekly,
    Yearly,
}

const DAY: i64 = 86_400;
const WEEK: i64 = 7 * DAY;

/// "Do not reveal that `owner` was within `distance` of anyone in
/// `excluding` during `window`, unless someone in `adversaries` is tagged
/// too."
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyPreference {
    pub pid: Pid,
    pub owner: UserId,
    pub excluding: BTreeSet<UserId>,
    pub adversaries: BTreeSet<UserId>,
    pub window: TimeInterval,
    pub distance: f64,
    pub recurrence: Recurrence,
}

impl PrivacyPreference {
    /// Every window of this preference intersecting `horizon`, in order.
    pub fn occurrences(&self, horizon: &TimeInterval) -> Vec<TimeInterval> {
        materialize_occurrences(self, horizon)
    }
}

pub fn materialize_occurrences(p: &PrivacyPreference, horizon: &TimeInterval) -> Vec<TimeInterval> {
    let w = p.window;
    if !horizon.is_valid() || !w.is_valid() {
        return Vec::new();
    }
    let fixed_period = match p.recurrence {
        Recurrence::Once => {
            return if w.intersects(horizon) { vec![w] } else { Vec::new() };
        }
        Recurrence::Daily => DAY,
        Recurrence::Weekly => WEEK,
        Recurrence::Yearly => return yearly_occurrences(w, horizon),
    };
    // Occurrence k is [start + kP, end + kP], k >= 0.
    let first = (-(w.end.0 - horizon.start.0).div_euclid(fixed_period)).max(0);
    let last = (horizon.end.0 - w.start.0).div_euclid(fixed_period);
    (first..=last)
        .map(|k| TimeInterval::new(w.start.0 + k * fixed_period, w.end.0 + k * fixed_period))
        .filter(|occ| occ.intersects(horizon))
        .collect()
}

fn yearly_occurrences(w: TimeInterval, horizon: &TimeInterval) -> Vec<TimeInterval> {
    let Some(base) = DateTime::from_timestamp(w.start.0, 0) else {
        return Vec::new();
    };
    let length = w.length();
    // Skip whole years that cannot reach the horizon; 366 days bounds a year.
    let mut k = ((horizon.start.0 - w.end.0) / (366 * DAY) - 1).max(0) as u32;
    let mut out = Vec::new();
    while let Some(start) = base.checked_add_months(Months::new(12 * k)) {
        let start = start.timestamp();
        if start > horizon.end.0 {
            break;
        }
        let occ = TimeInterval::new(start, start + length);
        if occ.intersects(horizon) {
            out.push(occ);
        }
        k += 1;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PreferenceError {
    #[error("window lasts {length} s, longer than t_max = {t_max} s")]
    WindowTooLong { length: i64, t_max: i64 },
    #[error("distance {distance} m exceeds d_max = {d_max} m")]
    DistanceTooLarge { distance: String, d_max: String },
    #[error("preference owner {0} appears in its own excluding set")]
    OwnerInExcluding(UserId),
    #[error("excluding set is empty")]
    EmptyExcluding,
    #[error("window start is after its end")]
    ReversedWindow,
    #[error("distance must be a finite non-negative number")]
    BadDistance,
    #[error("preference {0} already exists")]
    DuplicatePid(Pid),
}

/// Per-user preference sets, keyed by pid for deterministic iteration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PreferenceStore {
    prefs: BTreeMap<UserId, BTreeMap<Pid, PrivacyPreference>>,
}

impl PreferenceStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn check(p: &PrivacyPreference, config: &Config) -> Result<(), PreferenceError> {
        if !p.window.is_valid() {
            return Err(PreferenceError::ReversedWindow);
        }
        if p.window.length() > config.t_max {
            return Err(PreferenceError::WindowTooLong {
                length: p.window.length(),
                t_max: config.t_max,
            });
        }
        if !(p.distance.is_finite() && p.distance >= 0.0) {
            return Err(PreferenceError::BadDistance);
        }
        if p.distance > config.d_max {
            return Err(PreferenceError::DistanceTooLarge {
                distance: p.distance.to_string(),
                d_max: config.d_max.to_string(),
            });
        }
        if p.excluding.is_empty() {
            return Err(PreferenceError::EmptyExcluding);
        }
        if p.excluding.contains(&p.owner) {
            return Err(PreferenceError::OwnerInExcluding(p.owner.clone()));
        }
        Ok(())
    }

    pub fn add(&mut self, p: PrivacyPreference, config: &Config) -> Result<(), PreferenceError> {
        Self::check(&p, config)?;
        if self.prefs.values().any(|m| m.contains_key(&p.pid)) {
            return Err(PreferenceError::DuplicatePid(p.pid));
        }
        self.prefs
            .entry(p.owner.clone())
            .or_default()
            .insert(p.pid.clone(), p);
        Ok(())
    }

    /// Preferences of `u`, ordered by pid. Unknown users have none.
    pub fn preferences_of<'a>(
        &'a self,
        u: &UserId,
    ) -> impl Iterator<Item = &'a PrivacyPreference> + 'a {
        self.prefs.get(u).into_iter().flat_map(|m| m.values())
    }

    pub fn get(&self, pid: &Pid) -> Option<&PrivacyPreference> {
        self.prefs.values().find_map(|m| m.get(pid))
    }

    pub fn iter(&self) -> impl Iterator<Item = &PrivacyPreference> {
        self.prefs.values().flat_map(|m| m.values())
    }

    pub fn len(&self) -> usize {
        self.prefs.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StoreError {
    #[error("resource {0} is already stored")]
    DuplicateRid(Rid),
}

/// Append-only resource set with a uniform-grid index on disk centers and a
/// per-user index.
#[derive(Debug, Clone)]
pub struct ResourceStore {
    cell: f64,
    resources: Vec<Arc<Resource>>,
    by_rid: BTreeMap<Rid, usize>,
    by_user: BTreeMap<UserId, Vec<usize>>,
    grid: HashMap<(i64, i64), Vec<usize>>,
}

impl ResourceStore {
    /// `cell` is the grid cell edge, normally `d_max`.
    pub fn new(cell: f64) -> Self {
        assert!(cell.is_finite() && cell > 0.0, "grid cell must be positive");
        Self {
            cell,
            resources: Vec::new(),
            by_rid: BTreeMap::new(),
            by_user: BTreeMap::new(),
            grid: HashMap::new(),
        }
    }

    pub fn from_resources(
        cell: f64,
        resources: impl IntoIterator<Item = Resource>,
    ) -> Result<Self, StoreError> {
        let mut store = Self::new(cell);
        for r in resources {
            store.insert(r)?;
        }
        Ok(store)
    }

    fn cell_of(&self, cx: f64, cy: f64) -> (i64, i64) {
        ((cx / self.cell).floor() as i64, (cy / self.cell).floor() as i64)
    }

    pub fn insert(&mut self, r: Resource) -> Result<(), StoreError> {
        if self.by_rid.contains_key(&r.rid) {
            return Err(StoreError::DuplicateRid(r.rid));
        }
        let idx = self.resources.len();
        self.by_rid.insert(r.rid.clone(), idx);
        for u in &r.users {
            self.by_user.entry(u.clone()).or_default().push(idx);
        }
        let key = self.cell_of(r.space.cx, r.space.cy);
        self.grid.entry(key).or_default().push(idx);
        self.resources.push(Arc::new(r));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.resources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.resources.is_empty()
    }

    pub fn contains(&self, rid: &Rid) -> bool {
        self.by_rid.contains_key(rid)
    }

    pub fn get(&self, rid: &Rid) -> Option<&Resource> {
        self.by_rid.get(rid).map(|&i| &*self.resources[i])
    }

    /// Resources in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = &Resource> {
        self.resources.iter().map(|r| &**r)
    }

    /// Resources in insertion order starting at position `from`.
    pub fn iter_from(&self, from: usize) -> impl Iterator<Item = &Resource> {
        self.resources[from.min(self.resources.len())..]
            .iter()
            .map(|r| &**r)
    }

    /// Resources ordered by rid.
    pub fn iter_sorted(&self) -> impl Iterator<Item = &Resource> {
        self.by_rid.values().map(|&i| &*self.resources[i])
    }

    /// Resources tagging `u`, in insertion order.
    pub fn tagging<'a>(&'a self, u: &UserId) -> impl Iterator<Item = &'a Resource> + 'a {
        self.by_user
            .get(u)
            .into_iter()
            .flatten()
            .map(|&i| &*self.resources[i])
    }

    /// Resources sharing at least one user with `users`, ordered by rid.
    pub fn sharing_any(&self, users: &BTreeSet<UserId>) -> Vec<&Resource> {
        let mut idx: BTreeSet<(&Rid, usize)> = BTreeSet::new();
        for u in users {
            for &i in self.by_user.get(u).into_iter().flatten() {
                idx.insert((&self.resources[i].rid, i));
            }
        }
        idx.into_iter().map(|(_, i)| &*self.resources[i]).collect()
    }

    /// Candidates whose center lies within `reach` of the given center. May
    /// contain false positives; never misses.
    pub fn centers_near(&self, cx: f64, cy: f64, reach: f64) -> Vec<&Resource> {
        let span = (reach / self.cell).ceil().max(1.0) as i64;
        let (kx, ky) = self.cell_of(cx, cy);
        let mut out = Vec::new();
        if span > 64 {
            out.extend(self.iter());
        } else {
            for dx in -span..=span {
                for dy in -span..=span {
                    if let Some(bucket) = self.grid.get(&(kx + dx, ky + dy)) {
                        out.extend(bucket.iter().map(|&i| &*self.resources[i]));
                    }
                }
            }
        }
        out.retain(|r| dist_points(r.space.center(), crate::geo::Point::new(cx, cy)) <= reach);
        out
    }

    pub fn time_span(&self) -> Option<TimeInterval> {
        let lo = self.resources.iter().map(|r| r.time.0).min()?;
        let hi = self.resources.iter().map(|r| r.time.0).max()?;
        Some(TimeInterval::new(lo, hi))
    }
}

impl PartialEq for ResourceStore {
    fn eq(&self, other: &Self) -> bool {
        self.len() == other.len() && self.iter_sorted().eq(other.iter_sorted())
    }
}

/// Bit-exact JSON image of the engine state. Resources are rid-sorted,
/// preferences pid-sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDump {
    pub users: Vec<UserId>,
    pub friends: Vec<FriendEdge>,
    pub preferences: Vec<PrivacyPreference>,
    pub resources: Vec<Resource>,
}

impl StateDump {
    pub fn capture(social: &SocialGraph, prefs: &PreferenceStore, store: &ResourceStore) -> Self {
        let mut preferences: Vec<_> = prefs.iter().cloned().collect();
        preferences.sort_by(|a, b| a.pid.cmp(&b.pid));
        Self {
            users: social.users().cloned().collect(),
            friends: social.edges().collect(),
            preferences,
            resources: store.iter_sorted().cloned().collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("state dump serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn uid(s: &str) -> UserId {
        UserId::new(s)
    }

    fn set(items: &[&str]) -> BTreeSet<UserId> {
        items.iter().map(|s| uid(s)).collect()
    }

    fn res(rid: &str, owner: &str, users: &[&str]) -> Resource {
        Resource {
            rid: Rid::new(rid),
            users: set(users),
            owner: uid(owner),
            time: TimeStamp(0),
            space: Disk::point(0.0, 0.0),
            content: b"hi".to_vec(),
        }
    }

    fn social() -> SocialGraph {
        let mut g = SocialGraph::new();
        for u in ["o", "f", "s"] {
            g.add_user(uid(u)).unwrap();
        }
        g.add_friend(uid("o"), uid("f")).unwrap();
        g
    }

    fn pref(window: TimeInterval, recurrence: Recurrence) -> PrivacyPreference {
        PrivacyPreference {
            pid: Pid::new("p1"),
            owner: uid("alice"),
            excluding: set(&["bob"]),
            adversaries: set(&["mary"]),
            window,
            distance: 50.0,
            recurrence,
        }
    }

    #[test]
    fn tagging_rule() {
        let g = social();
        assert!(validate_resource(&res("r", "o", &["o"]), &g).is_ok());
        assert!(validate_resource(&res("r", "o", &["o", "f"]), &g).is_ok());
        assert_eq!(
            validate_resource(&res("r", "o", &["o", "s"]), &g),
            Err(vec![TagViolation::NonFriendTagged(uid("s"))])
        );
        assert_eq!(
            validate_resource(&res("r", "o", &["f"]), &g),
            Err(vec![TagViolation::OwnerMissing])
        );
    }

    #[test]
    fn friendship_is_symmetric() {
        let g = social();
        assert!(g.friend(&uid("f"), &uid("o")));
        assert!(!g.friend(&uid("o"), &uid("o")));
        let mut g = g;
        assert_eq!(
            g.add_friend(uid("o"), uid("o")),
            Err(SocialError::SelfLoop(uid("o")))
        );
    }

    #[test]
    fn once_occurrences() {
        let p = pref(TimeInterval::new(100, 200), Recurrence::Once);
        assert_eq!(p.occurrences(&TimeInterval::new(0, 1000)), vec![p.window]);
        assert!(p.occurrences(&TimeInterval::new(201, 1000)).is_empty());
        assert_eq!(p.occurrences(&TimeInterval::new(200, 200)), vec![p.window]);
    }

    #[test]
    fn daily_evenings() {
        // 2011-07-11 19:00 UTC to 23:00 UTC
        let start = 1_310_410_800;
        let p = pref(
            TimeInterval::new(start, start + 4 * 3600),
            Recurrence::Daily,
        );
        let horizon = TimeInterval::new(start - 3600, start + 3 * DAY - 3600);
        let occ = p.occurrences(&horizon);
        assert_eq!(occ.len(), 3);
        for (k, w) in occ.iter().enumerate() {
            assert_eq!(w.length(), 4 * 3600);
            assert_eq!(w.start.0, start + k as i64 * DAY);
        }
    }

    #[test]
    fn recurrence_starts_at_first_window() {
        let p = pref(TimeInterval::new(10 * DAY, 10 * DAY + 60), Recurrence::Weekly);
        assert!(p.occurrences(&TimeInterval::new(0, 10 * DAY - 1)).is_empty());
        let occ = p.occurrences(&TimeInterval::new(0, 24 * DAY));
        assert_eq!(
            occ,
            vec![
                TimeInterval::new(10 * DAY, 10 * DAY + 60),
                TimeInterval::new(17 * DAY, 17 * DAY + 60),
                TimeInterval::new(24 * DAY, 24 * DAY + 60),
            ]
        );
    }

    #[test]
    fn yearly_follows_calendar() {
        // 2012-02-29 12:00 UTC: leap day clamps to Feb 28 in common years
        let start = 1_330_516_800;
        let p = pref(TimeInterval::new(start, start + 60), Recurrence::Yearly);
        let occ = p.occurrences(&TimeInterval::new(start, start + 4 * 366 * DAY));
        assert_eq!(occ.len(), 5);
        let feb28_2013 = 1_362_052_800;
        assert_eq!(occ[1].start.0, feb28_2013);
        let feb29_2016 = 1_456_747_200;
        assert_eq!(occ[4].start.0, feb29_2016);
    }

    #[test]
    fn preference_bounds() {
        let cfg = Config::default();
        let mut store = PreferenceStore::new();
        let ok = pref(TimeInterval::new(0, 100), Recurrence::Once);
        assert!(store.add(ok.clone(), &cfg).is_ok());
        assert!(matches!(
            store.add(ok, &cfg),
            Err(PreferenceError::DuplicatePid(_))
        ));
        let mut long = pref(TimeInterval::new(0, cfg.t_max + 1), Recurrence::Once);
        long.pid = Pid::new("p2");
        assert!(matches!(
            store.add(long, &cfg),
            Err(PreferenceError::WindowTooLong { .. })
        ));
        let mut edge = pref(TimeInterval::new(0, cfg.t_max), Recurrence::Once);
        edge.pid = Pid::new("p3");
        assert!(store.add(edge, &cfg).is_ok());
        let mut far = pref(TimeInterval::new(0, 1), Recurrence::Once);
        far.pid = Pid::new("p4");
        far.distance = cfg.d_max + 1.0;
        assert!(matches!(
            store.add(far, &cfg),
            Err(PreferenceError::DistanceTooLarge { .. })
        ));
        let mut selfish = pref(TimeInterval::new(0, 1), Recurrence::Once);
        selfish.pid = Pid::new("p5");
        selfish.excluding.insert(uid("alice"));
        assert!(matches!(
            store.add(selfish, &cfg),
            Err(PreferenceError::OwnerInExcluding(_))
        ));
        assert_eq!(store.preferences_of(&uid("nobody")).count(), 0);
        assert_eq!(store.preferences_of(&uid("alice")).count(), 2);
    }

    #[test]
    fn store_rejects_duplicates_and_indexes() {
        let mut s = ResourceStore::new(100.0);
        s.insert(res("r1", "o", &["o", "f"])).unwrap();
        assert!(s.insert(res("r1", "o", &["o"])).is_err());
        let mut far = res("r2", "f", &["f"]);
        far.space = Disk::point(5000.0, 0.0);
        s.insert(far).unwrap();
        assert_eq!(s.tagging(&uid("f")).count(), 2);
        assert_eq!(s.centers_near(0.0, 0.0, 100.0).len(), 1);
        assert_eq!(s.sharing_any(&set(&["o"])).len(), 1);
    }

    #[test]
    fn resource_json_field_names() {
        let r = res("r1", "o", &["o"]);
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        let obj = v.as_object().unwrap();
        let keys: BTreeSet<_> = obj.keys().map(String::as_str).collect();
        assert_eq!(
            keys,
            ["content_b64", "owner", "rid", "space", "time", "users"]
                .into_iter()
                .collect()
        );
        assert_eq!(obj["content_b64"], "aGk=");
        assert_eq!(v["space"]["radius"], 0.0);
        let p = pref(TimeInterval::new(1, 2), Recurrence::Daily);
        let v = serde_json::to_value(&p).unwrap();
        assert_eq!(v["recurrence"], "daily");
        assert_eq!(v["window"]["start"], 1);
    }

    fn arb_resource() -> impl Strategy<Value = Resource> {
        (
            0u32..10_000,
            prop::collection::btree_set("[a-e]", 1..4),
            any::<i32>(),
            (-1e5..1e5f64, -1e5..1e5f64, 0.0..1e3f64),
            prop::collection::vec(any::<u8>(), 0..16),
        )
            .prop_map(|(n, users, t, (x, y, rad), content)| {
                let users: BTreeSet<UserId> = users.into_iter().map(UserId).collect();
                Resource {
                    rid: Rid(format!("r{n}")),
                    owner: users.iter().next().unwrap().clone(),
                    users,
                    time: TimeStamp(t as i64),
                    space: Disk::new(crate::geo::Point::new(x, y), rad),
                    content,
                }
            })
    }

    proptest! {
        #[test]
        fn occurrences_never_overlap(
            start in -1_000_000i64..1_000_000,
            len in 0i64..DAY,
            h0 in -2_000_000i64..2_000_000,
            hlen in 0i64..3_000_000,
            rec in prop::sample::select(vec![Recurrence::Daily, Recurrence::Weekly, Recurrence::Yearly]),
        ) {
            let p = pref(TimeInterval::new(start, start + len), rec);
            let occ = p.occurrences(&TimeInterval::new(h0, h0 + hlen));
            for w in &occ {
                prop_assert_eq!(w.length(), len);
                prop_assert!(w.intersects(&TimeInterval::new(h0, h0 + hlen)));
                prop_assert!(w.start >= p.window.start);
            }
            for pair in occ.windows(2) {
                prop_assert!(pair[0].end < pair[1].start);
            }
        }

        #[test]
        fn tagging_rule_matches_brute_force(
            users in prop::collection::btree_set(0usize..6, 1..6),
            edges in prop::collection::vec((0usize..6, 0usize..6), 0..12),
            owner in 0usize..6,
        ) {
            let name = |i: usize| UserId(format!("u{i}"));
            let mut g = SocialGraph::new();
            for i in 0..6 { g.add_user(name(i)).unwrap(); }
            for (a, b) in &edges { if a != b { g.add_friend(name(*a), name(*b)).unwrap(); } }
            let r = Resource {
                rid: Rid::new("r"),
                users: users.iter().map(|&i| name(i)).collect(),
                owner: name(owner),
                time: TimeStamp(0),
                space: Disk::point(0.0, 0.0),
                content: vec![],
            };
            let brute = users.contains(&owner) && users.iter().all(|&u| {
                u == owner || edges.iter().any(|&(a, b)| (a == owner && b == u) || (b == owner && a == u))
            });
            prop_assert_eq!(validate_resource(&r, &g).is_ok(), brute);
        }

        #[test]
        fn state_dump_round_trips(items in prop::collection::vec(arb_resource(), 0..20)) {
            let mut store = ResourceStore::new(1000.0);
            for r in items { let _ = store.insert(r); }
            let dump = StateDump::capture(&SocialGraph::new(), &PreferenceStore::new(), &store);
            let text = dump.to_json();
            let back: StateDump = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(&back, &dump);
            prop_assert_eq!(back.to_json(), text);
        }
    }
}
