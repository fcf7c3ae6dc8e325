//! The publication pipeline: tag validation, independence repair, direct
//! sanitization (user erasure), indirect sanitization over the co-location
//! graph (enlargement, falling back to erasure), and an optimistic commit.

use std::collections::{BTreeSet, HashMap};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};

use crate::geo::{dmax_disks, Config, Disk, TimeInterval, TimeStamp};
use crate::graph::{build_coloc_graph, CoLocationGraph};
use crate::model::{
    validate_resource, FriendEdge, Pid, PreferenceError, PreferenceStore, PrivacyPreference,
    Resource, ResourceStore, Rid, SocialError, SocialGraph, StateDump, TagViolation, UserId,
};
use crate::rules::{
    first_invalid_direct, first_invalid_indirect, independent, validity_reach, OverlapRule,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineOptions {
    pub config: Config,
    #[serde(default)]
    pub overlap: OverlapRule,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
}

fn default_retries() -> u32 {
    8
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self {
            config: Config::default(),
            overlap: OverlapRule::default(),
            max_retries: default_retries(),
        }
    }
}

/// A change applied to a submitted resource. Regions only grow about a fixed
/// center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Modification {
    UserErased {
        users: BTreeSet<UserId>,
        cause: Pid,
    },
    SpatialEnlarged {
        old: Disk,
        new: Disk,
        cause: Pid,
        /// The stored resource the enlargement was computed against.
        against: Rid,
    },
    IndependenceEnlarged {
        old: Disk,
        new: Disk,
        cause: Rid,
    },
    IndependenceErased {
        users: BTreeSet<UserId>,
        cause: Rid,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Denial {
    InvalidResource { violations: Vec<TagViolation> },
    DuplicateRid,
    IndependenceUnsatisfiable { cause: Rid },
    PrivacyUnsatisfiable { cause: Pid },
    ContentionExceeded,
}

impl Denial {
    pub fn name(&self) -> &'static str {
        match self {
            Denial::InvalidResource { .. } => "invalid_resource",
            Denial::DuplicateRid => "duplicate_rid",
            Denial::IndependenceUnsatisfiable { .. } => "independence_unsatisfiable",
            Denial::PrivacyUnsatisfiable { .. } => "privacy_unsatisfiable",
            Denial::ContentionExceeded => "contention_exceeded",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Published,
    Denied,
}

/// One line of the decision log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublicationDecision {
    pub rid: Rid,
    pub outcome: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resource: Option<Resource>,
    pub modifications: Vec<Modification>,
    pub retries: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub denied_reason: Option<Denial>,
}

impl PublicationDecision {
    pub fn is_published(&self) -> bool {
        self.outcome == Outcome::Published
    }

    /// Published exactly as submitted.
    pub fn is_verbatim(&self) -> bool {
        self.is_published() && self.modifications.is_empty()
    }
}

/// Time range whose preference windows can matter for a resource at `t`.
///
/// A pair can only be a co-location when its times differ by less than
/// `d_max / v_max`, and is only invalid for windows within half that again of
/// its later time; windows are at most `t_max` long.
pub fn query_horizon(t: TimeStamp, config: &Config) -> TimeInterval {
    let pad = config.t_max + 2 * validity_reach(config.d_max, config.v_max) + 1;
    TimeInterval {
        start: t.shifted(-pad),
        end: t.shifted(pad),
    }
}

/// Read-only view the pipeline runs against.
pub struct Context<'a> {
    pub store: &'a ResourceStore,
    pub prefs: &'a PreferenceStore,
    pub social: &'a SocialGraph,
    pub options: &'a EngineOptions,
}

/// Open or closed bound on a radius.
#[derive(Debug, Clone, Copy)]
struct Bound {
    value: f64,
    open: bool,
}

#[derive(Debug, Clone, Copy)]
struct RadiusRange {
    lo: Bound,
    hi: Bound,
}

impl RadiusRange {
    fn at_least(r: f64) -> Self {
        Self {
            lo: Bound {
                value: r,
                open: false,
            },
            hi: Bound {
                value: f64::INFINITY,
                open: true,
            },
        }
    }

    fn is_empty(&self) -> bool {
        if self.lo.value > self.hi.value {
            return true;
        }
        self.lo.value == self.hi.value && (self.lo.open || self.hi.open)
    }

    fn intersect(&self, other: &RadiusRange) -> RadiusRange {
        let lo = if other.lo.value > self.lo.value
            || (other.lo.value == self.lo.value && other.lo.open)
        {
            other.lo
        } else {
            self.lo
        };
        let hi = if other.hi.value < self.hi.value
            || (other.hi.value == self.hi.value && other.hi.open)
        {
            other.hi
        } else {
            self.hi
        };
        RadiusRange { lo, hi }
    }

    /// Smallest representable-enough radius in the range.
    fn pick(&self) -> f64 {
        if !self.lo.open {
            return self.lo.value;
        }
        let margin = 1e-6_f64.max(self.lo.value.abs() * 1e-12);
        let candidate = self.lo.value + margin;
        if candidate < self.hi.value {
            candidate
        } else {
            0.5 * (self.lo.value + self.hi.value)
        }
    }
}

/// Radii `R` for which a region at `r`'s center with radius `R` is mutually
/// reachable with `other`.
fn independence_range(r: &Resource, other: &Resource, config: &Config) -> RadiusRange {
    let d = crate::geo::dist_points(r.space.center(), other.space.center());
    let dt = r.time.abs_diff(other.time);
    if dt == 0 {
        let slack = config.epsilon - d;
        RadiusRange {
            lo: Bound {
                value: other.space.radius - slack,
                open: false,
            },
            hi: Bound {
                value: other.space.radius + slack,
                open: false,
            },
        }
    } else {
        let slack = config.v_max * dt as f64 - d;
        RadiusRange {
            lo: Bound {
                value: other.space.radius - slack,
                open: true,
            },
            hi: Bound {
                value: other.space.radius + slack,
                open: true,
            },
        }
    }
}

/// Grow `r` minimally so that it is independent of every stored resource it
/// shares users with. Conflicts that growth cannot resolve are broken by
/// erasing the shared users; conflicts over the owner deny the resource.
pub fn enforce_independence(
    mut r: Resource,
    store: &ResourceStore,
    config: &Config,
) -> Result<(Resource, Vec<Modification>), Denial> {
    let mut mods = Vec::new();
    let original = r.space;
    loop {
        let sharing = store.sharing_any(&r.users);
        let (must, optional): (Vec<&Resource>, Vec<&Resource>) =
            sharing.iter().partition(|s| s.tags(&r.owner));
        let mut feasible = RadiusRange::at_least(original.radius);
        let mut binding: Option<&Resource> = None;
        for s in &must {
            let next = feasible.intersect(&independence_range(&r, s, config));
            if next.is_empty() {
                return Err(Denial::IndependenceUnsatisfiable {
                    cause: s.rid.clone(),
                });
            }
            if next.lo.value > feasible.lo.value {
                binding = Some(s);
            }
            feasible = next;
        }
        let mut conflicts = Vec::new();
        for s in &optional {
            let next = feasible.intersect(&independence_range(&r, s, config));
            if next.is_empty() {
                conflicts.push(*s);
                continue;
            }
            if next.lo.value > feasible.lo.value {
                binding = Some(s);
            }
            feasible = next;
        }
        if conflicts.is_empty() {
            let radius = feasible.pick();
            let candidate = Resource {
                space: original.with_radius(radius),
                ..r.clone()
            };
            let broken: Vec<&Resource> = sharing
                .iter()
                .copied()
                .filter(|s| !independent(&candidate, s, config.v_max, config.epsilon))
                .collect();
            if broken.is_empty() {
                if radius != original.radius {
                    mods.push(Modification::IndependenceEnlarged {
                        old: original,
                        new: candidate.space,
                        cause: binding
                            .map(|b| b.rid.clone())
                            .unwrap_or_else(|| sharing[0].rid.clone()),
                    });
                }
                return Ok((candidate, mods));
            }
            // rounding at an interval edge; treat like a conflict
            conflicts = broken;
        }
        for s in conflicts {
            if s.tags(&r.owner) {
                return Err(Denial::IndependenceUnsatisfiable {
                    cause: s.rid.clone(),
                });
            }
            let shared: BTreeSet<UserId> = r.users.intersection(&s.users).cloned().collect();
            if shared.is_empty() {
                continue;
            }
            r.users.retain(|u| !shared.contains(u));
            mods.push(Modification::IndependenceErased {
                users: shared,
                cause: s.rid.clone(),
            });
        }
    }
}

/// Occurrence windows per preference, computed once per pipeline run.
struct Occurrences {
    horizon: TimeInterval,
    cache: HashMap<Pid, Vec<TimeInterval>>,
}

impl Occurrences {
    fn new(horizon: TimeInterval) -> Self {
        Self {
            horizon,
            cache: HashMap::new(),
        }
    }

    fn of(&mut self, phi: &PrivacyPreference) -> &[TimeInterval] {
        let horizon = self.horizon;
        self.cache
            .entry(phi.pid.clone())
            .or_insert_with(|| phi.occurrences(&horizon))
    }
}

/// Erase users until `r` is no invalid direct co-location for anyone tagged.
///
/// The excluding set of the violated preference is erased. When that set
/// contains the resource owner (a tagged friend's preference targets the
/// owner), the protected friend is erased instead.
pub fn sanitize_direct(
    mut r: Resource,
    prefs: &PreferenceStore,
    v_max: f64,
    horizon: TimeInterval,
) -> (Resource, Vec<Modification>) {
    let mut occurrences = Occurrences::new(horizon);
    let mut mods = Vec::new();
    loop {
        let mut changed = false;
        let users: Vec<UserId> = r.users.iter().cloned().collect();
        for u in &users {
            for phi in prefs.preferences_of(u) {
                if !r.users.contains(u) {
                    break;
                }
                let occ = occurrences.of(phi);
                if first_invalid_direct(&r, u, phi, occ, v_max).is_none() {
                    continue;
                }
                let erased: BTreeSet<UserId> = if phi.excluding.contains(&r.owner) {
                    [u.clone()].into_iter().collect()
                } else {
                    r.users.intersection(&phi.excluding).cloned().collect()
                };
                r.users.retain(|x| !erased.contains(x));
                mods.push(Modification::UserErased {
                    users: erased,
                    cause: phi.pid.clone(),
                });
                changed = true;
            }
        }
        if !changed {
            return (r, mods);
        }
    }
}

/// Region around `r_space`'s center stretched until its worst-case distance
/// to `other_space` reaches `distance`, provided the resulting resource stays
/// independent of the store. `None` means enlargement is not an option.
pub fn enlargement(
    r_space: &Disk,
    other_space: &Disk,
    distance: f64,
    r_meta: &Resource,
    store: &ResourceStore,
    config: &Config,
) -> Option<Disk> {
    let spread = dmax_disks(r_space, other_space);
    if spread >= distance {
        return Some(*r_space);
    }
    let mut radius = r_space.radius + (distance - spread);
    while dmax_disks(&r_space.with_radius(radius), other_space) < distance {
        radius = radius.next_up();
    }
    let grown = r_space.with_radius(radius);
    let candidate = Resource {
        space: grown,
        ..r_meta.clone()
    };
    store
        .sharing_any(&candidate.users)
        .into_iter()
        .all(|s| independent(&candidate, s, config.v_max, config.epsilon))
        .then_some(grown)
}

fn invalid_pair_occurrence(
    r: &Resource,
    other: &Resource,
    u: &UserId,
    phi: &PrivacyPreference,
    occ: &[TimeInterval],
    options: &EngineOptions,
) -> bool {
    let v = options.config.v_max;
    first_invalid_indirect(r, other, u, phi, occ, v, options.overlap).is_some()
        || first_invalid_indirect(other, r, u, phi, occ, v, options.overlap).is_some()
}

/// Remove every invalid indirect co-location between `r` and its graph
/// neighbors.
pub fn sanitize_indirect(
    mut r: Resource,
    graph: &CoLocationGraph,
    ctx: &Context<'_>,
    horizon: TimeInterval,
) -> Result<(Resource, Vec<Modification>), Denial> {
    let config = &ctx.options.config;
    let mut occurrences = Occurrences::new(horizon);
    let mut mods = Vec::new();
    for rid in graph.neighbors() {
        let Some(other) = ctx.store.get(rid) else {
            continue;
        };
        let users: BTreeSet<UserId> = r.users.union(&other.users).cloned().collect();
        for u in &users {
            for phi in ctx.prefs.preferences_of(u) {
                let occ = occurrences.of(phi);
                if !invalid_pair_occurrence(&r, other, u, phi, occ, ctx.options) {
                    continue;
                }
                match enlargement(&r.space, &other.space, phi.distance, &r, ctx.store, config) {
                    Some(grown) => {
                        mods.push(Modification::SpatialEnlarged {
                            old: r.space,
                            new: grown,
                            cause: phi.pid.clone(),
                            against: other.rid.clone(),
                        });
                        r.space = grown;
                    }
                    None => {
                        let keep: BTreeSet<UserId> = r
                            .users
                            .iter()
                            .filter(|x| *x != u && !phi.excluding.contains(*x))
                            .cloned()
                            .collect();
                        if !keep.contains(&r.owner) {
                            return Err(Denial::PrivacyUnsatisfiable {
                                cause: phi.pid.clone(),
                            });
                        }
                        let erased: BTreeSet<UserId> =
                            r.users.difference(&keep).cloned().collect();
                        r.users = keep;
                        mods.push(Modification::UserErased {
                            users: erased,
                            cause: phi.pid.clone(),
                        });
                    }
                }
                debug_assert!(!invalid_pair_occurrence(
                    &r,
                    other,
                    u,
                    phi,
                    occurrences.of(phi),
                    ctx.options
                ));
            }
        }
    }
    Ok((r, mods))
}

/// Result of running the pipeline against a snapshot.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub submitted: Resource,
    pub result: Result<(Resource, Vec<Modification>), Denial>,
    /// The graph the indirect pass iterated, if it ran.
    pub graph: Option<(Resource, CoLocationGraph)>,
    snapshot_len: usize,
    prefs_version: u64,
}

/// The whole sanitization pipeline against one consistent view.
pub fn run_pipeline(r: &Resource, ctx: &Context<'_>) -> Prepared {
    let mut graph = None;
    let result = pipeline(r, ctx, &mut graph);
    Prepared {
        submitted: r.clone(),
        result,
        graph,
        snapshot_len: ctx.store.len(),
        prefs_version: 0,
    }
}

fn pipeline(
    r: &Resource,
    ctx: &Context<'_>,
    graph_out: &mut Option<(Resource, CoLocationGraph)>,
) -> Result<(Resource, Vec<Modification>), Denial> {
    let config = &ctx.options.config;
    if ctx.store.contains(&r.rid) {
        return Err(Denial::DuplicateRid);
    }
    if !r.space.is_valid() {
        return Err(Denial::InvalidResource { violations: vec![] });
    }
    validate_resource(r, ctx.social).map_err(|violations| Denial::InvalidResource { violations })?;
    let (r, mut mods) = enforce_independence(r.clone(), ctx.store, config)?;
    let horizon = query_horizon(r.time, config);
    let (r, direct_mods) = sanitize_direct(r, ctx.prefs, config.v_max, horizon);
    mods.extend(direct_mods);
    let graph = build_coloc_graph(&r, ctx.store, config.d_max);
    let outcome = sanitize_indirect(r.clone(), &graph, ctx, horizon);
    *graph_out = Some((r, graph));
    let (r, indirect_mods) = outcome?;
    mods.extend(indirect_mods);
    Ok((r, mods))
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Social(#[from] SocialError),
    #[error(transparent)]
    Preference(#[from] PreferenceError),
    #[error("preference owner {0} is not a registered user")]
    UnknownOwner(UserId),
    #[error("state dump is inconsistent: {0}")]
    BadDump(String),
}

#[derive(Debug, Clone)]
struct State {
    social: Arc<SocialGraph>,
    prefs: Arc<PreferenceStore>,
    store: Arc<ResourceStore>,
    prefs_version: u64,
}

/// Shared engine state. Pipelines run on snapshots; commits are serialized.
#[derive(Debug)]
pub struct Engine {
    options: EngineOptions,
    state: RwLock<State>,
    commit: Mutex<()>,
}

/// Outcome of a commit attempt.
#[derive(Debug)]
#[allow(clippy::large_enum_variant)]
pub enum Commit {
    Done(PublicationDecision),
    /// The store changed under the snapshot in a way that could alter the
    /// result; the pipeline must run again.
    Stale,
}

impl Engine {
    pub fn new(options: EngineOptions) -> Self {
        Self {
            state: RwLock::new(State {
                social: Arc::new(SocialGraph::new()),
                prefs: Arc::new(PreferenceStore::new()),
                store: Arc::new(ResourceStore::new(options.config.d_max)),
                prefs_version: 0,
            }),
            options,
            commit: Mutex::new(()),
        }
    }

    /// Rebuild an engine from a dump; stored resources are trusted as-is.
    pub fn from_dump(options: EngineOptions, dump: &StateDump) -> Result<Self, EngineError> {
        let engine = Self::new(options);
        for u in &dump.users {
            engine.add_user(u.clone())?;
        }
        for FriendEdge { a, b } in &dump.friends {
            engine.add_friend(a.clone(), b.clone())?;
        }
        for p in &dump.preferences {
            engine.add_preference(p.clone())?;
        }
        {
            let mut state = engine.state.write().expect("engine lock");
            let store = Arc::make_mut(&mut state.store);
            for r in &dump.resources {
                store
                    .insert(r.clone())
                    .map_err(|e| EngineError::BadDump(e.to_string()))?;
            }
        }
        Ok(engine)
    }

    pub fn options(&self) -> &EngineOptions {
        &self.options
    }

    pub fn add_user(&self, u: UserId) -> Result<bool, EngineError> {
        let _guard = self.commit.lock().expect("commit lock");
        let mut state = self.state.write().expect("engine lock");
        Ok(Arc::make_mut(&mut state.social).add_user(u)?)
    }

    pub fn add_friend(&self, a: UserId, b: UserId) -> Result<bool, EngineError> {
        let _guard = self.commit.lock().expect("commit lock");
        let mut state = self.state.write().expect("engine lock");
        Ok(Arc::make_mut(&mut state.social).add_friend(a, b)?)
    }

    pub fn add_preference(&self, p: PrivacyPreference) -> Result<(), EngineError> {
        let _guard = self.commit.lock().expect("commit lock");
        let mut state = self.state.write().expect("engine lock");
        if !state.social.has_user(&p.owner) {
            return Err(EngineError::UnknownOwner(p.owner));
        }
        Arc::make_mut(&mut state.prefs).add(p, &self.options.config)?;
        state.prefs_version += 1;
        Ok(())
    }

    pub fn store(&self) -> Arc<ResourceStore> {
        self.state.read().expect("engine lock").store.clone()
    }

    pub fn preferences(&self) -> Arc<PreferenceStore> {
        self.state.read().expect("engine lock").prefs.clone()
    }

    pub fn social(&self) -> Arc<SocialGraph> {
        self.state.read().expect("engine lock").social.clone()
    }

    pub fn dump(&self) -> StateDump {
        let state = self.state.read().expect("engine lock");
        StateDump::capture(&state.social, &state.prefs, &state.store)
    }

    fn snapshot(&self) -> State {
        self.state.read().expect("engine lock").clone()
    }

    /// Co-location graph a candidate would see right now.
    pub fn graph_for(&self, r: &Resource) -> CoLocationGraph {
        build_coloc_graph(r, &self.snapshot().store, self.options.config.d_max)
    }

    /// Run the pipeline against the current snapshot without committing.
    pub fn prepare(&self, r: &Resource) -> Prepared {
        let snap = self.snapshot();
        let ctx = Context {
            store: &snap.store,
            prefs: &snap.prefs,
            social: &snap.social,
            options: &self.options,
        };
        let mut prepared = run_pipeline(r, &ctx);
        prepared.prefs_version = snap.prefs_version;
        prepared
    }

    /// Commit section: re-check the neighborhood against the live store and
    /// append on match.
    pub fn try_commit(&self, prepared: &Prepared, retries: u32) -> Commit {
        let _guard = self.commit.lock().expect("commit lock");
        if !self.still_current(prepared) {
            return Commit::Stale;
        }
        let decision = match &prepared.result {
            Ok((resource, mods)) => {
                let mut state = self.state.write().expect("engine lock");
                if Arc::make_mut(&mut state.store).insert(resource.clone()).is_err() {
                    return Commit::Stale;
                }
                PublicationDecision {
                    rid: resource.rid.clone(),
                    outcome: Outcome::Published,
                    resource: Some(resource.clone()),
                    modifications: mods.clone(),
                    retries,
                    denied_reason: None,
                }
            }
            Err(denial) => PublicationDecision {
                rid: prepared.submitted.rid.clone(),
                outcome: Outcome::Denied,
                resource: None,
                modifications: Vec::new(),
                retries,
                denied_reason: Some(denial.clone()),
            },
        };
        Commit::Done(decision)
    }

    fn still_current(&self, prepared: &Prepared) -> bool {
        let state = self.state.read().expect("engine lock");
        if state.prefs_version != prepared.prefs_version {
            return false;
        }
        if state.store.len() == prepared.snapshot_len {
            return true;
        }
        let submitted = &prepared.submitted;
        let touched = state.store.iter_from(prepared.snapshot_len).any(|s| {
            s.rid == submitted.rid || s.shares_users_with(submitted)
        });
        if touched {
            return false;
        }
        match &prepared.graph {
            Some((r, before)) => {
                let now = build_coloc_graph(r, &state.store, self.options.config.d_max);
                now.same_as(before, self.options.config.epsilon)
            }
            None => true,
        }
    }

    /// Sanitize and publish, retrying when concurrent commits invalidate the
    /// snapshot.
    pub fn publish(&self, r: &Resource) -> PublicationDecision {
        for attempt in 0..=self.options.max_retries {
            let prepared = self.prepare(r);
            if let Commit::Done(decision) = self.try_commit(&prepared, attempt) {
                return decision;
            }
        }
        PublicationDecision {
            rid: r.rid.clone(),
            outcome: Outcome::Denied,
            resource: None,
            modifications: Vec::new(),
            retries: self.options.max_retries + 1,
            denied_reason: Some(Denial::ContentionExceeded),
        }
    }
}

impl Clone for Engine {
    fn clone(&self) -> Self {
        Self {
            options: self.options,
            state: RwLock::new(self.snapshot()),
            commit: Mutex::new(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::Point;
    use crate::model::Recurrence;

    fn uid(s: &str) -> UserId {
        UserId::new(s)
    }

    fn res(rid: &str, owner: &str, users: &[&str], t: i64, space: Disk) -> Resource {
        Resource {
            rid: Rid::new(rid),
            users: users.iter().map(|s| uid(s)).collect(),
            owner: uid(owner),
            time: TimeStamp(t),
            space,
            content: vec![],
        }
    }

    fn pref(pid: &str, owner: &str, excl: &[&str], adv: &[&str], w: (i64, i64), d: f64) -> PrivacyPreference {
        PrivacyPreference {
            pid: Pid::new(pid),
            owner: uid(owner),
            excluding: excl.iter().map(|s| uid(s)).collect(),
            adversaries: adv.iter().map(|s| uid(s)).collect(),
            window: TimeInterval::new(w.0, w.1),
            distance: d,
            recurrence: Recurrence::Once,
        }
    }

    fn cfg() -> Config {
        Config::default()
    }

    fn engine_with(users: &[&str], friends: &[(&str, &str)]) -> Engine {
        let e = Engine::new(EngineOptions::default());
        for u in users {
            e.add_user(uid(u)).unwrap();
        }
        for (a, b) in friends {
            e.add_friend(uid(a), uid(b)).unwrap();
        }
        e
    }

    #[test]
    fn independence_untouched_without_sharing() {
        let mut store = ResourceStore::new(1000.0);
        store.insert(res("s", "x", &["x"], 0, Disk::point(5.0, 0.0))).unwrap();
        let r = res("r", "o", &["o"], 10, Disk::point(0.0, 0.0));
        let (out, mods) = enforce_independence(r.clone(), &store, &cfg()).unwrap();
        assert_eq!(out, r);
        assert!(mods.is_empty());
    }

    #[test]
    fn independence_untouched_when_reachable() {
        let mut store = ResourceStore::new(1000.0);
        store.insert(res("s", "o", &["o"], 0, Disk::point(5.0, 0.0))).unwrap();
        let r = res("r", "o", &["o"], 10, Disk::point(0.0, 0.0));
        let (out, mods) = enforce_independence(r.clone(), &store, &cfg()).unwrap();
        assert_eq!(out, r);
        assert!(mods.is_empty());
    }

    #[test]
    fn independence_grows_a_too_precise_region() {
        // earlier wide region, later exact point: the wide region is not
        // reachable from the point, so the point must grow
        let mut store = ResourceStore::new(1000.0);
        store
            .insert(res("s", "o", &["o"], 0, Disk::new(Point::new(0.0, 0.0), 100.0)))
            .unwrap();
        let r = res("r", "o", &["o"], 60, Disk::point(30.0, 0.0));
        let (out, mods) = enforce_independence(r, &store, &cfg()).unwrap();
        assert!(independent(&out, store.get(&Rid::new("s")).unwrap(), 1.5, 1e-9));
        // need 30 + 100 - R < 90, so R just above 40
        assert!(out.space.radius > 40.0 && out.space.radius < 40.001);
        assert!(matches!(mods[0], Modification::IndependenceEnlarged { .. }));
    }

    #[test]
    fn independence_erases_friend_or_denies_owner() {
        let mut store = ResourceStore::new(1000.0);
        // friend f was 500 m away a minute ago: unreachable
        store.insert(res("s", "f", &["f"], 0, Disk::point(500.0, 0.0))).unwrap();
        let r = res("r", "o", &["o", "f"], 60, Disk::point(0.0, 0.0));
        let (out, mods) = enforce_independence(r, &store, &cfg()).unwrap();
        assert_eq!(out.users, [uid("o")].into_iter().collect());
        assert!(matches!(mods[0], Modification::IndependenceErased { .. }));
        let r = res("r", "f", &["f"], 60, Disk::point(0.0, 0.0));
        assert!(matches!(
            enforce_independence(r, &store, &cfg()),
            Err(Denial::IndependenceUnsatisfiable { .. })
        ));
    }

    #[test]
    fn direct_sanitization_erases_excluded() {
        let mut prefs = PreferenceStore::new();
        prefs.add(pref("p", "o", &["b"], &[], (0, 100), 50.0), &cfg()).unwrap();
        let r = res("r", "o", &["o", "b"], 50, Disk::point(0.0, 0.0));
        let (out, mods) = sanitize_direct(r, &prefs, 1.5, query_horizon(TimeStamp(50), &cfg()));
        assert_eq!(out.users, [uid("o")].into_iter().collect());
        assert_eq!(mods.len(), 1);
    }

    #[test]
    fn direct_sanitization_leaves_valid_and_unprotected() {
        let prefs = PreferenceStore::new();
        let r = res("r", "o", &["o", "b"], 50, Disk::point(0.0, 0.0));
        let h = query_horizon(TimeStamp(50), &cfg());
        let (out, mods) = sanitize_direct(r.clone(), &prefs, 1.5, h);
        assert_eq!(out, r);
        assert!(mods.is_empty());
        let mut prefs = PreferenceStore::new();
        prefs
            .add(pref("p", "o", &["b"], &[], (10_000, 10_100), 50.0), &cfg())
            .unwrap();
        let (out, mods) = sanitize_direct(r.clone(), &prefs, 1.5, h);
        assert_eq!(out, r);
        assert!(mods.is_empty());
    }

    #[test]
    fn direct_sanitization_guards_the_owner() {
        // friend b protects themselves from the owner: b is dropped
        let mut prefs = PreferenceStore::new();
        prefs.add(pref("p", "b", &["o"], &[], (0, 100), 50.0), &cfg()).unwrap();
        let r = res("r", "o", &["o", "b"], 50, Disk::point(0.0, 0.0));
        let (out, _) = sanitize_direct(r, &prefs, 1.5, query_horizon(TimeStamp(50), &cfg()));
        assert_eq!(out.users, [uid("o")].into_iter().collect());
    }

    #[test]
    fn enlargement_examples() {
        let store = ResourceStore::new(1000.0);
        let meta = res("r", "o", &["o"], 0, Disk::point(0.0, 0.0));
        let grown = enlargement(&Disk::point(0.0, 0.0), &Disk::point(10.0, 0.0), 50.0, &meta, &store, &cfg()).unwrap();
        assert_eq!(grown.center(), Point::new(0.0, 0.0));
        assert!((grown.radius - 40.0).abs() < 1e-9);
        assert!(dmax_disks(&grown, &Disk::point(10.0, 0.0)) >= 50.0);
        let same = enlargement(&Disk::point(0.0, 0.0), &Disk::point(60.0, 0.0), 50.0, &meta, &store, &cfg()).unwrap();
        assert_eq!(same, Disk::point(0.0, 0.0));
        // the owner was pinned 10 s ago right here: a 40 m region is not
        // reachable from that point in 10 s at 1.5 m/s
        let mut store = ResourceStore::new(1000.0);
        store.insert(res("prev", "o", &["o"], -10, Disk::point(0.0, 0.0))).unwrap();
        assert!(enlargement(&Disk::point(0.0, 0.0), &Disk::point(10.0, 0.0), 50.0, &meta, &store, &cfg()).is_none());
    }

    #[test]
    fn first_publication_is_verbatim() {
        let e = engine_with(&["o"], &[]);
        let r = res("r", "o", &["o"], 0, Disk::point(0.0, 0.0));
        let d = e.publish(&r);
        assert!(d.is_verbatim());
        assert_eq!(d.retries, 0);
        assert_eq!(d.resource.as_ref(), Some(&r));
    }

    #[test]
    fn duplicate_and_invalid_are_denied() {
        let e = engine_with(&["o", "s"], &[]);
        let r = res("r", "o", &["o"], 0, Disk::point(0.0, 0.0));
        assert!(e.publish(&r).is_published());
        assert_eq!(e.publish(&r).denied_reason, Some(Denial::DuplicateRid));
        let bad = res("q", "o", &["o", "s"], 0, Disk::point(0.0, 0.0));
        assert!(matches!(
            e.publish(&bad).denied_reason,
            Some(Denial::InvalidResource { .. })
        ));
    }

    #[test]
    fn indirect_enlarges_second_post() {
        let e = engine_with(&["c", "b", "j", "a"], &[("c", "b"), ("j", "a")]);
        e.add_preference(pref("pa", "a", &["b"], &[], (0, 1000), 50.0)).unwrap();
        let first = res("r1", "c", &["c", "b"], 100, Disk::point(0.0, 0.0));
        assert!(e.publish(&first).is_verbatim());
        let second = res("r2", "j", &["j", "a"], 110, Disk::point(0.0, 0.0));
        let d = e.publish(&second);
        assert!(d.is_published());
        let Modification::SpatialEnlarged { new, .. } = &d.modifications[0] else {
            panic!("expected enlargement, got {:?}", d.modifications);
        };
        assert!((dmax_disks(new, &first.space) - 50.0).abs() <= 1e-9);
    }

    #[test]
    fn indirect_falls_back_to_erasure_then_denial() {
        let base = engine_with(&["c", "b", "j", "a"], &[("c", "b"), ("j", "a")]);
        base.add_preference(pref("pa", "a", &["b"], &[], (0, 1000), 50.0)).unwrap();
        // a pinned at 105 and b pinned at 106 at the same spot, stored as-is
        let mut dump = base.dump();
        dump.resources = vec![
            res("r0", "j", &["j", "a"], 105, Disk::point(0.0, 0.0)),
            res("r1", "c", &["c", "b"], 106, Disk::point(0.0, 0.0)),
        ];
        let e = Engine::from_dump(EngineOptions::default(), &dump).unwrap();
        // enlarging r2 to 50 m would make it unreachable from r0
        let d = e.publish(&res("r2", "j", &["j", "a"], 110, Disk::point(0.0, 0.0)));
        assert!(d.is_published(), "{d:?}");
        assert_eq!(d.resource.unwrap().users, [uid("j")].into_iter().collect());
        // when the protected user owns the post there is nobody left to keep
        let d = e.publish(&res("r3", "a", &["a"], 111, Disk::point(0.0, 0.0)));
        assert_eq!(
            d.denied_reason,
            Some(Denial::PrivacyUnsatisfiable { cause: Pid::new("pa") })
        );
    }

    #[test]
    fn stale_snapshot_is_detected() {
        let e = engine_with(&["a", "b"], &[]);
        let ra = res("ra", "a", &["a"], 0, Disk::point(0.0, 0.0));
        let rb = res("rb", "b", &["b"], 0, Disk::point(5.0, 0.0));
        let pa = e.prepare(&ra);
        let pb = e.prepare(&rb);
        assert!(matches!(e.try_commit(&pa, 0), Commit::Done(_)));
        // rb's neighborhood changed
        assert!(matches!(e.try_commit(&pb, 0), Commit::Stale));
        let far = res("rc", "b", &["b"], 0, Disk::point(1e6, 0.0));
        let pc = e.prepare(&far);
        assert!(e.publish(&res("rd", "a", &["a"], 1, Disk::point(0.0, 0.0))).is_published());
        // far away and sharing nobody: commit goes through
        assert!(matches!(e.try_commit(&pc, 0), Commit::Done(_)));
    }

    #[test]
    fn dump_round_trip_rebuilds_engine() {
        let e = engine_with(&["a", "b"], &[("a", "b")]);
        e.add_preference(pref("p", "a", &["b"], &[], (0, 10), 5.0)).unwrap();
        e.publish(&res("r", "a", &["a", "b"], 100, Disk::point(1.0, 2.0)));
        let dump = e.dump();
        let back = Engine::from_dump(EngineOptions::default(), &dump).unwrap();
        assert_eq!(back.dump().to_json(), dump.to_json());
    }
}
