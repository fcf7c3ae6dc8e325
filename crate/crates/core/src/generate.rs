//! Seeded synthetic workloads.
//!
//! Users walk between a handful of venues at no more than 90% of `v_max`.
//! Every publish is a check-in by one user at its true position, tagging the
//! friends that happen to be inside the published region.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geo::{dist_points, Config, Disk, Point, TimeInterval, TimeStamp};
use crate::model::{Pid, PrivacyPreference, Recurrence, Resource, Rid, UserId};
use crate::trace::{Op, TraceCommand};

/// First publish time of every generated trace.
pub const EPOCH: i64 = 1_700_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerateParams {
    pub seed: u64,
    pub n_users: usize,
    pub n_resources: usize,
    pub n_prefs: usize,
    /// Side of the square study area, kilometers.
    pub area_km: f64,
}

impl Default for GenerateParams {
    fn default() -> Self {
        Self {
            seed: 0,
            n_users: 20,
            n_resources: 200,
            n_prefs: 50,
            area_km: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruePosition {
    pub user: UserId,
    pub t: TimeStamp,
    pub at: Point,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Workload {
    pub commands: Vec<TraceCommand>,
    /// Positions of every user at every publish instant.
    pub truth: Vec<TruePosition>,
}

struct Walker {
    at: Point,
    target: Point,
    speed: f64,
}

fn random_point(rng: &mut ChaCha8Rng, side: f64) -> Point {
    Point::new(rng.gen_range(0.0..side), rng.gen_range(0.0..side))
}

pub fn generate(params: &GenerateParams, config: &Config) -> Workload {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let side = (params.area_km * 1000.0).max(1.0);
    let users: Vec<UserId> = (0..params.n_users).map(|i| UserId::new(format!("u{i:02}"))).collect();
    let mut commands = Vec::new();
    let mut seq = 0u64;
    let mut push = |commands: &mut Vec<TraceCommand>, op: Op| {
        seq += 1;
        commands.push(TraceCommand { seq, op });
    };
    for u in &users {
        push(&mut commands, Op::AddUser { user: u.clone() });
    }

    let n = users.len();
    let mut friends: Vec<Vec<usize>> = vec![Vec::new(); n];
    let p_edge = if n > 1 { (4.0 / (n - 1) as f64).min(1.0) } else { 0.0 };
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(p_edge) {
                friends[i].push(j);
                friends[j].push(i);
                push(
                    &mut commands,
                    Op::AddFriend {
                        a: users[i].clone(),
                        b: users[j].clone(),
                    },
                );
            }
        }
    }

    let venues: Vec<Point> = (0..(n / 2).max(5)).map(|_| random_point(&mut rng, side)).collect();
    let mut walkers: Vec<Walker> = (0..n)
        .map(|_| Walker {
            at: *venues.choose(&mut rng).expect("venues"),
            target: *venues.choose(&mut rng).expect("venues"),
            speed: rng.gen_range(0.2..0.9) * config.v_max,
        })
        .collect();

    // publish instants first, so preference windows can be placed over them
    let mut times = Vec::with_capacity(params.n_resources);
    let mut t = EPOCH;
    for k in 0..params.n_resources {
        if k > 0 {
            t += rng.gen_range(1..=120);
        }
        times.push(t);
    }
    let span_end = times.last().copied().unwrap_or(EPOCH);

    if n >= 2 {
        for k in 0..params.n_prefs {
            let owner = rng.gen_range(0..n);
            let pool: Vec<usize> = if friends[owner].is_empty() {
                (0..n).filter(|&j| j != owner).collect()
            } else {
                friends[owner].clone()
            };
            let n_ex = rng.gen_range(1..=3).min(pool.len());
            let excluding: Vec<usize> = pool.choose_multiple(&mut rng, n_ex).copied().collect();
            let mut adversaries = Vec::new();
            if rng.gen_bool(0.3) {
                let rest: Vec<usize> = (0..n).filter(|j| *j != owner && !excluding.contains(j)).collect();
                if let Some(a) = rest.choose(&mut rng) {
                    adversaries.push(*a);
                }
            }
            let recurrence = match rng.gen_range(0..10) {
                0..=4 => Recurrence::Once,
                5..=6 => Recurrence::Daily,
                7..=8 => Recurrence::Weekly,
                _ => Recurrence::Yearly,
            };
            let len = rng.gen_range(600..=14_400).min(config.t_max);
            // recurring windows may start days earlier and repeat into the span
            let back: i64 = match recurrence {
                Recurrence::Once => 3_600,
                Recurrence::Daily => 3 * 86_400,
                Recurrence::Weekly | Recurrence::Yearly => 0,
            };
            let start = rng.gen_range(EPOCH - back - len..=span_end);
            let distance = rng.gen_range(20.0..=500.0f64).min(config.d_max);
            let name = |ix: &[usize]| ix.iter().map(|&j| users[j].clone()).collect();
            push(
                &mut commands,
                Op::AddPref(PrivacyPreference {
                    pid: Pid::new(format!("p{k:03}")),
                    owner: users[owner].clone(),
                    excluding: name(&excluding),
                    adversaries: name(&adversaries),
                    window: TimeInterval::new(start, start + len),
                    distance,
                    recurrence,
                }),
            );
        }
    }

    let mut truth = Vec::new();
    let mut last = EPOCH;
    for (k, &t) in times.iter().enumerate() {
        let dt = (t - last) as f64;
        last = t;
        for w in walkers.iter_mut() {
            let mut budget = w.speed * dt;
            while budget > 0.0 {
                let left = dist_points(w.at, w.target);
                if left <= budget {
                    w.at = w.target;
                    budget -= left;
                    w.target = *venues.choose(&mut rng).expect("venues");
                    if w.target == w.at {
                        break;
                    }
                } else {
                    let f = budget / left;
                    w.at = Point::new(w.at.x + f * (w.target.x - w.at.x), w.at.y + f * (w.target.y - w.at.y));
                    budget = 0.0;
                }
            }
        }
        for (i, w) in walkers.iter().enumerate() {
            truth.push(TruePosition {
                user: users[i].clone(),
                t: TimeStamp(t),
                at: w.at,
            });
        }
        if n == 0 {
            continue;
        }
        let owner = rng.gen_range(0..n);
        let radius = if rng.gen_bool(0.2) {
            0.0
        } else {
            rng.gen_range(5.0..200.0f64).min(config.d_max / 4.0)
        };
        let jitter = rng.gen_range(0.0..=radius);
        let angle = rng.gen_range(0.0..std::f64::consts::TAU);
        let own = walkers[owner].at;
        let center = Point::new(own.x + jitter * angle.cos(), own.y + jitter * angle.sin());
        let space = Disk::new(center, radius);
        let mut tagged = vec![users[owner].clone()];
        for &f in &friends[owner] {
            if space.contains_point(walkers[f].at, 1e-9) && rng.gen_bool(0.7) {
                tagged.push(users[f].clone());
            }
        }
        push(
            &mut commands,
            Op::Publish(Resource {
                rid: Rid::new(format!("r{k:04}")),
                users: tagged.into_iter().collect(),
                owner: users[owner].clone(),
                time: TimeStamp(t),
                space,
                content: format!("check-in {k}").into_bytes(),
            }),
        );
    }
    Workload { commands, truth }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::write_trace;
    use std::collections::BTreeMap;

    #[test]
    fn same_seed_same_bytes() {
        let p = GenerateParams { seed: 7, ..Default::default() };
        let a = write_trace(&generate(&p, &Config::default()).commands);
        let b = write_trace(&generate(&p, &Config::default()).commands);
        assert_eq!(a, b);
        let c = write_trace(&generate(&GenerateParams { seed: 8, ..p }, &Config::default()).commands);
        assert_ne!(a, c);
    }

    #[test]
    fn no_resources_no_publishes() {
        let p = GenerateParams { n_resources: 0, ..Default::default() };
        let w = generate(&p, &Config::default());
        assert!(!w.commands.iter().any(|c| matches!(c.op, Op::Publish(_))));
    }

    #[test]
    fn trajectories_respect_speed_limit() {
        let cfg = Config::default();
        for seed in 0..5 {
            let w = generate(&GenerateParams { seed, ..Default::default() }, &cfg);
            let mut last: BTreeMap<&UserId, &TruePosition> = BTreeMap::new();
            for p in &w.truth {
                if let Some(prev) = last.insert(&p.user, p) {
                    let dt = (p.t.0 - prev.t.0) as f64;
                    assert!(dist_points(prev.at, p.at) <= cfg.v_max * dt + 1e-9);
                }
            }
        }
    }

    #[test]
    fn tags_are_honest_and_prefs_are_admissible() {
        let cfg = Config::default();
        let w = generate(&GenerateParams { seed: 3, ..Default::default() }, &cfg);
        let mut prefs = crate::model::PreferenceStore::new();
        for c in &w.commands {
            match &c.op {
                Op::AddPref(p) => prefs.add(p.clone(), &cfg).unwrap(),
                Op::Publish(r) => {
                    assert!(r.users.contains(&r.owner));
                    for u in &r.users {
                        let at = w.truth.iter().find(|p| &p.user == u && p.t == r.time).unwrap().at;
                        assert!(r.space.contains_point(at, 1e-6));
                    }
                }
                _ => {}
            }
        }
        assert_eq!(prefs.len(), 50);
    }
}
