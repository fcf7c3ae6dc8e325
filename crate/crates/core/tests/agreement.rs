use proptest::prelude::*;

use coloc_core::engine::{Engine, EngineOptions};
use coloc_core::model::ResourceStore;
use coloc_core::oracle::{check_conditions, default_horizon};
use coloc_core::rules::OverlapRule;
use coloc_core::{Config, Disk, Point, PrivacyPreference, Recurrence, Resource, TimeInterval, TimeStamp, UserId};

type Raw = (usize, Vec<bool>, i64, f64, f64, f64);

const USERS: [&str; 4] = ["u0", "u1", "u2", "u3"];

fn resource() -> impl Strategy<Value = Raw> {
    (0..4usize, prop::collection::vec(any::<bool>(), 4), 0i64..600, 0.0..200.0f64, 0.0..200.0f64, 0.0..40.0f64)
}

fn pref() -> impl Strategy<Value = (usize, usize, i64, i64, f64)> {
    (0..4usize, 1..4usize, 0i64..600, 0i64..300, 20.0..200.0f64)
}

fn build(
    res: &[Raw],
    prefs: &[(usize, usize, i64, i64, f64)],
) -> (Vec<Resource>, Vec<PrivacyPreference>) {
    let rs = res
        .iter()
        .enumerate()
        .map(|(i, (owner, tags, t, x, y, r))| {
            let mut users: std::collections::BTreeSet<UserId> =
                tags.iter().zip(USERS).filter(|(b, _)| **b).map(|(_, u)| UserId::new(u)).collect();
            users.insert(UserId::new(USERS[*owner]));
            Resource {
                rid: format!("r{i:02}").as_str().into(),
                users,
                owner: UserId::new(USERS[*owner]),
                time: TimeStamp(*t),
                space: Disk::new(Point::new(*x, *y), *r),
                content: vec![],
            }
        })
        .collect();
    let ps = prefs
        .iter()
        .enumerate()
        .map(|(i, (owner, shift, start, len, d))| PrivacyPreference {
            pid: format!("p{i}").as_str().into(),
            owner: UserId::new(USERS[*owner]),
            excluding: [UserId::new(USERS[(owner + shift) % 4])].into(),
            adversaries: Default::default(),
            window: TimeInterval::new(*start, start + len),
            distance: *d,
            recurrence: Recurrence::Once,
        })
        .collect();
    (rs, ps)
}

fn engine_with(prefs: &[PrivacyPreference]) -> Engine {
    let e = Engine::new(EngineOptions::default());
    for u in USERS {
        e.add_user(UserId::new(u)).unwrap();
    }
    for (i, a) in USERS.iter().enumerate() {
        for b in &USERS[i + 1..] {
            e.add_friend(UserId::new(*a), UserId::new(*b)).unwrap();
        }
    }
    for p in prefs {
        e.add_preference(p.clone()).unwrap();
    }
    e
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn engine_output_is_clean_and_flags_raw_violations(
        res in prop::collection::vec(resource(), 1..14),
        prefs in prop::collection::vec(pref(), 0..4),
    ) {
        let (rs, ps) = build(&res, &prefs);
        let config = Config::default();
        let engine = engine_with(&ps);
        let decisions: Vec<_> = rs.iter().map(|r| engine.publish(r)).collect();
        let store = engine.store();
        if let Some(h) = default_horizon(&store, &config) {
            let v = check_conditions(&store, &engine.preferences(), &config, OverlapRule::Disjoint, &h);
            prop_assert!(v.is_empty(), "engine output violates: {:?}", v);
        }

        let raw = ResourceStore::from_resources(config.d_max, rs.clone()).unwrap();
        let h = default_horizon(&raw, &config).unwrap();
        let raw_violations = check_conditions(&raw, &engine.preferences(), &config, OverlapRule::Disjoint, &h);
        if !raw_violations.is_empty() {
            prop_assert!(decisions.iter().any(|d| !d.is_verbatim()));
        }
    }
}
