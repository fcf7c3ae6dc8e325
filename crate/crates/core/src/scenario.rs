//! Built-in scenarios: small self-contained traces with the decisions and
//! oracle verdicts they must produce.

use serde::Serialize;

use crate::geo::{dmax_disks, Disk, TimeInterval, TimeStamp};
use crate::model::{Pid, PrivacyPreference, Recurrence, Resource, Rid, UserId};
use crate::engine::{Modification, PublicationDecision};
use crate::trace::{replay, Backend, LogEntry, Op, ReplayReport, ReplaySettings, TraceCommand, VerifyRequest};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "expect", rename_all = "snake_case")]
pub enum Expectation {
    Verbatim { rid: Rid },
    /// Published with at least one modification.
    Modified { rid: Rid },
    /// Published; the region now reaches exactly `distance` from `from`.
    EnlargedTo { rid: Rid, from: Disk, distance: f64 },
    /// Published without `user`.
    Erased { rid: Rid, user: UserId },
    Denied { rid: Rid, reason: String },
    /// Every `verify` command in the trace reported no violation.
    Clean,
    /// Every concurrent pair matched a sequential order.
    Serializable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub name: &'static str,
    pub about: &'static str,
    pub trace: Vec<TraceCommand>,
    pub expected: Vec<Expectation>,
    /// Replay publishes two at a time.
    pub concurrent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub name: &'static str,
    pub passed: bool,
    /// One line per unmet expectation.
    pub diff: Vec<String>,
}

/// Base time of every scenario.
const T: i64 = 1_000_000;

struct Builder {
    cmds: Vec<TraceCommand>,
}

impl Builder {
    fn new(users: &[&str], friends: &[(&str, &str)]) -> Self {
        let mut b = Builder { cmds: Vec::new() };
        for u in users {
            b.op(Op::AddUser { user: UserId::new(*u) });
        }
        for (x, y) in friends {
            b.op(Op::AddFriend {
                a: UserId::new(*x),
                b: UserId::new(*y),
            });
        }
        b
    }

    fn op(&mut self, op: Op) -> &mut Self {
        let seq = self.cmds.len() as u64 + 1;
        self.cmds.push(TraceCommand { seq, op });
        self
    }

    #[allow(clippy::too_many_arguments)]
    fn pref(&mut self, pid: &str, owner: &str, excl: &[&str], adv: &[&str], window: (i64, i64), distance: f64) -> &mut Self {
        self.op(Op::AddPref(PrivacyPreference {
            pid: Pid::new(pid),
            owner: UserId::new(owner),
            excluding: excl.iter().map(|u| UserId::new(*u)).collect(),
            adversaries: adv.iter().map(|u| UserId::new(*u)).collect(),
            window: TimeInterval::new(T + window.0, T + window.1),
            distance,
            recurrence: Recurrence::Once,
        }))
    }

    fn publish(&mut self, rid: &str, owner: &str, users: &[&str], t: i64, space: Disk) -> &mut Self {
        let mut tagged: std::collections::BTreeSet<UserId> = users.iter().map(|u| UserId::new(*u)).collect();
        tagged.insert(UserId::new(owner));
        self.op(Op::Publish(Resource {
            rid: Rid::new(rid),
            users: tagged,
            owner: UserId::new(owner),
            time: TimeStamp(T + t),
            space,
            content: format!("{rid} content").into_bytes(),
        }))
    }

    fn verify(&mut self) -> &mut Self {
        self.op(Op::Verify(VerifyRequest { semantic: false }))
    }

    fn done(&mut self) -> Vec<TraceCommand> {
        std::mem::take(&mut self.cmds)
    }
}

fn rid(s: &str) -> Rid {
    Rid::new(s)
}

fn pt(x: f64, y: f64) -> Disk {
    Disk::point(x, y)
}

pub fn catalog() -> Vec<Scenario> {
    let pair = ["alice", "bob"];
    let mut out = Vec::new();

    out.push(Scenario {
        name: "alice_bob",
        about: "alice checks in at a pub, bob checks in at the same spot 10 s later during alice's window",
        trace: Builder::new(&pair, &[("alice", "bob")])
            .pref("p-alice", "alice", &["bob"], &[], (0, 100), 50.0)
            .publish("r1", "alice", &[], 20, pt(0.0, 0.0))
            .publish("r2", "bob", &[], 30, pt(0.0, 0.0))
            .verify()
            .done(),
        expected: vec![
            Expectation::Verbatim { rid: rid("r1") },
            Expectation::EnlargedTo {
                rid: rid("r2"),
                from: pt(0.0, 0.0),
                distance: 50.0,
            },
            Expectation::Clean,
        ],
        concurrent: false,
    });

    let mary = |with_a: bool| {
        let adv: &[&str] = if with_a { &["mary"] } else { &[] };
        Builder::new(
            &["alice", "bob", "mary"],
            &[("alice", "bob"), ("mary", "alice"), ("mary", "bob")],
        )
        .pref("p-alice", "alice", &["bob"], adv, (0, 600), 50.0)
        .publish("probe", "mary", &["alice", "bob"], 100, Disk::new(crate::geo::Point::new(0.0, 0.0), 10.0))
        .verify()
        .done()
    };
    out.push(Scenario {
        name: "mary_probe_with_A",
        about: "mary, in alice's adversary set, tags alice and bob together; the preference does not apply",
        trace: mary(true),
        expected: vec![Expectation::Verbatim { rid: rid("probe") }, Expectation::Clean],
        concurrent: false,
    });
    out.push(Scenario {
        name: "mary_probe_without_A",
        about: "the same probe with an empty adversary set; bob is erased, which tells mary something",
        trace: mary(false),
        expected: vec![
            Expectation::Modified { rid: rid("probe") },
            Expectation::Erased {
                rid: rid("probe"),
                user: UserId::new("bob"),
            },
            Expectation::Clean,
        ],
        concurrent: false,
    });

    out.push(Scenario {
        name: "adversary_exemption",
        about: "mary, in alice's adversary set, tags bob next to alice's check-in; the pair is exempt",
        trace: Builder::new(&["alice", "bob", "mary"], &[("mary", "bob")])
            .pref("p-alice", "alice", &["bob"], &["mary"], (0, 100), 50.0)
            .publish("r1", "alice", &[], 20, pt(0.0, 0.0))
            .publish("r2", "mary", &["bob"], 25, pt(0.0, 0.0))
            .verify()
            .done(),
        expected: vec![
            Expectation::Verbatim { rid: rid("r1") },
            Expectation::Verbatim { rid: rid("r2") },
            Expectation::Clean,
        ],
        concurrent: false,
    });

    out.push(Scenario {
        name: "fig4_dependence",
        about: "a precise check-in one minute after a coarse one would narrow the coarse one down; it is enlarged",
        trace: Builder::new(&["u"], &[])
            .publish("coarse", "u", &[], 0, Disk::new(crate::geo::Point::new(0.0, 0.0), 100.0))
            .publish("precise", "u", &[], 60, Disk::new(crate::geo::Point::new(30.0, 0.0), 5.0))
            .verify()
            .done(),
        expected: vec![
            Expectation::Verbatim { rid: rid("coarse") },
            Expectation::Modified { rid: rid("precise") },
            Expectation::Clean,
        ],
        concurrent: false,
    });

    out.push(Scenario {
        name: "direct_valid",
        about: "alice and bob tagged together an hour before alice's window",
        trace: Builder::new(&pair, &[("alice", "bob")])
            .pref("p-alice", "alice", &["bob"], &[], (3600, 7200), 50.0)
            .publish("r1", "alice", &["bob"], 0, pt(0.0, 0.0))
            .verify()
            .done(),
        expected: vec![Expectation::Verbatim { rid: rid("r1") }, Expectation::Clean],
        concurrent: false,
    });

    out.push(Scenario {
        name: "direct_invalid",
        about: "alice tags bob inside her own window; bob is erased",
        trace: Builder::new(&pair, &[("alice", "bob")])
            .pref("p-alice", "alice", &["bob"], &[], (3600, 7200), 50.0)
            .publish("r1", "alice", &["bob"], 4000, pt(0.0, 0.0))
            .verify()
            .done(),
        expected: vec![
            Expectation::Erased {
                rid: rid("r1"),
                user: UserId::new("bob"),
            },
            Expectation::Clean,
        ],
        concurrent: false,
    });

    out.push(Scenario {
        name: "indirect_valid",
        about: "separate check-ins 10 s apart, an hour before alice's window",
        trace: Builder::new(&pair, &[])
            .pref("p-alice", "alice", &["bob"], &[], (3600, 3700), 50.0)
            .publish("r1", "alice", &[], 0, pt(0.0, 0.0))
            .publish("r2", "bob", &[], 10, pt(0.0, 0.0))
            .verify()
            .done(),
        expected: vec![
            Expectation::Verbatim { rid: rid("r1") },
            Expectation::Verbatim { rid: rid("r2") },
            Expectation::Clean,
        ],
        concurrent: false,
    });

    out.push(Scenario {
        name: "indirect_invalid",
        about: "separate check-ins 10 m and 10 s apart inside alice's window; the later one is enlarged",
        trace: Builder::new(&pair, &[])
            .pref("p-alice", "alice", &["bob"], &[], (0, 100), 50.0)
            .publish("r1", "alice", &[], 20, pt(0.0, 0.0))
            .publish("r2", "bob", &[], 30, pt(10.0, 0.0))
            .verify()
            .done(),
        expected: vec![
            Expectation::Verbatim { rid: rid("r1") },
            Expectation::EnlargedTo {
                rid: rid("r2"),
                from: pt(0.0, 0.0),
                distance: 50.0,
            },
            Expectation::Clean,
        ],
        concurrent: false,
    });

    out.push(Scenario {
        name: "owner_guard_denial",
        about: "alice's check-in is pinned by her own post 2 s earlier, so it cannot grow away from bob's; \
                erasing alice would leave the resource without its owner",
        trace: Builder::new(&pair, &[])
            .publish("r0", "alice", &[], 93, pt(0.0, 0.0))
            .publish("rb", "bob", &[], 100, pt(0.0, 0.0))
            .pref("p-alice", "alice", &["bob"], &[], (0, 200), 50.0)
            .publish("r", "alice", &[], 95, pt(0.0, 0.0))
            .done(),
        expected: vec![
            Expectation::Verbatim { rid: rid("r0") },
            Expectation::Verbatim { rid: rid("rb") },
            Expectation::Denied {
                rid: rid("r"),
                reason: "privacy_unsatisfiable".into(),
            },
        ],
        concurrent: false,
    });

    out.push(Scenario {
        name: "concurrent_publish",
        about: "two pairs of conflicting check-ins submitted at the same time",
        trace: Builder::new(&["alice", "bob", "carol"], &[("alice", "bob")])
            .pref("p-alice", "alice", &["bob"], &[], (0, 100), 50.0)
            .pref("p-carol", "carol", &["alice"], &[], (0, 100), 80.0)
            .publish("r1", "alice", &[], 20, pt(0.0, 0.0))
            .publish("r2", "bob", &[], 25, pt(5.0, 0.0))
            .publish("r3", "carol", &[], 30, pt(0.0, 5.0))
            .publish("r4", "alice", &["bob"], 35, pt(3.0, 3.0))
            .verify()
            .done(),
        expected: vec![Expectation::Serializable, Expectation::Clean],
        concurrent: true,
    });
    out
}

pub fn find(name: &str) -> Option<Scenario> {
    catalog().into_iter().find(|s| s.name == name)
}

fn decision<'a>(report: &'a ReplayReport, rid: &Rid) -> Option<&'a PublicationDecision> {
    report.decisions().map(|(_, d)| d).find(|d| &d.rid == rid)
}

/// Check a replay against the expectations.
pub fn assess(s: &Scenario, report: &ReplayReport) -> ScenarioReport {
    let mut diff = Vec::new();
    if let Some(e) = &report.error {
        diff.push(format!("replay failed: {e}"));
    }
    for exp in &s.expected {
        let miss = |want: &str, d: Option<&PublicationDecision>| match d {
            None => format!("{want}: no decision"),
            Some(d) => format!("{want}: got {}", serde_json::to_string(d).unwrap_or_default()),
        };
        match exp {
            Expectation::Verbatim { rid } => {
                let d = decision(report, rid);
                if !d.is_some_and(|d| d.is_verbatim()) {
                    diff.push(miss(&format!("{rid} verbatim"), d));
                }
            }
            Expectation::Modified { rid } => {
                let d = decision(report, rid);
                if !d.is_some_and(|d| d.is_published() && !d.modifications.is_empty()) {
                    diff.push(miss(&format!("{rid} modified"), d));
                }
            }
            Expectation::EnlargedTo { rid, from, distance } => {
                let d = decision(report, rid);
                let ok = d.and_then(|d| d.resource.as_ref()).is_some_and(|r| {
                    (dmax_disks(&r.space, from) - distance).abs() <= 1e-9
                        && d.is_some_and(|d| {
                            d.modifications
                                .iter()
                                .any(|m| matches!(m, Modification::SpatialEnlarged { .. }))
                        })
                });
                if !ok {
                    diff.push(miss(&format!("{rid} enlarged to {distance} m"), d));
                }
            }
            Expectation::Erased { rid, user } => {
                let d = decision(report, rid);
                let ok = d
                    .and_then(|d| d.resource.as_ref())
                    .is_some_and(|r| !r.users.contains(user));
                if !ok {
                    diff.push(miss(&format!("{rid} without {user}"), d));
                }
            }
            Expectation::Denied { rid, reason } => {
                let d = decision(report, rid);
                if !d.is_some_and(|d| d.denied_reason.as_ref().is_some_and(|r| r.name() == reason)) {
                    diff.push(miss(&format!("{rid} denied ({reason})"), d));
                }
            }
            Expectation::Clean => {
                for e in &report.log {
                    if let LogEntry::Verify { seq, clean: false, violations } = e {
                        diff.push(format!(
                            "verify at seq {seq}: {}",
                            serde_json::to_string(violations).unwrap_or_default()
                        ));
                    }
                }
            }
            Expectation::Serializable => {
                let pairs: Vec<_> = report
                    .log
                    .iter()
                    .filter_map(|e| match e {
                        LogEntry::Serializability { seqs, serializable } => Some((*seqs, *serializable)),
                        _ => None,
                    })
                    .collect();
                if pairs.is_empty() {
                    diff.push("no concurrent pair was replayed".into());
                }
                for (seqs, ok) in pairs {
                    if !ok {
                        diff.push(format!("seqs {seqs:?} match neither sequential order"));
                    }
                }
            }
        }
    }
    ScenarioReport {
        name: s.name,
        passed: diff.is_empty(),
        diff,
    }
}

pub fn run_scenario<B: Backend>(s: &Scenario, backend: &B, settings: &ReplaySettings) -> ScenarioReport {
    let settings = ReplaySettings {
        concurrent: s.concurrent,
        ..*settings
    };
    assess(s, &replay(&s.trace, backend, &settings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{Engine, EngineOptions};

    #[test]
    fn every_scenario_passes_in_process() {
        let settings = ReplaySettings::default();
        for s in catalog() {
            let report = run_scenario(&s, &Engine::new(EngineOptions::default()), &settings);
            assert!(report.passed, "{}: {:#?}", s.name, report.diff);
        }
    }

    #[test]
    fn names_are_unique() {
        let mut names: Vec<_> = catalog().iter().map(|s| s.name).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), catalog().len());
        assert!(find("alice_bob").is_some());
        assert!(find("nope").is_none());
    }
}
