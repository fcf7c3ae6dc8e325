//! Co-location privacy enforcement for geo-social networks.
//!
//! A candidate resource (users, time, region, content) is generalized before
//! publication, by erasing tagged users or enlarging its region, so that no
//! combination of published resources proves that a user was near someone
//! they asked not to be seen with. [`oracle`] re-checks a resource set from
//! first principles.

pub mod api;
pub mod engine;
pub mod generate;
pub mod geo;
pub mod graph;
pub mod model;
pub mod oracle;
pub mod rules;
pub mod scenario;
pub mod trace;

pub use engine::{Engine, EngineOptions, PublicationDecision};
pub use geo::{Config, Disk, Point, TimeInterval, TimeStamp};
pub use model::{PrivacyPreference, Recurrence, Resource, Rid, Pid, UserId};
