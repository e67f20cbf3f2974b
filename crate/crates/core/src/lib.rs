//! Deterministic model of gossipsub v1.1 peer scoring with property checks and
//! attack synthesis.

pub mod attacks;
pub mod config;
pub mod ids;
pub mod network;
pub mod oracle;
pub mod peer;
pub mod properties;
pub mod rational;
pub mod score;
pub mod topology;

pub use config::{GlobalParams, TopicParams, Twp};
pub use ids::{MessageId, PeerId, Topic};
pub use rational::Rational;
pub use score::{calc_score, CounterMaps, GlobalCounters, TopicCounters};
pub use network::{gs_trx, Group, Simulation, Trace};
pub use peer::{Event, Payload, PeerState};
pub use topology::Topology;
