use crate::ids::{MessageId, PeerId, Topic};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Anything one peer can send another.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "UPPERCASE")]
pub enum Payload {
    Full {
        topic: Topic,
        mid: MessageId,
        valid: bool,
    },
    Ihave {
        topic: Topic,
        mids: Vec<MessageId>,
    },
    Iwant {
        mids: Vec<MessageId>,
    },
    Graft {
        topic: Topic,
    },
    Prune {
        topic: Topic,
        backoff: u64,
    },
    Sub {
        topic: Topic,
    },
    Unsub {
        topic: Topic,
    },
}

impl Payload {
    pub fn full(topic: &Topic, mid: MessageId) -> Self {
        Payload::Full {
            topic: topic.clone(),
            mid,
            valid: true,
        }
    }

    pub fn topic(&self) -> Option<&Topic> {
        match self {
            Payload::Full { topic, .. }
            | Payload::Ihave { topic, .. }
            | Payload::Graft { topic }
            | Payload::Prune { topic, .. }
            | Payload::Sub { topic }
            | Payload::Unsub { topic } => Some(topic),
            Payload::Iwant { .. } => None,
        }
    }

    pub fn is_control(&self) -> bool {
        matches!(
            self,
            Payload::Ihave { .. } | Payload::Iwant { .. } | Payload::Graft { .. } | Payload::Prune { .. }
        )
    }
}

/// One step of the network. The first field is always the acting peer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verb")]
pub enum Event {
    #[serde(rename = "SND")]
    Send {
        peer: PeerId,
        to: PeerId,
        msg: Payload,
    },
    #[serde(rename = "RCV")]
    Receive {
        peer: PeerId,
        from: PeerId,
        msg: Payload,
    },
    #[serde(rename = "JOIN")]
    Join { peer: PeerId, topic: Topic },
    #[serde(rename = "LEAVE")]
    Leave { peer: PeerId, topic: Topic },
    #[serde(rename = "CONNECT")]
    Connect { peer: PeerId, other: PeerId },
    #[serde(rename = "HBM")]
    Heartbeat { peer: PeerId },
    #[serde(rename = "APP")]
    Publish {
        peer: PeerId,
        topic: Topic,
        mid: MessageId,
    },
}

impl Event {
    pub fn actor(&self) -> &PeerId {
        match self {
            Event::Send { peer, .. }
            | Event::Receive { peer, .. }
            | Event::Join { peer, .. }
            | Event::Leave { peer, .. }
            | Event::Connect { peer, .. }
            | Event::Heartbeat { peer }
            | Event::Publish { peer, .. } => peer,
        }
    }

    pub fn is_heartbeat(&self) -> bool {
        matches!(self, Event::Heartbeat { .. })
    }

    pub fn send(from: &PeerId, to: &PeerId, msg: Payload) -> Self {
        Event::Send {
            peer: from.clone(),
            to: to.clone(),
            msg,
        }
    }

    pub fn heartbeat(peer: &PeerId) -> Self {
        Event::Heartbeat { peer: peer.clone() }
    }

    pub fn join(peer: &PeerId, topic: &Topic) -> Self {
        Event::Join {
            peer: peer.clone(),
            topic: topic.clone(),
        }
    }

    pub fn connect(peer: &PeerId, other: &PeerId) -> Self {
        Event::Connect {
            peer: peer.clone(),
            other: other.clone(),
        }
    }

    pub fn publish(peer: &PeerId, topic: &Topic, mid: MessageId) -> Self {
        Event::Publish {
            peer: peer.clone(),
            topic: topic.clone(),
            mid,
        }
    }

    /// The receive event a send turns into.
    pub fn delivery(&self) -> Option<Event> {
        match self {
            Event::Send { peer, to, msg } => Some(Event::Receive {
                peer: to.clone(),
                from: peer.clone(),
                msg: msg.clone(),
            }),
            _ => None,
        }
    }
}

fn join_mids(mids: &[MessageId]) -> String {
    mids.iter()
        .map(|m| m.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl fmt::Display for Payload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Payload::Full { topic, mid, valid } => {
                write!(f, "FULL({topic},{mid}{})", if *valid { "" } else { ",invalid" })
            }
            Payload::Ihave { topic, mids } => write!(f, "IHAVE({topic},[{}])", join_mids(mids)),
            Payload::Iwant { mids } => write!(f, "IWANT([{}])", join_mids(mids)),
            Payload::Graft { topic } => write!(f, "GRAFT({topic})"),
            Payload::Prune { topic, backoff } => write!(f, "PRUNE({topic},{backoff})"),
            Payload::Sub { topic } => write!(f, "SUB({topic})"),
            Payload::Unsub { topic } => write!(f, "UNSUB({topic})"),
        }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::Send { peer, to, msg } => write!(f, "({peer} SND {to} {msg})"),
            Event::Receive { peer, from, msg } => write!(f, "({peer} RCV {from} {msg})"),
            Event::Join { peer, topic } => write!(f, "({peer} JOIN {topic})"),
            Event::Leave { peer, topic } => write!(f, "({peer} LEAVE {topic})"),
            Event::Connect { peer, other } => write!(f, "({peer} CONNECT {other})"),
            Event::Heartbeat { peer } => write!(f, "({peer} HBM)"),
            Event::Publish { peer, topic, mid } => write!(f, "({peer} APP {topic} {mid})"),
        }
    }
}
