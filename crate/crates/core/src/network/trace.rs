use crate::ids::{MessageId, PeerId, Topic};
use crate::peer::{Event, ScoreSnapshot};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};

/// One consumed event and what it caused.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub step: u64,
    pub actor: PeerId,
    pub event: Event,
    #[serde(default)]
    pub emitted: Vec<Event>,
    /// Sends dropped by an adversarial block rule.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub suppressed: Vec<Event>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<ScoreSnapshot>,
}

impl TraceEntry {
    pub(super) fn new(step: u64, event: Event) -> Self {
        TraceEntry {
            step,
            actor: event.actor().clone(),
            event,
            emitted: Vec::new(),
            suppressed: Vec::new(),
            notes: Vec::new(),
            scores: None,
        }
    }
}

/// Who first put a message into the network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Origin {
    pub peer: PeerId,
    pub topic: Topic,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub entries: Vec<TraceEntry>,
    /// Events consumed, recorded or not.
    pub steps: u64,
    /// Sends dropped by block rules, recorded or not.
    #[serde(default)]
    pub suppressed: u64,
    pub origins: BTreeMap<MessageId, Origin>,
}

impl Trace {
    pub(super) fn note_origin(&mut self, mid: MessageId, peer: &PeerId, topic: &Topic) {
        self.origins.entry(mid).or_insert_with(|| Origin {
            peer: peer.clone(),
            topic: topic.clone(),
        });
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Heartbeat snapshots of `p`, in order.
    pub fn snapshots_of<'a>(&'a self, p: &'a PeerId) -> impl Iterator<Item = &'a ScoreSnapshot> + 'a {
        self.entries
            .iter()
            .filter(move |e| &e.actor == p)
            .filter_map(|e| e.scores.as_ref())
    }

    /// Checks that every receive follows a matching send, consumed or emitted.
    /// Only meaningful for fully recorded traces.
    pub fn check_conservation(&self) -> Result<(), String> {
        let mut outstanding: BTreeMap<String, usize> = BTreeMap::new();
        for e in &self.entries {
            if let Event::Receive { .. } = e.event {
                let key = e.event.to_string();
                match outstanding.get_mut(&key) {
                    Some(n) if *n > 0 => *n -= 1,
                    _ => return Err(format!("step {}: {} without a prior send", e.step, e.event)),
                }
            }
            let sends = std::iter::once(&e.event)
                .filter(|ev| matches!(ev, Event::Send { .. }))
                .chain(&e.emitted);
            for s in sends {
                let rcv = s.delivery().expect("sends only");
                *outstanding.entry(rcv.to_string()).or_default() += 1;
            }
        }
        Ok(())
    }

    /// Newline-delimited JSON, one record per entry.
    pub fn write_ndjson(&self, mut w: impl Write) -> io::Result<()> {
        for e in &self.entries {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_ndjson(&self) -> String {
        let mut buf = Vec::new();
        self.write_ndjson(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    /// Reads entries back; origins and the step counter are not part of the format.
    pub fn read_ndjson(r: impl BufRead) -> io::Result<Trace> {
        let mut entries = Vec::new();
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            entries.push(serde_json::from_str(&line).map_err(io::Error::from)?);
        }
        let steps = entries.last().map_or(0, |e: &TraceEntry| e.step + 1);
        let suppressed = entries.iter().map(|e| e.suppressed.len() as u64).sum();
        Ok(Trace {
            entries,
            steps,
            suppressed,
            origins: BTreeMap::new(),
        })
    }
}
