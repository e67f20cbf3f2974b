use super::{
    big, check_prop1_snapshot, check_prop2, check_prop3, check_prop4, Counterexample, GoodIncrement,
    PenaltyDeltas, PropertyError, PropertyId,
};
use crate::config::{TopicParams, Twp};
use crate::ids::{PeerId, Topic};
use crate::oracle::Oracle;
use crate::rational::{self, Rational};
use crate::score::{past_activation, CounterMaps, GlobalCounters, TopicCounters};
use num_traits::{ToPrimitive, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Inclusive range of natural numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueRange {
    pub min: u64,
    pub max: u64,
}

impl ValueRange {
    pub const fn new(min: u64, max: u64) -> Self {
        ValueRange { min, max }
    }

    /// Log-uniform draw, so small values are as likely as large magnitudes.
    fn draw_log(&self, rng: &mut impl Rng) -> u64 {
        let lo = (self.min + 1) as f64;
        let hi = (self.max + 2) as f64;
        let u: f64 = rng.gen_range(0.0..1.0);
        let y = (lo.ln() + u * (hi.ln() - lo.ln())).exp().floor() as u64;
        y.saturating_sub(1).clamp(self.min, self.max)
    }

    fn draw_uniform(&self, rng: &mut impl Rng) -> u64 {
        rng.gen_range(self.min..=self.max)
    }
}

/// Shape of the random counter snapshots tried by the search.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub budget: u64,
    /// Mesh time and delivery counters of topics with nominal delivery.
    pub counters: ValueRange,
    /// Chance that one topic per trial is starved of deliveries.
    #[serde(with = "crate::rational::serde_q")]
    pub starve_probability: Rational,
    /// Mesh deliveries of the starved topic; its first deliveries are zero.
    pub starved_mesh_deliveries: ValueRange,
    /// Size of perturbation steps.
    pub deltas: ValueRange,
    /// Behaviour penalty and colocation count drawn for the equal-counters property.
    pub global_counters: ValueRange,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            seed: 0,
            budget: 100_000,
            counters: ValueRange::new(1, 256),
            starve_probability: rational::int(1),
            starved_mesh_deliveries: ValueRange::new(0, 1),
            deltas: ValueRange::new(1, 256),
            global_counters: ValueRange::new(0, 32),
        }
    }
}

impl GeneratorConfig {
    pub fn with_seed(seed: u64) -> Self {
        GeneratorConfig {
            seed,
            ..Default::default()
        }
    }

    fn check(&self) -> Result<(), PropertyError> {
        if self.budget == 0 {
            return Err(PropertyError::Precondition("search budget must be positive".into()));
        }
        for (name, r) in [
            ("counters", self.counters),
            ("starvedMeshDeliveries", self.starved_mesh_deliveries),
            ("deltas", self.deltas),
            ("globalCounters", self.global_counters),
        ] {
            if r.min > r.max {
                return Err(PropertyError::Precondition(format!("empty range {name}: {}..{}", r.min, r.max)));
            }
        }
        if self.deltas.min == 0 {
            return Err(PropertyError::Precondition("deltas must start at 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SearchOutcome {
    pub property: PropertyId,
    pub seed: u64,
    pub budget: u64,
    /// Trials evaluated, the witness trial included.
    pub trials: u64,
    pub counterexample: Option<Counterexample>,
}

const PEER: &str = "peer";
const TWIN: &str = "twin";

/// Draws up to `gen.budget` trials, each from its own stream of `gen.seed`, and
/// returns the first witness.
pub fn search_counterexample(
    prop: PropertyId,
    twp: &Twp,
    gen: &GeneratorConfig,
) -> Result<SearchOutcome, PropertyError> {
    gen.check()?;
    let mut outcome = SearchOutcome {
        property: prop,
        seed: gen.seed,
        budget: gen.budget,
        trials: 0,
        counterexample: None,
    };
    if twp.topics.is_empty() {
        outcome.trials = gen.budget;
        return Ok(outcome);
    }
    for trial in 0..gen.budget {
        let mut oracle = Oracle::with_stream(gen.seed, trial);
        let found = match prop {
            PropertyId::NegativeTopicDominates => trial_prop1(twp, gen, &mut oracle),
            PropertyId::PenaltiesLowerScore => trial_prop2(twp, gen, &mut oracle),
            PropertyId::GoodCountersMonotone => trial_prop3(twp, gen, &mut oracle),
            PropertyId::EqualCountersEqualScores => trial_prop4(twp, gen, &mut oracle),
        };
        outcome.trials = trial + 1;
        if let Some(mut cx) = found {
            cx.seed = Some(gen.seed);
            cx.trial = Some(trial);
            outcome.counterexample = Some(cx);
            break;
        }
    }
    Ok(outcome)
}

fn nominal(gen: &GeneratorConfig, o: &mut Oracle) -> TopicCounters {
    let rng = o.rng();
    TopicCounters {
        mesh_time: big(gen.counters.draw_log(rng)),
        first_message_deliveries: big(gen.counters.draw_log(rng)),
        mesh_message_deliveries: big(gen.counters.draw_log(rng)),
        ..Default::default()
    }
}

fn beyond_activation(tp: &TopicParams, gen: &GeneratorConfig, o: &mut Oracle) -> Rational {
    let extra = gen.counters.draw_log(o.rng()).max(1);
    big(tp.activation_ticks() + extra)
}

fn starved(tp: &TopicParams, gen: &GeneratorConfig, o: &mut Oracle) -> TopicCounters {
    let mesh_time = beyond_activation(tp, gen, o);
    TopicCounters {
        mesh_time,
        first_message_deliveries: Rational::zero(),
        mesh_message_deliveries: big(gen.starved_mesh_deliveries.draw_uniform(o.rng())),
        ..Default::default()
    }
}

fn pick_topic(twp: &Twp, o: &mut Oracle) -> Topic {
    let i = o.next_below(twp.topics.len() as u64) as usize;
    twp.topics.keys().nth(i).expect("index below topic count").clone()
}

/// One nominal snapshot, possibly with a starved topic.
fn snapshot(twp: &Twp, gen: &GeneratorConfig, o: &mut Oracle) -> CounterMaps {
    let p = PeerId::from(PEER);
    let mut cm = CounterMaps::default();
    for t in twp.topics.keys() {
        let tc = nominal(gen, o);
        cm.set_topic(&p, t, tc);
    }
    if o.bernoulli(&gen.starve_probability) {
        let t = pick_topic(twp, o);
        let tc = starved(&twp.topics[&t], gen, o);
        cm.set_topic(&p, &t, tc);
    }
    cm.set_global(
        &p,
        GlobalCounters {
            ip_colocation_count: 1,
            ..Default::default()
        },
    );
    cm
}

fn trial_prop1(twp: &Twp, gen: &GeneratorConfig, o: &mut Oracle) -> Option<Counterexample> {
    let cm = snapshot(twp, gen, o);
    let p = PeerId::from(PEER);
    twp.topics
        .keys()
        .find_map(|t| check_prop1_snapshot(&cm, &p, t, twp).ok().flatten())
}

/// Perturbations that strictly raise a weighted penalty indicator of `t`.
fn effective_deltas(
    cm: &CounterMaps,
    t: &Topic,
    twp: &Twp,
    gen: &GeneratorConfig,
    o: &mut Oracle,
) -> Option<PenaltyDeltas> {
    let p = PeerId::from(PEER);
    let tp = &twp.topics[t];
    let gp = &twp.global;
    let tc = cm.topic_counters(&p, t);
    let gc = cm.global_counters(&p);
    let topical = !tp.topic_weight.is_zero();

    let mut kinds: Vec<u8> = Vec::new();
    let mmd = tc.mesh_message_deliveries.to_integer().to_u64().unwrap_or(0);
    let thr = tp.mesh_message_deliveries_threshold.ceil().to_integer().to_u64().unwrap_or(0);
    // lowest drop that ends strictly below the threshold
    let min_drop = (mmd + 1).saturating_sub(thr).max(1);
    if topical
        && !tp.mesh_message_deliveries_weight.is_zero()
        && past_activation(tc, tp)
        && thr > 0
        && mmd >= min_drop
    {
        kinds.push(0);
    }
    if topical && !tp.mesh_failure_penalty_weight.is_zero() {
        kinds.push(1);
    }
    if topical && !tp.invalid_message_deliveries_weight.is_zero() {
        kinds.push(2);
    }
    if !gp.ip_colocation_weight.is_zero() {
        kinds.push(3);
    }
    if !gp.behaviour_penalty_weight.is_zero() {
        kinds.push(4);
    }
    if kinds.is_empty() {
        return None;
    }
    let kind = kinds[o.next_below(kinds.len() as u64) as usize];
    let step = gen.deltas.draw_log(o.rng());
    let mut d = PenaltyDeltas::default();
    match kind {
        0 => d.mesh_deliveries_drop = big(o.rng().gen_range(min_drop..=mmd)),
        1 => d.mesh_failure_penalty = big(step),
        2 => d.invalid_deliveries = big(step),
        3 => {
            let target = gp.ip_colocation_threshold.max(gc.ip_colocation_count) + step.min(16);
            d.ip_colocation = target - gc.ip_colocation_count;
        }
        _ => {
            let floor = if gc.behaviour_penalty > gp.behaviour_penalty_threshold {
                Rational::zero()
            } else {
                &gp.behaviour_penalty_threshold - &gc.behaviour_penalty
            };
            d.behaviour_penalty = floor + big(step);
        }
    }
    Some(d)
}

fn trial_prop2(twp: &Twp, gen: &GeneratorConfig, o: &mut Oracle) -> Option<Counterexample> {
    let cm = snapshot(twp, gen, o);
    let t = pick_topic(twp, o);
    let d = effective_deltas(&cm, &t, twp, gen, o)?;
    check_prop2(&cm, &PeerId::from(PEER), &t, &d, twp).ok().flatten()
}

fn trial_prop3(twp: &Twp, gen: &GeneratorConfig, o: &mut Oracle) -> Option<Counterexample> {
    let t = pick_topic(twp, o);
    let tp = &twp.topics[&t];
    let mut tc = nominal(gen, o);
    tc.mesh_time = beyond_activation(tp, gen, o);
    let draw = |o: &mut Oracle| {
        if o.next_below(2) == 0 {
            Rational::zero()
        } else {
            big(gen.deltas.draw_log(o.rng()))
        }
    };
    let inc = GoodIncrement {
        mesh_time: draw(o),
        first_deliveries: draw(o),
        mesh_deliveries: draw(o),
    };
    let mut cx = check_prop3(&tc, &inc, tp, &twp.global).ok().flatten()?;
    // name the real topic so the witness replays against the config
    let p = PeerId::from(PEER);
    let mut cm = CounterMaps::default();
    cm.set_topic(&p, &t, tc);
    cx.peer = p;
    cx.topic = Some(t);
    cx.counters = cm;
    Some(cx)
}

fn trial_prop4(twp: &Twp, gen: &GeneratorConfig, o: &mut Oracle) -> Option<Counterexample> {
    let p = PeerId::from(PEER);
    let q = PeerId::from(TWIN);
    let mut cm = CounterMaps::default();
    for t in twp.topics.keys() {
        let mut tc = nominal(gen, o);
        tc.invalid_message_deliveries = big(gen.global_counters.draw_log(o.rng()));
        tc.mesh_failure_penalty = big(gen.global_counters.draw_log(o.rng()));
        cm.set_topic(&p, t, tc.clone());
        cm.set_topic(&q, t, tc);
    }
    let gc = GlobalCounters {
        app_specific_score: big(gen.global_counters.draw_log(o.rng())),
        ip_colocation_count: gen.global_counters.draw_log(o.rng()),
        behaviour_penalty: big(gen.global_counters.draw_log(o.rng())),
    };
    cm.set_global(&p, gc.clone());
    cm.set_global(&q, gc);
    check_prop4(&cm, &p, &q, twp).ok().flatten()
}
