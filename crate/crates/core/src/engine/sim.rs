use std::collections::{BTreeMap, VecDeque};
use std::io::Write;
use std::time::Instant;

use rand::Rng;
use serde_json::{json, Value};

use super::calendar::EventCalendar;
use super::metrics::{QueueMetrics, RunMetrics, SinkMetrics, TransitionMetrics};
use super::rng::{rng_stream, selection_stream, Stream};
use super::token::{origin_propagation, TokenInstance};
use super::{EngineError, RunConfig};
use crate::model::{
    validate_net, ColorExpr, ColorValue, DelaySpec, PlaceKind, QpnNet, ResolvedDelay, TokenColor, TransitionKind,
};
use crate::parser::json::color_value;

struct InArc {
    place: usize,
    mult: usize,
    binding: String,
}

enum OutColor {
    /// Copy of the first token bound on input arc 0.
    CopyFirst,
    Empty,
    Constant(TokenColor),
    Expr(ColorExpr),
}

struct OutArc {
    place: usize,
    mult: u32,
    color: OutColor,
}

enum Timing {
    Immediate(f64),
    Timed { fixed: Option<ResolvedDelay>, spec: DelaySpec },
}

struct CGuard {
    arc: usize,
    field: String,
    equals: String,
}

struct CTrans {
    id: String,
    inputs: Vec<InArc>,
    /// Offset of each input arc's first token in the consumed list.
    first: Vec<usize>,
    /// Total tokens needed per distinct input place.
    need: Vec<(usize, usize)>,
    outputs: Vec<OutArc>,
    timing: Timing,
    guard: Option<CGuard>,
}

#[derive(Default)]
struct Service {
    busy: bool,
    start: f64,
    tokens: Vec<TokenInstance>,
}

#[derive(Default)]
struct QueueState {
    area: f64,
    last: f64,
    max: u64,
    series: Vec<u64>,
    waits: Vec<f64>,
    arrivals: u64,
}

/// One simulation run in progress.
///
/// Timed transitions are single-server: input tokens are removed when service
/// starts and outputs appear when it completes. At every instant, due
/// completions are applied first, then enabled immediate transitions fire
/// (one at a time, chosen with probability proportional to their weight among
/// all enabled ones), then idle enabled timed transitions start service in id
/// order. Sources are timed transitions without inputs, so they are always
/// enabled and restart right after each completion.
pub struct Simulator<'a> {
    cfg: RunConfig,
    place_ids: Vec<String>,
    place_index: BTreeMap<String, usize>,
    trans: Vec<CTrans>,
    timed: Vec<usize>,
    immediate: Vec<usize>,
    marking: Vec<VecDeque<TokenInstance>>,
    queue_of: Vec<Option<usize>>,
    queues: Vec<QueueState>,
    service: Vec<Service>,
    busy_time: Vec<f64>,
    firings: Vec<u64>,
    sinks: Vec<Option<SinkMetrics>>,
    streams: Vec<Stream>,
    selection: Stream,
    calendar: EventCalendar,
    now: f64,
    started: bool,
    instant: u64,
    fired_at: Vec<u64>,
    next_sample: u64,
    next_token: u64,
    next_origin: u64,
    emitted: u64,
    events: u64,
    scratch: Vec<usize>,
    trace: Option<Box<dyn Write + 'a>>,
    clock: Instant,
}

fn constant_color(e: &ColorExpr) -> Option<TokenColor> {
    if e.bindings().is_empty() {
        e.eval_color(&|_| None).ok()
    } else {
        None
    }
}

impl<'a> Simulator<'a> {
    pub fn new(net: &QpnNet, cfg: RunConfig) -> Result<Self, EngineError> {
        cfg.check()?;
        let violations = validate_net(net);
        if !violations.is_empty() {
            return Err(EngineError::InvalidNet(violations));
        }

        let place_ids: Vec<String> = net.places.iter().map(|p| p.id.to_string()).collect();
        let place_kind: Vec<PlaceKind> = net.places.iter().map(|p| p.kind).collect();
        let place_index: BTreeMap<String, usize> =
            place_ids.iter().enumerate().map(|(i, p)| (p.clone(), i)).collect();

        // transitions are indexed in id order so calendar ties resolve by id
        let mut order: Vec<_> = net.transitions.iter().collect();
        order.sort_by(|a, b| a.id.as_str().cmp(b.id.as_str()));

        let mut trans = Vec::with_capacity(order.len());
        for t in order {
            let tid = t.id.as_str();
            let inputs: Vec<InArc> = net
                .arcs
                .iter()
                .filter(|a| a.to.as_str() == tid && place_index.contains_key(a.from.as_str()))
                .map(|a| InArc {
                    place: place_index[a.from.as_str()],
                    mult: a.multiplicity as usize,
                    binding: a.binding.clone().unwrap_or_default(),
                })
                .collect();
            let mut first = Vec::with_capacity(inputs.len());
            let mut off = 0;
            let mut need: Vec<(usize, usize)> = Vec::new();
            for a in &inputs {
                first.push(off);
                off += a.mult;
                match need.iter_mut().find(|(p, _)| *p == a.place) {
                    Some((_, n)) => *n += a.mult,
                    None => need.push((a.place, a.mult)),
                }
            }
            let outputs = net
                .output_arcs(tid)
                .map(|a| OutArc {
                    place: place_index[a.to.as_str()],
                    mult: a.multiplicity,
                    color: match &a.expr {
                        None if inputs.is_empty() => OutColor::Empty,
                        None => OutColor::CopyFirst,
                        Some(e) => constant_color(e).map_or_else(|| OutColor::Expr(e.clone()), OutColor::Constant),
                    },
                })
                .collect();
            let timing = match &t.kind {
                TransitionKind::Immediate { weight } => Timing::Immediate(*weight),
                TransitionKind::Timed { delay } => Timing::Timed {
                    fixed: delay.resolve_with(|e| e.constant_number()),
                    spec: delay.clone(),
                },
            };
            let guard = t.guard.as_ref().map(|g| CGuard {
                arc: inputs.iter().position(|a| a.binding == g.binding).unwrap_or(0),
                field: g.field.clone(),
                equals: g.equals.clone(),
            });
            trans.push(CTrans {
                id: tid.to_string(),
                inputs,
                first,
                need,
                outputs,
                timing,
                guard,
            });
        }

        let timed = (0..trans.len())
            .filter(|&i| matches!(trans[i].timing, Timing::Timed { .. }))
            .collect();
        let immediate = (0..trans.len())
            .filter(|&i| matches!(trans[i].timing, Timing::Immediate(_)))
            .collect();

        let mut queue_of = vec![None; place_ids.len()];
        let mut queues = Vec::new();
        for (i, k) in place_kind.iter().enumerate() {
            if *k == PlaceKind::Queuing {
                queue_of[i] = Some(queues.len());
                queues.push(QueueState::default());
            }
        }
        let sinks = place_kind
            .iter()
            .map(|k| (*k == PlaceKind::Sink).then(SinkMetrics::default))
            .collect();
        let streams = trans.iter().map(|t| rng_stream(cfg.seed, &t.id)).collect();

        let n = trans.len();
        let mut sim = Simulator {
            selection: selection_stream(cfg.seed),
            cfg,
            place_ids,
            place_index,
            trans,
            timed,
            immediate,
            marking: Vec::new(),
            queue_of,
            queues,
            service: (0..n).map(|_| Service::default()).collect(),
            busy_time: vec![0.0; n],
            firings: vec![0; n],
            sinks,
            streams,
            calendar: EventCalendar::new(),
            now: 0.0,
            started: false,
            instant: 0,
            fired_at: vec![u64::MAX; n],
            next_sample: 0,
            next_token: 0,
            next_origin: 0,
            emitted: 0,
            events: 0,
            scratch: Vec::new(),
            trace: None,
            clock: Instant::now(),
        };
        sim.marking = vec![VecDeque::new(); sim.place_ids.len()];
        for (place, colors) in &net.initial_marking {
            let p = sim.place_index[place.as_str()];
            for c in colors {
                let id = sim.next_token;
                sim.next_token += 1;
                let origin = sim.next_origin;
                sim.next_origin += 1;
                sim.deposit(
                    p,
                    TokenInstance {
                        id,
                        color: c.clone(),
                        origin_id: origin,
                        origin_time: 0.0,
                        enqueue_time: 0.0,
                    },
                );
            }
        }
        Ok(sim)
    }

    /// Writes one JSON line per firing to `w`.
    pub fn set_trace(&mut self, w: impl Write + 'a) {
        self.trace = Some(Box::new(w));
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    /// Tokens currently held by `place`, front first.
    pub fn tokens(&self, place: &str) -> Option<&VecDeque<TokenInstance>> {
        self.place_index.get(place).map(|&p| &self.marking[p])
    }

    /// Whether timed transition `id` is currently in service.
    pub fn in_service(&self, id: &str) -> bool {
        self.trans.iter().position(|t| t.id == id).is_some_and(|i| self.service[i].busy)
    }

    /// Processes the next instant (the first call handles t = 0). Returns
    /// `false` once nothing remains before the horizon.
    pub fn step(&mut self) -> Result<bool, EngineError> {
        let t = if self.started {
            match self.calendar.next_time() {
                Some(t) if t < self.cfg.horizon => t,
                _ => return Ok(false),
            }
        } else {
            0.0
        };
        self.sample_until(t);
        self.now = t;
        self.instant += 1;
        if self.started {
            while self.calendar.next_time() == Some(t) {
                let ev = self.calendar.pop().expect("peeked");
                self.events += 1;
                self.complete(ev.transition)?;
            }
        }
        self.started = true;
        self.settle()?;
        self.start_timed()?;
        Ok(true)
    }

    pub fn run(mut self) -> Result<RunMetrics, EngineError> {
        while self.step()? {}
        Ok(self.finish())
    }

    fn sample_until(&mut self, t: f64) {
        loop {
            let s = self.cfg.warmup + self.next_sample as f64 * self.cfg.sample_interval;
            if s > t || s >= self.cfg.horizon {
                break;
            }
            for (p, q) in self.queue_of.iter().enumerate() {
                if let Some(q) = q {
                    self.queues[*q].series.push(self.marking[p].len() as u64);
                }
            }
            self.next_sample += 1;
        }
    }

    /// Accounts the time-weighted length of place `p` up to now; call before changing it.
    fn touch(&mut self, p: usize) {
        if let Some(q) = self.queue_of[p] {
            let st = &mut self.queues[q];
            let from = st.last.max(self.cfg.warmup);
            if self.now > from {
                let len = self.marking[p].len();
                st.area += len as f64 * (self.now - from);
                st.max = st.max.max(len as u64);
            }
            st.last = self.now;
        }
    }

    fn deposit(&mut self, p: usize, tok: TokenInstance) {
        let observe = self.now >= self.cfg.warmup;
        if let Some(s) = &mut self.sinks[p] {
            if observe {
                s.e2e.push(self.now - tok.origin_time);
                s.count += 1;
                for (field, v) in tok.color.fields() {
                    if let ColorValue::Symbol(sym) = v {
                        let by_value = match s.breakdown.get_mut(field) {
                            Some(m) => m,
                            None => s.breakdown.entry(field.to_string()).or_default(),
                        };
                        match by_value.get_mut(&**sym) {
                            Some(c) => *c += 1,
                            None => {
                                by_value.insert(sym.to_string(), 1);
                            }
                        }
                    }
                }
            }
        }
        self.touch(p);
        self.marking[p].push_back(tok);
        if let Some(q) = self.queue_of[p] {
            let st = &mut self.queues[q];
            if observe {
                st.arrivals += 1;
                st.max = st.max.max(self.marking[p].len() as u64);
            }
        }
    }

    fn enabled(&self, t: usize) -> bool {
        let tr = &self.trans[t];
        if !tr.need.iter().all(|&(p, n)| self.marking[p].len() >= n) {
            return false;
        }
        match &tr.guard {
            None => true,
            Some(g) => self.marking[tr.inputs[g.arc].place]
                .front()
                .and_then(|tok| tok.color.get(&g.field))
                .and_then(ColorValue::as_symbol)
                .is_some_and(|s| s == g.equals),
        }
    }

    fn consume(&mut self, t: usize, into: &mut Vec<TokenInstance>) {
        into.clear();
        let observe = self.now >= self.cfg.warmup;
        for k in 0..self.trans[t].inputs.len() {
            let (p, m) = (self.trans[t].inputs[k].place, self.trans[t].inputs[k].mult);
            self.touch(p);
            for _ in 0..m {
                let tok = self.marking[p].pop_front().expect("enabled transition");
                if observe {
                    if let Some(q) = self.queue_of[p] {
                        self.queues[q].waits.push(self.now - tok.enqueue_time);
                    }
                }
                into.push(tok);
            }
        }
    }

    fn bound<'t>(tr: &CTrans, consumed: &'t [TokenInstance], name: &str) -> Option<&'t TokenColor> {
        tr.inputs
            .iter()
            .position(|a| a.binding == name)
            .map(|k| &consumed[tr.first[k]].color)
    }

    fn produce(&mut self, t: usize, consumed: &[TokenInstance], start: f64) -> Result<(), EngineError> {
        let (origin_id, origin_time) = if consumed.is_empty() {
            let o = self.next_origin;
            self.next_origin += 1;
            (o, self.now)
        } else {
            origin_propagation(consumed)
        };
        let is_source = self.trans[t].inputs.is_empty();
        let mut produced = Vec::new();
        for k in 0..self.trans[t].outputs.len() {
            let tr = &self.trans[t];
            let arc = &tr.outputs[k];
            let color = match &arc.color {
                OutColor::Empty => TokenColor::new(),
                OutColor::CopyFirst => consumed[0].color.clone(),
                OutColor::Constant(c) => c.clone(),
                OutColor::Expr(e) => e
                    .eval_color(&|name: &str| Self::bound(tr, consumed, name))
                    .map_err(|source| EngineError::Eval {
                        transition: tr.id.clone(),
                        time: self.now,
                        source,
                    })?,
            };
            let (place, mult) = (arc.place, arc.mult);
            for _ in 0..mult {
                let id = self.next_token;
                self.next_token += 1;
                if self.trace.is_some() {
                    produced.push(json!({
                        "id": id,
                        "place": self.place_ids[place],
                        "color": color_value(&color),
                    }));
                }
                if is_source && self.now >= self.cfg.warmup {
                    self.emitted += 1;
                }
                self.deposit(
                    place,
                    TokenInstance {
                        id,
                        color: color.clone(),
                        origin_id,
                        origin_time,
                        enqueue_time: self.now,
                    },
                );
            }
        }
        if self.now >= self.cfg.warmup {
            self.firings[t] += 1;
        }
        if let Some(w) = &mut self.trace {
            let rec = json!({
                "time": self.now,
                "start": start,
                "transition": self.trans[t].id,
                "consumed": consumed.iter().map(|c| c.id).collect::<Vec<_>>(),
                "produced": Value::Array(produced),
            });
            writeln!(w, "{rec}").map_err(|e| EngineError::Trace(e.to_string()))?;
        }
        Ok(())
    }

    fn complete(&mut self, t: usize) -> Result<(), EngineError> {
        let mut svc = std::mem::take(&mut self.service[t]);
        let (lo, hi) = (svc.start.max(self.cfg.warmup), self.now);
        if hi > lo {
            self.busy_time[t] += hi - lo;
        }
        let r = self.produce(t, &svc.tokens, svc.start);
        svc.busy = false;
        self.service[t] = svc;
        r
    }

    fn settle(&mut self) -> Result<(), EngineError> {
        let mut fired: u64 = 0;
        let mut enabled = std::mem::take(&mut self.scratch);
        let mut buf = Vec::new();
        loop {
            enabled.clear();
            let mut total = 0.0;
            for &i in &self.immediate {
                if self.enabled(i) {
                    if let Timing::Immediate(w) = self.trans[i].timing {
                        total += w;
                    }
                    enabled.push(i);
                }
            }
            let Some(&only) = enabled.first() else { break };
            if fired >= self.cfg.immediate_cap {
                let cycling = (0..self.trans.len())
                    .filter(|&i| self.fired_at[i] == self.instant)
                    .map(|i| self.trans[i].id.clone())
                    .collect();
                self.scratch = enabled;
                return Err(EngineError::VanishingLoop {
                    time: self.now,
                    firings: fired,
                    transitions: cycling,
                });
            }
            let chosen = if enabled.len() == 1 {
                only
            } else {
                let mut u = self.selection.random::<f64>() * total;
                let mut pick = *enabled.last().expect("non-empty");
                for &i in &enabled {
                    if let Timing::Immediate(w) = self.trans[i].timing {
                        if u < w {
                            pick = i;
                            break;
                        }
                        u -= w;
                    }
                }
                pick
            };
            self.consume(chosen, &mut buf);
            let now = self.now;
            self.produce(chosen, &buf, now)?;
            self.fired_at[chosen] = self.instant;
            fired += 1;
        }
        self.scratch = enabled;
        Ok(())
    }

    fn start_timed(&mut self) -> Result<(), EngineError> {
        for k in 0..self.timed.len() {
            let t = self.timed[k];
            if self.service[t].busy || !self.enabled(t) {
                continue;
            }
            let mut tokens = std::mem::take(&mut self.service[t].tokens);
            self.consume(t, &mut tokens);
            let tr = &self.trans[t];
            let Timing::Timed { fixed, spec } = &tr.timing else { unreachable!() };
            let resolved = match fixed {
                Some(r) => *r,
                None => {
                    let mut err = None;
                    let r = spec.resolve_with(|e| match e.eval_number(&|n: &str| Self::bound(tr, &tokens, n)) {
                        Ok(v) => Some(v),
                        Err(x) => {
                            err = Some(x);
                            None
                        }
                    });
                    match r {
                        Some(r) => r,
                        None => {
                            return Err(EngineError::Eval {
                                transition: tr.id.clone(),
                                time: self.now,
                                source: err.expect("resolution failed on an evaluation error"),
                            })
                        }
                    }
                }
            };
            let d = resolved.sample(&mut self.streams[t]).map_err(|source| EngineError::Delay {
                transition: tr.id.clone(),
                time: self.now,
                source,
            })?;
            self.calendar.schedule(self.now + d, t);
            self.service[t] = Service {
                busy: true,
                start: self.now,
                tokens,
            };
        }
        Ok(())
    }

    /// Closes the observation window at the horizon and returns the metrics.
    pub fn finish(mut self) -> RunMetrics {
        let horizon = self.cfg.horizon;
        let warmup = self.cfg.warmup;
        self.sample_until(horizon);
        self.now = horizon;
        for p in 0..self.marking.len() {
            self.touch(p);
        }
        for t in 0..self.trans.len() {
            if self.service[t].busy {
                let lo = self.service[t].start.max(warmup);
                if horizon > lo {
                    self.busy_time[t] += horizon - lo;
                }
            }
        }
        let window = horizon - warmup;

        let mut queues = BTreeMap::new();
        for (p, q) in self.queue_of.iter().enumerate() {
            if let Some(q) = q {
                let st = std::mem::take(&mut self.queues[*q]);
                queues.insert(
                    self.place_ids[p].clone(),
                    QueueMetrics {
                        mean_length: st.area / window,
                        max_length: st.max,
                        series: st.series,
                        waits: st.waits,
                        arrivals: st.arrivals,
                    },
                );
            }
        }
        let mut sinks = BTreeMap::new();
        for (p, s) in self.sinks.iter_mut().enumerate() {
            if let Some(s) = s.take() {
                sinks.insert(self.place_ids[p].clone(), s);
            }
        }
        let transitions = self
            .trans
            .iter()
            .enumerate()
            .map(|(i, tr)| {
                let busy = match tr.timing {
                    Timing::Timed { .. } => Some((self.busy_time[i] / window).clamp(0.0, 1.0)),
                    Timing::Immediate(_) => None,
                };
                (
                    tr.id.clone(),
                    TransitionMetrics {
                        firings: self.firings[i],
                        busy_fraction: busy,
                    },
                )
            })
            .collect();
        if let Some(w) = &mut self.trace {
            let _ = w.flush();
        }
        RunMetrics {
            seed: self.cfg.seed,
            warmup,
            horizon,
            sample_interval: self.cfg.sample_interval,
            sinks,
            queues,
            transitions,
            emitted: self.emitted,
            events: self.events,
            wall_clock: self.clock.elapsed(),
        }
    }
}
