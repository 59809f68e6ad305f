//! Episode event log and the metrics derived from it.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::safety::Binding;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    Robot,
    Human,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EventKind {
    TaskStart {
        task: usize,
        label: String,
        nominal_duration: f64,
    },
    /// Scaling applied over one control period of length `dt`.
    Alpha {
        alpha: f64,
        dt: f64,
        s: f64,
        binding: Binding,
        feasible: bool,
    },
    Separation {
        min_separation: f64,
        v_max: Option<f64>,
        human: [f64; 3],
    },
    Warning {
        code: String,
        #[serde(rename = "T_virt")]
        t_virt: f64,
        #[serde(rename = "T_rem")]
        t_rem: f64,
        text: String,
    },
    Command {
        class: Option<usize>,
        command: Option<String>,
        tokens: Vec<usize>,
        payload: Option<[f64; 3]>,
        accepted: bool,
        note: String,
    },
    Dialogue {
        speaker: Speaker,
        text: String,
    },
    Overflow {
        token: usize,
    },
    TaskDone {
        task: usize,
    },
    EpisodeEnd {
        completed: bool,
        timed_out: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

pub fn write_ndjson<W: Write>(mut writer: W, events: &[Event]) -> std::io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut writer, e)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

pub fn to_ndjson(events: &[Event]) -> String {
    let mut buf = Vec::new();
    write_ndjson(&mut buf, events).expect("writing to memory");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

pub fn read_ndjson<R: BufRead>(reader: R) -> Result<Vec<Event>, std::io::Error> {
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(std::io::Error::other)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub mode: String,
    /// Time the last task finished, or the end of the run if it timed out.
    pub execution_time: f64,
    /// Total time with `alpha <= eps_stop`.
    pub downtime: f64,
    pub warnings: usize,
    /// Smallest human-robot separation over all periods.
    pub min_separation: Option<f64>,
    pub completed: bool,
    pub timed_out: bool,
    pub tasks_completed: usize,
    pub ticks: usize,
    /// Separation floor minus integration slack that every period must
    /// respect.
    pub safety_floor: Option<f64>,
    pub max_human_speed: Option<f64>,
    #[serde(skip)]
    pub alpha_trace: Vec<f64>,
    #[serde(skip)]
    pub events: Vec<Event>,
}

impl EpisodeResult {
    pub fn ndjson(&self) -> String {
        to_ndjson(&self.events)
    }
}

/// Summarises an event log. Downtime sums the period lengths of every
/// `alpha` event at or below `eps_stop`.
pub fn compute_metrics(events: &[Event], eps_stop: f64) -> EpisodeResult {
    let mut r = EpisodeResult {
        mode: String::new(),
        execution_time: 0.0,
        downtime: 0.0,
        warnings: 0,
        min_separation: None,
        completed: false,
        timed_out: false,
        tasks_completed: 0,
        ticks: 0,
        safety_floor: None,
        max_human_speed: None,
        alpha_trace: Vec::new(),
        events: events.to_vec(),
    };
    let mut end = 0.0f64;
    let mut last_done = None;
    for e in events {
        end = end.max(e.t);
        match &e.kind {
            EventKind::Alpha { alpha, dt, .. } => {
                r.ticks += 1;
                r.alpha_trace.push(*alpha);
                if *alpha <= eps_stop {
                    r.downtime += dt;
                }
                end = end.max(e.t + dt);
            }
            EventKind::Separation { min_separation, .. } => {
                r.min_separation = Some(r.min_separation.map_or(*min_separation, |m: f64| m.min(*min_separation)));
            }
            EventKind::Warning { .. } => r.warnings += 1,
            EventKind::TaskDone { .. } => {
                r.tasks_completed += 1;
                last_done = Some(e.t);
            }
            EventKind::EpisodeEnd { completed, timed_out } => {
                r.completed = *completed;
                r.timed_out = *timed_out;
            }
            _ => {}
        }
    }
    r.execution_time = if r.completed { last_done.unwrap_or(0.0) } else { end };
    r
}
