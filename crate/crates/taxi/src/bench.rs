//! Wall-clock comparison of hierarchical, options-augmented and flat
//! planning.

use std::io::Write;
use std::time::{Duration, Instant};

use serde::Serialize;
use skillsym::planner::{answer_query, findplan, PlanMethod, PlanQuery};
use skillsym::{Hierarchy, Mdp};

use crate::TaxiError;

/// Mean timings for one query, in milliseconds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchmarkRow {
    pub query: String,
    /// Level the hierarchical planner solved at; `None` if it found no plan.
    pub level: Option<usize>,
    pub match_ms: f64,
    pub plan_ms: f64,
    /// `match_ms + plan_ms`.
    pub hier_ms: f64,
    pub options_ms: f64,
    pub flat_ms: f64,
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

#[derive(Default)]
struct Totals {
    matching: Duration,
    planning: Duration,
    options: Duration,
    flat: Duration,
}

/// Times the three modes on every query. Modes are interleaved within each
/// repetition so drift in machine load affects them alike; one warm-up
/// round per query is discarded. All three use value iteration, so the
/// only difference between modes is the model planned over. `smdp` is the
/// base MDP with every option added as an action.
pub fn run_benchmark(
    h: &Hierarchy,
    smdp: &Mdp,
    queries: &[(String, PlanQuery)],
    repetitions: usize,
) -> Result<Vec<BenchmarkRow>, TaxiError> {
    const METHOD: PlanMethod = PlanMethod::ValueIteration;
    let reps = repetitions.max(1);
    let mut rows = Vec::with_capacity(queries.len());
    for (name, q) in queries {
        let mut level = None;
        let mut t = Totals::default();
        for rep in 0..=reps {
            let answer = answer_query(h, q, METHOD)?;
            let t0 = Instant::now();
            let with_options = findplan(smdp, q.start(), q.goal(), METHOD);
            let t1 = Instant::now();
            let flat = findplan(h.base(), q.start(), q.goal(), METHOD);
            let t2 = Instant::now();
            std::hint::black_box((&with_options, &flat));
            if rep == 0 {
                level = answer.as_ref().map(|a| a.level);
                continue;
            }
            if let Some(a) = &answer {
                t.matching += a.record.match_time();
                t.planning += a.record.plan_time();
            }
            t.options += t1 - t0;
            t.flat += t2 - t1;
        }
        let n = reps as f64;
        let match_ms = ms(t.matching) / n;
        let plan_ms = ms(t.planning) / n;
        rows.push(BenchmarkRow {
            query: name.clone(),
            level,
            match_ms,
            plan_ms,
            hier_ms: match_ms + plan_ms,
            options_ms: ms(t.options) / n,
            flat_ms: ms(t.flat) / n,
        });
    }
    Ok(rows)
}

pub const CSV_HEADER: &str = "query,level,match_ms,plan_ms,hier_ms,options_ms,flat_ms";

pub fn write_csv<W: Write>(out: W, rows: &[BenchmarkRow]) -> Result<(), TaxiError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write>(mut out: W, rows: &[BenchmarkRow]) -> Result<(), TaxiError> {
    serde_json::to_writer_pretty(&mut out, rows)?;
    writeln!(out)?;
    Ok(())
}
