//! Pinned CSV metrics format.
//!
//! One row per (trial, round); header and column order are fixed, floats are
//! written in Rust's shortest round-trip form so a parse of the emitted file
//! reproduces every value exactly.

use std::fmt::Write as _;
use std::path::Path;

use crate::{HarnessError, Result};

pub const CSV_HEADER: &str = "trial,round,avg_reward,greedy_ratio,messages_cum,activations_cum,regret_avg";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub trial: u64,
    pub round: u64,
    /// Running average reward through this round.
    pub avg_reward: f64,
    /// Running average divided by the offline greedy per-round value.
    pub greedy_ratio: f64,
    pub messages_cum: u64,
    pub activations_cum: u64,
    /// Running (1 - 1/e)-regret per round.
    pub regret_avg: f64,
}

/// Render rows to the pinned format. Refuses an empty record set.
pub fn csv_string(rows: &[MetricsRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(HarnessError::Invalid("refusing to write an empty CSV".into()));
    }
    let mut out = String::with_capacity(rows.len() * 64 + CSV_HEADER.len() + 1);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in rows {
        writeln!(
            &mut out,
            "{},{},{},{},{},{},{}",
            row.trial,
            row.round,
            row.avg_reward,
            row.greedy_ratio,
            row.messages_cum,
            row.activations_cum,
            row.regret_avg
        )
        .expect("string writes cannot fail");
    }
    Ok(out)
}

pub fn write_csv(rows: &[MetricsRow], path: &Path) -> Result<()> {
    let text = csv_string(rows)?;
    std::fs::write(path, text).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Parse a file in the pinned format (used by the round-trip checks).
pub fn parse_csv(text: &str) -> Result<Vec<MetricsRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(header) if header == CSV_HEADER => {}
        other => {
            return Err(HarnessError::Invalid(format!(
                "bad CSV header: {other:?}"
            )))
        }
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(HarnessError::Invalid(format!(
                "row {}: expected 7 fields, got {}",
                idx + 1,
                fields.len()
            )));
        }
        let parse_err = |what: &str| HarnessError::Invalid(format!("row {}: bad {what}", idx + 1));
        rows.push(MetricsRow {
            trial: fields[0].parse().map_err(|_| parse_err("trial"))?,
            round: fields[1].parse().map_err(|_| parse_err("round"))?,
            avg_reward: fields[2].parse().map_err(|_| parse_err("avg_reward"))?,
            greedy_ratio: fields[3].parse().map_err(|_| parse_err("greedy_ratio"))?,
            messages_cum: fields[4].parse().map_err(|_| parse_err("messages_cum"))?,
            activations_cum: fields[5].parse().map_err(|_| parse_err("activations_cum"))?,
            regret_avg: fields[6].parse().map_err(|_| parse_err("regret_avg"))?,
        });
    }
    Ok(rows)
}
