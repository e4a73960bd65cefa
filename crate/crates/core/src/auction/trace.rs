//! Line-delimited episode traces.
//!
//! One round per line, tab separated: round, bids, allocations, payments,
//! revealed price, sole-award flag, units held before the round.
//!
//! ```text
//! 0	0.5,0.3,0.1	1,0,0	0.5,0,0	0.5	0	0,0,0
//! 1	-,0.3,0.1	0,1,0	0,0.3,0	0.3	0	1,0,0
//! ```
//!
//! Inactive bidders are written as `-`; sole/split pairs as `sole/split`.
//! Floats use the shortest representation that parses back to the same bits.

use std::fmt::Write as _;

use super::env::{BidAction, RoundOutcome};
use crate::error::{Error, Result};

pub fn write_round(o: &RoundOutcome) -> String {
    let bids = o
        .bids
        .iter()
        .map(|b| match b {
            None => "-".to_string(),
            Some(BidAction::Single(x)) => format!("{x}"),
            Some(BidAction::SoleSplit { sole, split }) => format!("{sole}/{split}"),
        })
        .collect::<Vec<_>>()
        .join(",");
    let alloc = join(o.allocations.iter());
    let pay = join(o.payments.iter());
    let prior = join(o.prior_units.iter());
    let mut line = String::new();
    let _ = write!(
        line,
        "{}\t{}\t{}\t{}\t{}\t{}\t{}",
        o.round,
        bids,
        alloc,
        pay,
        o.revealed_price,
        u8::from(o.sole_awarded),
        prior
    );
    line
}

fn join<T: std::fmt::Display>(it: impl Iterator<Item = T>) -> String {
    it.map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

pub fn write_trace(history: &[RoundOutcome]) -> String {
    let mut s = String::new();
    for o in history {
        s.push_str(&write_round(o));
        s.push('\n');
    }
    s
}

pub fn parse_round(line: &str, line_no: usize) -> Result<RoundOutcome> {
    let err = |msg: &str| Error::Checkpoint {
        line: line_no,
        msg: format!("trace: {msg}"),
    };
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != 7 {
        return Err(err("expected 7 tab-separated columns"));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|_| err("bad number"));
    let bids = cols[1]
        .split(',')
        .map(|b| {
            if b == "-" {
                Ok(None)
            } else if let Some((s, p)) = b.split_once('/') {
                Ok(Some(BidAction::SoleSplit {
                    sole: num(s)?,
                    split: num(p)?,
                }))
            } else {
                Ok(Some(BidAction::Single(num(b)?)))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let units = |s: &str| {
        s.split(',')
            .map(|x| x.parse::<u32>().map_err(|_| err("bad unit count")))
            .collect::<Result<Vec<_>>>()
    };
    Ok(RoundOutcome {
        round: cols[0].parse().map_err(|_| err("bad round"))?,
        bids,
        allocations: units(cols[2])?,
        payments: cols[3].split(',').map(num).collect::<Result<_>>()?,
        revealed_price: num(cols[4])?,
        sole_awarded: cols[5] == "1",
        prior_units: units(cols[6])?,
    })
}

pub fn parse_trace(text: &str) -> Result<Vec<RoundOutcome>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_round(l, i + 1))
        .collect()
}
