use std::fmt::Write as _;

use crate::auction::{AuctionKind, AuctionSettings};
use crate::error::{Error, Result};
use crate::scenario::ExperimentId;

/// Name of an action dimension in reports.
pub(crate) fn component_name(settings: &AuctionSettings, round: usize, dim: usize) -> &'static str {
    match (settings.kind, round, dim) {
        (AuctionKind::SplitAward, 0, 0) => "sole",
        (AuctionKind::SplitAward, _, _) => "split",
        _ => "bid",
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct L2Entry {
    /// One-based round.
    pub round: usize,
    pub component: String,
    pub value: f64,
}

impl L2Entry {
    pub fn key(&self) -> String {
        format!("l2_round{}_{}", self.round, self.component)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub experiment: ExperimentId,
    pub optimal_reward: f64,
    pub achieved_reward: f64,
    pub achieved_se: f64,
    /// `optimal_reward − achieved_reward`.
    pub utility_difference: f64,
    pub l2_per_round: Vec<L2Entry>,
    pub l2_value_function: Option<f64>,
    /// Temperature of the evaluated critics, reported next to the value distance.
    pub alpha: Option<f64>,
    pub n_profiles: usize,
    pub seed: u64,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| x.to_string())
}

impl EvalReport {
    pub fn l2(&self, round: usize, component: &str) -> Option<f64> {
        self.l2_per_round
            .iter()
            .find(|e| e.round == round && e.component == component)
            .map(|e| e.value)
    }

    /// `key = value` lines.
    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "experiment = {}", self.experiment);
        let _ = writeln!(s, "optimal_reward = {}", self.optimal_reward);
        let _ = writeln!(s, "achieved_reward = {}", self.achieved_reward);
        let _ = writeln!(s, "achieved_se = {}", self.achieved_se);
        let _ = writeln!(s, "utility_difference = {}", self.utility_difference);
        for e in &self.l2_per_round {
            let _ = writeln!(s, "{} = {}", e.key(), e.value);
        }
        let _ = writeln!(s, "l2_value_function = {}", opt(self.l2_value_function));
        let _ = writeln!(s, "alpha = {}", opt(self.alpha));
        let _ = writeln!(s, "n_profiles = {}", self.n_profiles);
        let _ = writeln!(s, "seed = {}", self.seed);
        s
    }

    pub fn parse_key_value(text: &str) -> Result<Self> {
        let bad = |m: String| Error::Config(format!("eval report: {m}"));
        let mut map = std::collections::BTreeMap::new();
        let mut l2 = Vec::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once(" = ")
                .ok_or_else(|| bad(format!("malformed line `{line}`")))?;
            if let Some(rest) = k.strip_prefix("l2_round") {
                let (round, comp) = rest.split_once('_').ok_or_else(|| bad(format!("bad key `{k}`")))?;
                l2.push(L2Entry {
                    round: round.parse().map_err(|_| bad(format!("bad key `{k}`")))?,
                    component: comp.to_string(),
                    value: v.parse().map_err(|_| bad(format!("bad value `{v}`")))?,
                });
            } else {
                map.insert(k.to_string(), v.to_string());
            }
        }
        let get = |k: &str| map.get(k).ok_or_else(|| bad(format!("missing `{k}`")));
        let num = |k: &str| -> Result<f64> { get(k)?.parse().map_err(|_| bad(format!("bad `{k}`"))) };
        let optnum = |k: &str| -> Result<Option<f64>> {
            match get(k)?.as_str() {
                "-" => Ok(None),
                v => v.parse().map(Some).map_err(|_| bad(format!("bad `{k}`"))),
            }
        };
        Ok(Self {
            experiment: get("experiment")?.parse()?,
            optimal_reward: num("optimal_reward")?,
            achieved_reward: num("achieved_reward")?,
            achieved_se: num("achieved_se")?,
            utility_difference: num("utility_difference")?,
            l2_per_round: l2,
            l2_value_function: optnum("l2_value_function")?,
            alpha: optnum("alpha")?,
            n_profiles: get("n_profiles")?.parse().map_err(|_| bad("bad `n_profiles`".into()))?,
            seed: get("seed")?.parse().map_err(|_| bad("bad `seed`".into()))?,
        })
    }

    /// Header for [`EvalReport::table_row`]. Per-round distances are packed
    /// into one `key=value;...` column so rows of different experiments align.
    pub const TABLE_HEADER: &'static str =
        "experiment\toptimal_reward\tachieved_reward\tachieved_se\tutility_difference\tl2_per_round\tl2_value_function\talpha\tn_profiles\tseed";

    pub fn table_row(&self) -> String {
        let l2: Vec<String> = self.l2_per_round.iter().map(|e| format!("{}={}", e.key(), e.value)).collect();
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.experiment,
            self.optimal_reward,
            self.achieved_reward,
            self.achieved_se,
            self.utility_difference,
            if l2.is_empty() { "-".to_string() } else { l2.join(";") },
            opt(self.l2_value_function),
            opt(self.alpha),
            self.n_profiles,
            self.seed
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_value_round_trip() {
        let r = EvalReport {
            experiment: ExperimentId::SplitTruthful2,
            optimal_reward: 0.9,
            achieved_reward: 0.88,
            achieved_se: 0.004,
            utility_difference: 0.9 - 0.88,
            l2_per_round: vec![
                L2Entry { round: 1, component: "sole".into(), value: 0.0 },
                L2Entry { round: 1, component: "split".into(), value: 0.012 },
                L2Entry { round: 2, component: "split".into(), value: 0.03 },
            ],
            l2_value_function: Some(0.013),
            alpha: None,
            n_profiles: 4000,
            seed: 7,
        };
        assert_eq!(EvalReport::parse_key_value(&r.to_key_value()).unwrap(), r);
        assert_eq!(r.l2(1, "split"), Some(0.012));
        assert_eq!(
            r.table_row().split('\t').count(),
            EvalReport::TABLE_HEADER.split('\t').count()
        );
    }
}
