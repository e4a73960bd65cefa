//! Versioned plain-text checkpoints.
//!
//! ```text
//! bidlearn-checkpoint 1
//! experiment Seq1SP2
//! epoch 300
//! log_alpha -4.5
//! policy learned
//! squash affine_tanh 0 1
//! action_dim 1
//! net policy 8 64 64 2
//! <parameters, row-major per layer, eight per line>
//! net q1 9 64 64 1
//! ...
//! end
//! ```
//!
//! `policy oracle <StrategyKind>` replaces the learned-policy block for
//! analytic strategies. Floats are written in shortest round-trip form, so
//! saving and loading is bit-exact.

use std::fmt::Write as _;
use std::path::Path;

use super::critic::CriticParams;
use super::mlp::Mlp;
use super::policy::{PolicyParams, Squash};
use crate::error::{Error, Result};
use crate::oracle::StrategyKind;
use crate::scenario::ExperimentId;

pub const MAGIC: &str = "bidlearn-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum PolicySnapshot {
    Learned(PolicyParams),
    Oracle(StrategyKind),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub experiment: Option<ExperimentId>,
    pub epoch: usize,
    pub log_alpha: Option<f64>,
    pub policy: PolicySnapshot,
    pub critics: Option<CriticParams>,
    pub target_critics: Option<CriticParams>,
}

fn write_net(out: &mut String, name: &str, net: &Mlp) {
    let sizes: Vec<String> = net.sizes().iter().map(|s| s.to_string()).collect();
    let _ = writeln!(out, "net {name} {}", sizes.join(" "));
    for chunk in net.params().chunks(8) {
        let row: Vec<String> = chunk.iter().map(|v| format!("{v:?}")).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{MAGIC} {VERSION}");
        if let Some(id) = self.experiment {
            let _ = writeln!(s, "experiment {id}");
        }
        let _ = writeln!(s, "epoch {}", self.epoch);
        if let Some(la) = self.log_alpha {
            let _ = writeln!(s, "log_alpha {la:?}");
        }
        match &self.policy {
            PolicySnapshot::Oracle(kind) => {
                let _ = writeln!(s, "policy oracle {kind:?}");
            }
            PolicySnapshot::Learned(p) => {
                let _ = writeln!(s, "policy learned");
                match p.squash {
                    Squash::AffineTanh { lo, hi } => {
                        let _ = writeln!(s, "squash affine_tanh {lo:?} {hi:?}");
                    }
                    Squash::Identity => {
                        let _ = writeln!(s, "squash identity");
                    }
                }
                let _ = writeln!(s, "action_dim {}", p.action_dim);
                write_net(&mut s, "policy", &p.trunk);
            }
        }
        if let Some(c) = &self.critics {
            write_net(&mut s, "q1", &c.q1);
            write_net(&mut s, "q2", &c.q2);
        }
        if let Some(c) = &self.target_critics {
            write_net(&mut s, "q1_target", &c.q1);
            write_net(&mut s, "q2_target", &c.q2);
        }
        s.push_str("end\n");
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        Parser::new(text).checkpoint()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

struct Parser<'a> {
    lines: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
    line_no: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            lines: text.lines().enumerate().peekable(),
            line_no: 0,
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Checkpoint {
            line: self.line_no,
            msg: msg.into(),
        }
    }

    fn next_line(&mut self) -> Result<Vec<&'a str>> {
        loop {
            let (i, l) = self.lines.next().ok_or_else(|| self.err("unexpected end of file"))?;
            self.line_no = i + 1;
            if !l.trim().is_empty() {
                return Ok(l.split_whitespace().collect());
            }
        }
    }

    fn num<T: std::str::FromStr>(&self, tok: &str) -> Result<T> {
        tok.parse().map_err(|_| self.err(format!("bad number `{tok}`")))
    }

    fn net(&mut self, header: &[&str]) -> Result<(String, Mlp)> {
        let name = header.get(1).ok_or_else(|| self.err("net without name"))?.to_string();
        let sizes = header[2..].iter().map(|t| self.num(t)).collect::<Result<Vec<usize>>>()?;
        let expected = Mlp::zeros(&sizes).map_err(|e| self.err(e.to_string()))?.n_params();
        let mut params = Vec::with_capacity(expected);
        while params.len() < expected {
            for tok in self.next_line()? {
                params.push(self.num::<f64>(tok)?);
            }
        }
        if params.len() != expected {
            return Err(self.err(format!("net {name}: {} values, expected {expected}", params.len())));
        }
        let net = Mlp::from_params(&sizes, params).map_err(|e| self.err(e.to_string()))?;
        Ok((name, net))
    }

    fn checkpoint(mut self) -> Result<Checkpoint> {
        let head = self.next_line()?;
        if head.first() != Some(&MAGIC) {
            return Err(self.err("not a bidlearn checkpoint"));
        }
        let version: u32 = self.num(head.get(1).ok_or_else(|| self.err("missing version"))?)?;
        if version != VERSION {
            return Err(self.err(format!("unsupported checkpoint version {version}")));
        }
        let mut experiment = None;
        let mut epoch = 0;
        let mut log_alpha = None;
        let mut oracle = None;
        let mut squash = None;
        let mut action_dim = None;
        let mut nets: Vec<(String, Mlp)> = Vec::new();
        loop {
            let toks = self.next_line()?;
            match toks.as_slice() {
                ["end"] => break,
                ["experiment", id] => {
                    experiment = Some(id.parse::<ExperimentId>().map_err(|e| self.err(e.to_string()))?)
                }
                ["epoch", e] => epoch = self.num(e)?,
                ["log_alpha", v] => log_alpha = Some(self.num(v)?),
                ["policy", "learned"] => {}
                ["policy", "oracle", kind] => {
                    oracle = Some(match *kind {
                        "Truthful" => StrategyKind::Truthful,
                        "Equilibrium" => StrategyKind::Equilibrium,
                        "BestResponseToTruthful" => StrategyKind::BestResponseToTruthful,
                        other => return Err(self.err(format!("unknown oracle strategy `{other}`"))),
                    })
                }
                ["squash", "identity"] => squash = Some(Squash::Identity),
                ["squash", "affine_tanh", lo, hi] => {
                    squash = Some(Squash::AffineTanh {
                        lo: self.num(lo)?,
                        hi: self.num(hi)?,
                    })
                }
                ["action_dim", d] => action_dim = Some(self.num::<usize>(d)?),
                ["net", ..] => {
                    let n = self.net(&toks)?;
                    nets.push(n);
                }
                other => return Err(self.err(format!("unexpected line `{}`", other.join(" ")))),
            }
        }
        let mut take = |name: &str| {
            nets.iter()
                .position(|(n, _)| n == name)
                .map(|i| nets.remove(i).1)
        };
        let policy = match oracle {
            Some(kind) => PolicySnapshot::Oracle(kind),
            None => {
                let trunk = take("policy").ok_or_else(|| Error::Checkpoint {
                    line: 0,
                    msg: "missing policy network".into(),
                })?;
                let action_dim = action_dim.unwrap_or(trunk.output_dim() / 2);
                if trunk.output_dim() != 2 * action_dim {
                    return Err(Error::Checkpoint {
                        line: 0,
                        msg: "policy output does not match action_dim".into(),
                    });
                }
                PolicySnapshot::Learned(PolicyParams {
                    trunk,
                    action_dim,
                    squash: squash.unwrap_or(Squash::Identity),
                })
            }
        };
        let pair = |a: Option<Mlp>, b: Option<Mlp>| match (a, b) {
            (Some(q1), Some(q2)) => Some(CriticParams { q1, q2 }),
            _ => None,
        };
        let critics = pair(take("q1"), take("q2"));
        let target_critics = pair(take("q1_target"), take("q2_target"));
        Ok(Checkpoint {
            experiment,
            epoch,
            log_alpha,
            policy,
            critics,
            target_critics,
        })
    }
}
