//! Architecture registry: one configuration type covering every trainable
//! surrogate, with a uniform forward signature.

use std::fmt;
use std::str::FromStr;

use magop_tensor::{Tape, Tensor, Var};

use crate::error::{Error, Result};
use crate::operators::{Bound, DeepOnetConfig, FnoConfig, KvList, ParamSpec, WnoConfig};
use crate::recurrent::{Cell, DecodeMode, EdLstmConfig, RecurrentConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Arch {
    DeepOnet,
    Fno,
    Rifno,
    Wno,
    Rnn,
    Lstm,
    Gru,
    EdLstm,
}

impl Arch {
    pub const ALL: [Arch; 8] = [
        Arch::DeepOnet,
        Arch::Fno,
        Arch::Rifno,
        Arch::Wno,
        Arch::Rnn,
        Arch::Lstm,
        Arch::Gru,
        Arch::EdLstm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Arch::DeepOnet => "deeponet",
            Arch::Fno => "fno",
            Arch::Rifno => "rifno",
            Arch::Wno => "wno",
            Arch::Rnn => "rnn",
            Arch::Lstm => "lstm",
            Arch::Gru => "gru",
            Arch::EdLstm => "edlstm",
        }
    }

    /// Recurrent baselines treat the curve set as the feature axis.
    pub fn is_recurrent(self) -> bool {
        matches!(self, Arch::Rnn | Arch::Lstm | Arch::Gru | Arch::EdLstm)
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Arch::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Param(format!("unknown architecture {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelConfig {
    DeepOnet(DeepOnetConfig),
    Fno(FnoConfig),
    Wno(WnoConfig),
    Recurrent(RecurrentConfig),
    EdLstm(EdLstmConfig),
}

/// What the forward pass should do with targets.
#[derive(Debug, Clone, Copy)]
pub enum Pass<'a> {
    Train { target: &'a Tensor },
    Eval,
}

impl ModelConfig {
    /// Default hyperparameters for `arch` on sequences of length `t_len`;
    /// `features` sizes the recurrent feature axis.
    pub fn default_for(arch: Arch, t_len: usize, features: usize) -> Self {
        match arch {
            Arch::DeepOnet => ModelConfig::DeepOnet(DeepOnetConfig::new(t_len)),
            Arch::Fno => ModelConfig::Fno(FnoConfig::new(t_len, true)),
            Arch::Rifno => ModelConfig::Fno(FnoConfig::new(t_len, false)),
            Arch::Wno => ModelConfig::Wno(WnoConfig::new(t_len)),
            Arch::Rnn => ModelConfig::Recurrent(RecurrentConfig::new(Cell::Rnn, features, t_len)),
            Arch::Lstm => ModelConfig::Recurrent(RecurrentConfig::new(Cell::Lstm, features, t_len)),
            Arch::Gru => ModelConfig::Recurrent(RecurrentConfig::new(Cell::Gru, features, t_len)),
            Arch::EdLstm => ModelConfig::EdLstm(EdLstmConfig::new(features, t_len)),
        }
    }

    pub fn arch(&self) -> Arch {
        match self {
            ModelConfig::DeepOnet(_) => Arch::DeepOnet,
            ModelConfig::Fno(c) if c.use_t => Arch::Fno,
            ModelConfig::Fno(_) => Arch::Rifno,
            ModelConfig::Wno(_) => Arch::Wno,
            ModelConfig::Recurrent(c) => match c.cell {
                Cell::Rnn => Arch::Rnn,
                Cell::Lstm => Arch::Lstm,
                Cell::Gru => Arch::Gru,
            },
            ModelConfig::EdLstm(_) => Arch::EdLstm,
        }
    }

    pub fn t_len(&self) -> usize {
        match self {
            ModelConfig::DeepOnet(c) => c.t_len,
            ModelConfig::Fno(c) => c.t_len,
            ModelConfig::Wno(c) => c.t_len,
            ModelConfig::Recurrent(c) => c.t_len,
            ModelConfig::EdLstm(c) => c.t_len,
        }
    }

    /// Fixed batch width of recurrent models; `None` for operators.
    pub fn features(&self) -> Option<usize> {
        match self {
            ModelConfig::Recurrent(c) => Some(c.features),
            ModelConfig::EdLstm(c) => Some(c.features),
            _ => None,
        }
    }

    pub fn param_specs(&self) -> Result<Vec<ParamSpec>> {
        Ok(match self {
            ModelConfig::DeepOnet(c) => c.param_specs(),
            ModelConfig::Fno(c) => {
                c.validate()?;
                c.param_specs()
            }
            ModelConfig::Wno(c) => c.param_specs()?,
            ModelConfig::Recurrent(c) => c.param_specs(),
            ModelConfig::EdLstm(c) => c.param_specs(),
        })
    }

    /// Closed-form parameter count for the configuration.
    pub fn param_count(&self) -> Result<usize> {
        Ok(match self {
            ModelConfig::DeepOnet(c) => c.param_count(),
            ModelConfig::Fno(c) => c.param_count(),
            ModelConfig::Wno(c) => c.param_count()?,
            ModelConfig::Recurrent(c) => c.param_count(),
            ModelConfig::EdLstm(c) => c.param_count(),
        })
    }

    /// Predicted (scaled) `B` of shape `[batch, T]` from scaled `h: [batch, T]`.
    pub fn forward(&self, tape: &mut Tape, p: &Bound, h: &Tensor, t: &[f64], pass: Pass<'_>) -> Result<Var> {
        match self {
            ModelConfig::DeepOnet(c) => c.forward(tape, p, h, t),
            ModelConfig::Fno(c) => c.forward(tape, p, h, t),
            ModelConfig::Wno(c) => c.forward(tape, p, h, t),
            ModelConfig::Recurrent(c) => c.forward(tape, p, h),
            ModelConfig::EdLstm(c) => match pass {
                Pass::Train { target } => c.forward(tape, p, h, Some(target), DecodeMode::TeacherForced),
                Pass::Eval => c.forward(tape, p, h, None, DecodeMode::Autoregressive),
            },
        }
    }

    pub fn to_kv(&self) -> KvList {
        let mut kv = KvList::default();
        kv.push("arch", self.arch());
        match self {
            ModelConfig::DeepOnet(c) => c.to_kv(&mut kv),
            ModelConfig::Fno(c) => c.to_kv(&mut kv),
            ModelConfig::Wno(c) => c.to_kv(&mut kv),
            ModelConfig::Recurrent(c) => c.to_kv(&mut kv),
            ModelConfig::EdLstm(c) => c.to_kv(&mut kv),
        }
        kv
    }

    pub fn from_kv(kv: &KvList) -> Result<Self> {
        let arch: Arch = kv.require::<String>("arch")?.parse()?;
        Ok(match arch {
            Arch::DeepOnet => ModelConfig::DeepOnet(DeepOnetConfig::from_kv(kv)?),
            Arch::Fno | Arch::Rifno => {
                let c = FnoConfig::from_kv(kv)?;
                if c.use_t != (arch == Arch::Fno) {
                    return Err(Error::Format(format!("use_t = {} contradicts arch {arch}", c.use_t)));
                }
                ModelConfig::Fno(c)
            }
            Arch::Wno => ModelConfig::Wno(WnoConfig::from_kv(kv)?),
            Arch::Rnn => ModelConfig::Recurrent(RecurrentConfig::from_kv(Cell::Rnn, kv)?),
            Arch::Lstm => ModelConfig::Recurrent(RecurrentConfig::from_kv(Cell::Lstm, kv)?),
            Arch::Gru => ModelConfig::Recurrent(RecurrentConfig::from_kv(Cell::Gru, kv)?),
            Arch::EdLstm => ModelConfig::EdLstm(EdLstmConfig::from_kv(kv)?),
        })
    }
}
