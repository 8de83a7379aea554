//! Versioned binary checkpoints: a magic tag, a format version, then
//! length-prefixed named sections. Numbers are little-endian; tensors are
//! row-major `f64`.

use sha2::{Digest, Sha256};

use siren_core::graph::BayesNet;
use siren_core::model::{Model, Variant};
use siren_core::rng::seeded;
use siren_core::train::{Adam, EpochRecord, LrSchedule, TrainConfig, Trainer};
use siren_core::Tensor;

use crate::config;
use crate::gbn::{parse_gbn, serialize_gbn, GbnError};

pub const MAGIC: &[u8; 8] = b"SIRENCKP";
pub const VERSION: u32 = 1;

const SECTIONS: [&str; 9] = ["config", "variant", "graph", "graph_hash", "meta", "params", "adam_m", "adam_v", "best_params"];
const HISTORY: &str = "history";

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("not a checkpoint file")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("truncated checkpoint")]
    Truncated,
    #[error("expected section `{expected}`, found `{found}`")]
    Section { expected: String, found: String },
    #[error("malformed section `{0}`")]
    Malformed(&'static str),
    #[error("graph hash mismatch")]
    GraphHash,
    #[error("parameter `{0}` does not match the model")]
    Param(String),
    #[error("invalid config: {0}")]
    Config(#[from] config::ConfigError),
    #[error("invalid graph: {0}")]
    Graph(#[from] GbnError),
    #[error(transparent)]
    Model(#[from] siren_core::model::ModelError),
    #[error(transparent)]
    Train(#[from] siren_core::train::TrainError),
}

/// A model together with everything needed to continue training it.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub graph: BayesNet,
    pub model: Model,
    pub trainer: Trainer,
}

/// SHA-256 of the canonical text of `g`.
pub fn graph_hash(g: &BayesNet) -> [u8; 32] {
    Sha256::digest(serialize_gbn(g).as_bytes()).into()
}

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.0.extend_from_slice(s.as_bytes());
    }
    fn tensors(&mut self, names: &[String], ts: &[&Tensor]) {
        self.u32(ts.len() as u32);
        for (n, t) in names.iter().zip(ts) {
            self.str(n);
            self.u32(t.rows() as u32);
            self.u32(t.cols() as u32);
            for &x in t.data() {
                self.f64(x);
            }
        }
    }
    fn section(&mut self, name: &str, payload: Writer) {
        self.str(name);
        self.u64(payload.0.len() as u64);
        self.0.extend_from_slice(&payload.0);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or(CheckpointError::Truncated)?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }
    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn str(&mut self) -> Result<&'a str, CheckpointError> {
        let n = self.u32()? as usize;
        std::str::from_utf8(self.take(n)?).map_err(|_| CheckpointError::Truncated)
    }
    fn tensors(&mut self) -> Result<Vec<(String, Tensor)>, CheckpointError> {
        let n = self.u32()? as usize;
        (0..n)
            .map(|_| {
                let name = self.str()?.to_string();
                let (r, c) = (self.u32()? as usize, self.u32()? as usize);
                let data = (0..r * c).map(|_| self.f64()).collect::<Result<Vec<_>, _>>()?;
                Ok((name, Tensor::from_vec(r, c, data)))
            })
            .collect()
    }
    fn section(&mut self, expected: &str) -> Result<Reader<'a>, CheckpointError> {
        let found = self.str()?;
        if found != expected {
            return Err(CheckpointError::Section { expected: expected.into(), found: found.into() });
        }
        let n = self.u64()? as usize;
        Ok(Reader { buf: self.take(n)?, pos: 0 })
    }
    fn done(&self, name: &'static str) -> Result<(), CheckpointError> {
        if self.pos == self.buf.len() {
            Ok(())
        } else {
            Err(CheckpointError::Malformed(name))
        }
    }
}

impl Checkpoint {
    pub fn new(graph: BayesNet, model: Model, trainer: Trainer) -> Self {
        Self { graph, model, trainer }
    }

    pub fn variant(&self) -> Variant {
        self.model.variant()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer(MAGIC.to_vec());
        w.u32(VERSION);
        let t = &self.trainer;
        let names = self.model.param_names();
        let payload = |f: &dyn Fn(&mut Writer)| {
            let mut p = Writer(Vec::new());
            f(&mut p);
            p
        };
        w.section("config", payload(&|p| p.0.extend_from_slice(config::to_text(&t.config).as_bytes())));
        w.section("variant", payload(&|p| p.0.extend_from_slice(self.variant().as_str().as_bytes())));
        let gbn = serialize_gbn(&self.graph);
        w.section("graph", payload(&|p| p.0.extend_from_slice(gbn.as_bytes())));
        w.section("graph_hash", payload(&|p| p.0.extend_from_slice(&graph_hash(&self.graph))));
        w.section(
            "meta",
            payload(&|p| {
                p.u64(t.epoch as u64);
                p.f64(t.best_loss);
                p.u64(t.since_best as u64);
                p.u64(t.adam.t);
                p.f64(t.adam.beta1);
                p.f64(t.adam.beta2);
                p.f64(t.adam.eps);
                p.f64(t.schedule.lr);
                p.f64(t.schedule.best);
                p.u64(t.schedule.bad_epochs as u64);
            }),
        );
        w.section("params", payload(&|p| p.tensors(&names, &self.model.params())));
        w.section("adam_m", payload(&|p| p.tensors(&names, &t.adam.m.iter().collect::<Vec<_>>())));
        w.section("adam_v", payload(&|p| p.tensors(&names, &t.adam.v.iter().collect::<Vec<_>>())));
        w.section("best_params", payload(&|p| p.tensors(&names, &t.best_params.iter().collect::<Vec<_>>())));
        w.section(
            HISTORY,
            payload(&|p| {
                p.u64(t.history.len() as u64);
                for r in &t.history {
                    p.u64(r.epoch as u64);
                    p.f64(r.loss);
                    p.f64(r.lr);
                    p.f64(r.best_loss);
                }
            }),
        );
        w.0
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        if bytes.len() < 12 || &bytes[..8] != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let mut r = Reader { buf: bytes, pos: 8 };
        let version = r.u32()?;
        if version != VERSION {
            return Err(CheckpointError::Version(version));
        }
        let text = |r: Reader<'_>, name: &'static str| std::str::from_utf8(r.buf).map(str::to_string).map_err(|_| CheckpointError::Malformed(name));

        let mut cfg = TrainConfig::default();
        config::apply_text(&mut cfg, &text(r.section(SECTIONS[0])?, "config")?)?;
        let variant: Variant = text(r.section(SECTIONS[1])?, "variant")?.parse().map_err(|_| CheckpointError::Malformed("variant"))?;
        let gbn = text(r.section(SECTIONS[2])?, "graph")?;
        let graph = parse_gbn(&gbn)?;
        let hash = r.section(SECTIONS[3])?;
        if hash.buf != graph_hash(&graph) || serialize_gbn(&graph) != gbn {
            return Err(CheckpointError::GraphHash);
        }

        let mut meta = r.section(SECTIONS[4])?;
        let epoch = meta.u64()? as usize;
        let best_loss = meta.f64()?;
        let since_best = meta.u64()? as usize;
        let adam_t = meta.u64()?;
        let (beta1, beta2, eps) = (meta.f64()?, meta.f64()?, meta.f64()?);
        let (lr, sched_best, bad_epochs) = (meta.f64()?, meta.f64()?, meta.u64()? as usize);
        meta.done("meta")?;

        let mut model = Model::new(variant, &graph, &cfg.model_config(), &mut seeded(0))?;
        let names = model.param_names();
        let shapes: Vec<(usize, usize)> = model.params().iter().map(|t| t.shape()).collect();
        let mut read_set = |name: &'static str| -> Result<Vec<Tensor>, CheckpointError> {
            let mut s = r.section(name)?;
            let ts = s.tensors()?;
            s.done(name)?;
            if ts.len() != names.len() {
                return Err(CheckpointError::Malformed(name));
            }
            ts.into_iter()
                .zip(names.iter().zip(&shapes))
                .map(|((n, t), (expect, &shape))| if &n == expect && t.shape() == shape { Ok(t) } else { Err(CheckpointError::Param(n)) })
                .collect()
        };
        let params = read_set(SECTIONS[5])?;
        let m = read_set(SECTIONS[6])?;
        let v = read_set(SECTIONS[7])?;
        let best_params = read_set(SECTIONS[8])?;
        for (slot, t) in model.params_mut().into_iter().zip(params) {
            *slot = t;
        }

        let mut hist = r.section(HISTORY)?;
        let n = hist.u64()? as usize;
        let history = (0..n)
            .map(|_| Ok(EpochRecord { epoch: hist.u64()? as usize, loss: hist.f64()?, lr: hist.f64()?, best_loss: hist.f64()? }))
            .collect::<Result<Vec<_>, CheckpointError>>()?;
        hist.done("history")?;
        if r.pos != bytes.len() {
            return Err(CheckpointError::Malformed("trailing bytes"));
        }

        let mut trainer = Trainer::new(&model, cfg)?;
        trainer.adam = Adam { beta1, beta2, eps, t: adam_t, m, v };
        trainer.schedule = LrSchedule { lr, best: sched_best, bad_epochs, ..trainer.schedule };
        trainer.epoch = epoch;
        trainer.best_loss = best_loss;
        trainer.best_params = best_params;
        trainer.since_best = since_best;
        trainer.history = history;
        Ok(Self { graph, model, trainer })
    }

    /// Fails unless `g` is the network this checkpoint was trained on.
    pub fn check_graph(&self, g: &BayesNet) -> Result<(), CheckpointError> {
        if graph_hash(g) == graph_hash(&self.graph) {
            Ok(())
        } else {
            Err(CheckpointError::GraphHash)
        }
    }
}
