//! Flat `key = value` configuration files. `#` starts a comment; unset
//! keys keep their defaults.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::geometry::{Interval, TransformRanges};
use crate::nn::{Hyperparameters, TrainConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: {key} = {value:?} out of range ({reason})")]
    ValueOutOfRange { line: usize, key: String, value: String, reason: String },
    #[error("line {line}: {detail}")]
    Parse { line: usize, detail: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub m: usize,
    pub k: usize,
    pub w: usize,
    pub h: usize,
    pub backbone: Vec<usize>,
    pub head: Vec<usize>,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: Option<u64>,
    pub voxel_size: f64,
    pub chunk_size: usize,
    pub input_scale: f64,
    pub include_self: bool,
    pub global_per_streamline: bool,
    pub flip_align_context: bool,
    pub class_weighting: bool,
    pub samples_per_brain: usize,
    pub val_fraction: f64,
    pub tir_threshold: usize,
    pub noise_sigma: f64,
    pub sta: TransformRanges,
}

impl Default for Config {
    fn default() -> Self {
        let hy = Hyperparameters::default();
        let tc = TrainConfig::default();
        Self {
            m: hy.m,
            k: hy.k,
            w: hy.w,
            h: hy.h,
            backbone: hy.backbone,
            head: hy.head,
            lr: tc.lr,
            beta1: tc.beta1,
            beta2: tc.beta2,
            eps: tc.eps,
            epochs: tc.epochs,
            batch_size: tc.batch_size,
            seed: None,
            voxel_size: 2.0,
            chunk_size: tc.chunk_size,
            input_scale: hy.input_scale,
            include_self: hy.include_self,
            global_per_streamline: hy.global_per_streamline,
            flip_align_context: hy.flip_align_context,
            class_weighting: tc.class_weighting,
            samples_per_brain: tc.samples_per_brain,
            val_fraction: 0.0,
            tir_threshold: 50,
            noise_sigma: 0.5,
            sta: TransformRanges::default(),
        }
    }
}

struct Ctx<'a> {
    line: usize,
    key: &'a str,
    value: &'a str,
}

impl Ctx<'_> {
    fn range(&self, reason: &str) -> ConfigError {
        ConfigError::ValueOutOfRange {
            line: self.line,
            key: self.key.to_string(),
            value: self.value.to_string(),
            reason: reason.to_string(),
        }
    }

    fn parse_err(&self, what: &str) -> ConfigError {
        ConfigError::Parse { line: self.line, detail: format!("{}: expected {what}, got {:?}", self.key, self.value) }
    }

    fn int(&self, min: i64) -> Result<usize, ConfigError> {
        let v: i64 = self.value.parse().map_err(|_| self.parse_err("integer"))?;
        if v < min {
            return Err(self.range(&format!("must be >= {min}")));
        }
        Ok(v as usize)
    }

    fn float(&self) -> Result<f64, ConfigError> {
        let v: f64 = self.value.parse().map_err(|_| self.parse_err("number"))?;
        if !v.is_finite() {
            return Err(self.range("must be finite"));
        }
        Ok(v)
    }

    fn float_where(&self, ok: impl Fn(f64) -> bool, reason: &str) -> Result<f64, ConfigError> {
        let v = self.float()?;
        if ok(v) { Ok(v) } else { Err(self.range(reason)) }
    }

    fn boolean(&self) -> Result<bool, ConfigError> {
        match self.value {
            "true" | "1" => Ok(true),
            "false" | "0" => Ok(false),
            _ => Err(self.parse_err("true or false")),
        }
    }

    fn widths(&self) -> Result<Vec<usize>, ConfigError> {
        if self.value.is_empty() {
            return Ok(Vec::new());
        }
        self.value
            .split(',')
            .map(|s| {
                let v: i64 = s.trim().parse().map_err(|_| self.parse_err("comma-separated integers"))?;
                if v < 1 {
                    return Err(self.range("layer widths must be >= 1"));
                }
                Ok(v as usize)
            })
            .collect()
    }

    fn interval(&self, scale: bool) -> Result<Interval, ConfigError> {
        let (a, b) = self.value.split_once(',').ok_or_else(|| self.parse_err("lo,hi"))?;
        let lo: f64 = a.trim().parse().map_err(|_| self.parse_err("lo,hi"))?;
        let hi: f64 = b.trim().parse().map_err(|_| self.parse_err("lo,hi"))?;
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(self.range("need finite lo <= hi"));
        }
        if scale && lo <= -1.0 {
            return Err(self.range("scale must stay above -1"));
        }
        Ok(Interval::new(lo, hi))
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut c = Config::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::Parse { line: i + 1, detail: format!("expected key = value, got {line:?}") })?;
            let x = Ctx { line: i + 1, key: key.trim(), value: value.trim() };
            c.set(&x)?;
        }
        Ok(c)
    }

    fn set(&mut self, x: &Ctx) -> Result<(), ConfigError> {
        match x.key {
            "m" => self.m = x.int(2)?,
            "k" => self.k = x.int(0)?,
            "w" => self.w = x.int(0)?,
            "h" => self.h = x.int(1)?,
            "backbone" => {
                self.backbone = x.widths()?;
                if self.backbone.is_empty() {
                    return Err(x.range("backbone needs at least one layer"));
                }
            }
            "head" => self.head = x.widths()?,
            "lr" => self.lr = x.float_where(|v| v > 0.0, "must be > 0")?,
            "beta1" => self.beta1 = x.float_where(|v| (0.0..1.0).contains(&v), "must be in [0, 1)")?,
            "beta2" => self.beta2 = x.float_where(|v| (0.0..1.0).contains(&v), "must be in [0, 1)")?,
            "eps" => self.eps = x.float_where(|v| v > 0.0, "must be > 0")?,
            "epochs" => self.epochs = x.int(0)?,
            "batch_size" | "batch" => self.batch_size = x.int(1)?,
            "seed" => {
                self.seed = Some(x.value.parse().map_err(|_| x.parse_err("unsigned integer"))?);
            }
            "voxel_size" => self.voxel_size = x.float_where(|v| v > 0.0, "must be > 0")?,
            "chunk_size" => self.chunk_size = x.int(1)?,
            "input_scale" => self.input_scale = x.float_where(|v| v > 0.0, "must be > 0")?,
            "include_self" => self.include_self = x.boolean()?,
            "global_per_streamline" => self.global_per_streamline = x.boolean()?,
            "flip_align_context" => self.flip_align_context = x.boolean()?,
            "class_weighting" => self.class_weighting = x.boolean()?,
            "samples_per_brain" => self.samples_per_brain = x.int(0)?,
            "val_fraction" => self.val_fraction = x.float_where(|v| (0.0..1.0).contains(&v), "must be in [0, 1)")?,
            "tir_threshold" => self.tir_threshold = x.int(0)?,
            "noise_sigma" => self.noise_sigma = x.float_where(|v| v >= 0.0, "must be >= 0")?,
            "sta.rot_lr" => self.sta.rot_lr = x.interval(false)?,
            "sta.rot_ap" => self.sta.rot_ap = x.interval(false)?,
            "sta.rot_si" => self.sta.rot_si = x.interval(false)?,
            "sta.trans_x" => self.sta.trans[0] = x.interval(false)?,
            "sta.trans_y" => self.sta.trans[1] = x.interval(false)?,
            "sta.trans_z" => self.sta.trans[2] = x.interval(false)?,
            "sta.scale_x" => self.sta.scale[0] = x.interval(true)?,
            "sta.scale_y" => self.sta.scale[1] = x.interval(true)?,
            "sta.scale_z" => self.sta.scale[2] = x.interval(true)?,
            _ => return Err(ConfigError::UnknownKey { line: x.line, key: x.key.to_string() }),
        }
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, ConfigError> {
        Self::parse(&fs::read_to_string(path)?)
    }

    /// Text that parses back to `self`.
    pub fn to_text(&self) -> String {
        let join = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let iv = |i: Interval| format!("{:?},{:?}", i.lo, i.hi);
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").unwrap();
        kv("m", self.m.to_string());
        kv("k", self.k.to_string());
        kv("w", self.w.to_string());
        kv("h", self.h.to_string());
        kv("backbone", join(&self.backbone));
        kv("head", join(&self.head));
        kv("lr", format!("{:?}", self.lr));
        kv("beta1", format!("{:?}", self.beta1));
        kv("beta2", format!("{:?}", self.beta2));
        kv("eps", format!("{:?}", self.eps));
        kv("epochs", self.epochs.to_string());
        kv("batch_size", self.batch_size.to_string());
        if let Some(seed) = self.seed {
            kv("seed", seed.to_string());
        }
        kv("voxel_size", format!("{:?}", self.voxel_size));
        kv("chunk_size", self.chunk_size.to_string());
        kv("input_scale", format!("{:?}", self.input_scale));
        kv("include_self", self.include_self.to_string());
        kv("global_per_streamline", self.global_per_streamline.to_string());
        kv("flip_align_context", self.flip_align_context.to_string());
        kv("class_weighting", self.class_weighting.to_string());
        kv("samples_per_brain", self.samples_per_brain.to_string());
        kv("val_fraction", format!("{:?}", self.val_fraction));
        kv("tir_threshold", self.tir_threshold.to_string());
        kv("noise_sigma", format!("{:?}", self.noise_sigma));
        kv("sta.rot_lr", iv(self.sta.rot_lr));
        kv("sta.rot_ap", iv(self.sta.rot_ap));
        kv("sta.rot_si", iv(self.sta.rot_si));
        for (a, n) in ["x", "y", "z"].iter().enumerate() {
            kv(&format!("sta.trans_{n}"), iv(self.sta.trans[a]));
        }
        for (a, n) in ["x", "y", "z"].iter().enumerate() {
            kv(&format!("sta.scale_{n}"), iv(self.sta.scale[a]));
        }
        s
    }

    pub fn hyperparameters(&self, class_count: usize) -> Hyperparameters {
        Hyperparameters {
            m: self.m,
            k: self.k,
            w: self.w,
            h: self.h,
            backbone: self.backbone.clone(),
            head: self.head.clone(),
            class_count,
            input_scale: self.input_scale,
            include_self: self.include_self,
            global_per_streamline: self.global_per_streamline,
            flip_align_context: self.flip_align_context,
        }
    }

    /// `seed` must be resolved by the caller when the file leaves it unset.
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            seed,
            chunk_size: self.chunk_size,
            class_weighting: self.class_weighting,
            samples_per_brain: self.samples_per_brain,
            ..TrainConfig::default()
        }
    }
}
