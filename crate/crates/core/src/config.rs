//! System configuration and its TOML document form.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Modulation {
    Gaussian,
    #[default]
    #[serde(rename = "QPSK")]
    Qpsk,
    #[serde(rename = "BPSK")]
    Bpsk,
}

impl Modulation {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Some(Self::Gaussian),
            "qpsk" => Some(Self::Qpsk),
            "bpsk" => Some(Self::Bpsk),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Gaussian => "Gaussian",
            Self::Qpsk => "QPSK",
            Self::Bpsk => "BPSK",
        }
    }
}

/// SISO multiple-access system: K users with received powers `g` (linear).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub k: usize,
    pub g: Vec<f64>,
    pub noise_var: f64,
    pub modulation: Modulation,
    pub seed: u64,
}

impl SystemConfig {
    pub fn new(g: Vec<f64>, noise_var: f64) -> Result<Self> {
        let cfg = Self {
            k: g.len(),
            g,
            noise_var,
            modulation: Modulation::Qpsk,
            seed: 0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_modulation(mut self, m: Modulation) -> Self {
        self.modulation = m;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(cfg_err("users.K", "must be at least 1"));
        }
        if self.g.len() != self.k {
            return Err(cfg_err(
                "users.g",
                format!("has {} entries, expected K={}", self.g.len(), self.k),
            ));
        }
        for (i, &gi) in self.g.iter().enumerate() {
            if !gi.is_finite() {
                return Err(cfg_err(&format!("users.g[{i}]"), "not finite"));
            }
            if gi < 0.0 {
                return Err(cfg_err(&format!("users.g[{i}]"), "negative"));
            }
        }
        if !self.g.iter().any(|&gi| gi > 0.0) {
            return Err(cfg_err("users.g", "all entries are zero"));
        }
        if !(self.noise_var.is_finite() && self.noise_var > 0.0) {
            return Err(cfg_err("channel.noise_var", "must be positive and finite"));
        }
        Ok(())
    }

    pub fn g_total(&self) -> f64 {
        self.g.iter().sum()
    }

    /// Copy with the noise variance set so that the multi-user SNR equals `snr_db`.
    pub fn at_snr_db(&self, snr_db: f64) -> Self {
        let mut c = self.clone();
        c.noise_var = self.g_total() / 10f64.powf(snr_db / 10.0);
        c
    }

    pub fn to_toml(&self) -> String {
        let mut users = Table::new();
        users.insert("K".into(), Value::Integer(self.k as i64));
        users.insert(
            "g".into(),
            Value::Array(self.g.iter().map(|&x| Value::Float(x)).collect()),
        );
        let mut channel = Table::new();
        channel.insert("noise_var".into(), Value::Float(self.noise_var));
        channel.insert(
            "modulation".into(),
            Value::String(self.modulation.name().into()),
        );
        let mut run = Table::new();
        // TOML integers are i64; larger seeds are written as decimal strings
        let seed = i64::try_from(self.seed)
            .map(Value::Integer)
            .unwrap_or_else(|_| Value::String(self.seed.to_string()));
        run.insert("seed".into(), seed);
        let mut doc = Table::new();
        doc.insert("users".into(), Value::Table(users));
        doc.insert("channel".into(), Value::Table(channel));
        doc.insert("run".into(), Value::Table(run));
        toml::to_string(&doc).expect("table serializes")
    }
}

/// Multi-parameter SNR, linear and in dB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Snr {
    pub linear: f64,
    pub db: f64,
}

pub fn snr_sum(cfg: &SystemConfig) -> Snr {
    let linear = cfg.g_total() / cfg.noise_var;
    Snr {
        linear,
        db: 10.0 * linear.log10(),
    }
}

/// MIMO multiple-access system. `h[k]` is N_R x N_t,k.
#[derive(Debug, Clone, PartialEq)]
pub struct MimoConfig {
    pub h: Vec<DMatrix<Complex64>>,
    pub p: Vec<f64>,
    pub noise_var: f64,
}

impl MimoConfig {
    pub fn new(h: Vec<DMatrix<Complex64>>, p: Vec<f64>, noise_var: f64) -> Result<Self> {
        let m = Self { h, p, noise_var };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.h.is_empty() {
            return Err(cfg_err("mimo.H", "no users"));
        }
        if self.p.len() != self.h.len() {
            return Err(cfg_err(
                "mimo.P",
                format!("has {} entries, expected {}", self.p.len(), self.h.len()),
            ));
        }
        let nr = self.h[0].nrows();
        if nr == 0 {
            return Err(cfg_err("mimo.H[0]", "empty matrix"));
        }
        for (k, hk) in self.h.iter().enumerate() {
            if hk.nrows() != nr {
                return Err(Error::Shape(format!(
                    "H[{k}] has {} rows, H[0] has {nr}",
                    hk.nrows()
                )));
            }
            if hk.ncols() == 0 {
                return Err(cfg_err(&format!("mimo.H[{k}]"), "no columns"));
            }
        }
        for (k, &pk) in self.p.iter().enumerate() {
            if !(pk.is_finite() && pk >= 0.0) {
                return Err(cfg_err(&format!("mimo.P[{k}]"), "negative or not finite"));
            }
        }
        if !(self.noise_var.is_finite() && self.noise_var > 0.0) {
            return Err(cfg_err("channel.noise_var", "must be positive and finite"));
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.h.len()
    }

    pub fn nr(&self) -> usize {
        self.h[0].nrows()
    }

    /// Channels with sqrt(P_k) folded into the columns.
    pub fn scaled(&self) -> Vec<DMatrix<Complex64>> {
        self.h
            .iter()
            .zip(&self.p)
            .map(|(h, &p)| h.map(|z| z * p.sqrt()))
            .collect()
    }

    pub fn to_toml(&self) -> String {
        let h = self
            .h
            .iter()
            .map(|m| {
                Value::Array(
                    (0..m.nrows())
                        .map(|r| {
                            Value::Array(
                                (0..m.ncols())
                                    .map(|c| {
                                        let z = m[(r, c)];
                                        Value::Array(vec![Value::Float(z.re), Value::Float(z.im)])
                                    })
                                    .collect(),
                            )
                        })
                        .collect(),
                )
            })
            .collect();
        let mut users = Table::new();
        users.insert("K".into(), Value::Integer(self.k() as i64));
        let mut channel = Table::new();
        channel.insert("noise_var".into(), Value::Float(self.noise_var));
        let mut mimo = Table::new();
        mimo.insert("H".into(), Value::Array(h));
        mimo.insert(
            "P".into(),
            Value::Array(self.p.iter().map(|&x| Value::Float(x)).collect()),
        );
        let mut doc = Table::new();
        doc.insert("users".into(), Value::Table(users));
        doc.insert("channel".into(), Value::Table(channel));
        doc.insert("mimo".into(), Value::Table(mimo));
        toml::to_string(&doc).expect("table serializes")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Config {
    System(SystemConfig),
    Mimo(MimoConfig),
}

fn cfg_err(key: &str, msg: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        msg: msg.into(),
    }
}

fn section<'a>(doc: &'a Table, name: &str) -> Result<Option<&'a Table>> {
    match doc.get(name) {
        None => Ok(None),
        Some(Value::Table(t)) => Ok(Some(t)),
        Some(_) => Err(cfg_err(name, "expected a table")),
    }
}

fn number(v: &Value, key: &str) -> Result<f64> {
    match v {
        Value::Float(x) => Ok(*x),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(cfg_err(key, "expected a number")),
    }
}

fn number_array(v: &Value, key: &str) -> Result<Vec<f64>> {
    let Value::Array(a) = v else {
        return Err(cfg_err(key, "expected an array"));
    };
    a.iter()
        .enumerate()
        .map(|(i, x)| number(x, &format!("{key}[{i}]")))
        .collect()
}

fn parse_matrix(v: &Value, key: &str) -> Result<DMatrix<Complex64>> {
    let Value::Array(rows) = v else {
        return Err(cfg_err(key, "expected an array of rows"));
    };
    let mut data: Vec<Vec<Complex64>> = Vec::with_capacity(rows.len());
    for (r, row) in rows.iter().enumerate() {
        let Value::Array(entries) = row else {
            return Err(cfg_err(&format!("{key}[{r}]"), "expected a row array"));
        };
        let mut out = Vec::with_capacity(entries.len());
        for (c, e) in entries.iter().enumerate() {
            let ek = format!("{key}[{r}][{c}]");
            let pair = number_array(e, &ek)?;
            if pair.len() != 2 {
                return Err(cfg_err(&ek, "expected [re, im]"));
            }
            out.push(Complex64::new(pair[0], pair[1]));
        }
        data.push(out);
    }
    let nr = data.len();
    let nc = data.first().map_or(0, |r| r.len());
    if nr == 0 || nc == 0 {
        return Err(cfg_err(key, "empty matrix"));
    }
    if data.iter().any(|r| r.len() != nc) {
        return Err(cfg_err(key, "ragged rows"));
    }
    Ok(DMatrix::from_fn(nr, nc, |r, c| data[r][c]))
}

/// Parse and validate a TOML configuration document.
pub fn load_config(text: &str) -> Result<Config> {
    let doc: Table = text
        .parse()
        .map_err(|e: toml::de::Error| cfg_err("<document>", e.message().to_string()))?;
    let users = section(&doc, "users")?.ok_or_else(|| cfg_err("users", "missing section"))?;
    let channel = section(&doc, "channel")?.ok_or_else(|| cfg_err("channel", "missing section"))?;
    let k_val = users
        .get("K")
        .ok_or_else(|| cfg_err("users.K", "missing"))?;
    let k = match k_val {
        Value::Integer(i) if *i >= 1 => *i as usize,
        Value::Integer(_) => return Err(cfg_err("users.K", "must be at least 1")),
        _ => return Err(cfg_err("users.K", "expected an integer")),
    };
    let noise_var = number(
        channel
            .get("noise_var")
            .ok_or_else(|| cfg_err("channel.noise_var", "missing"))?,
        "channel.noise_var",
    )?;
    let modulation = match channel.get("modulation") {
        None => Modulation::Qpsk,
        Some(Value::String(s)) => Modulation::parse(s)
            .ok_or_else(|| cfg_err("channel.modulation", format!("unknown modulation `{s}`")))?,
        Some(_) => return Err(cfg_err("channel.modulation", "expected a string")),
    };
    let seed = match section(&doc, "run")?.and_then(|r| r.get("seed")) {
        None => 0,
        Some(Value::Integer(i)) if *i >= 0 => *i as u64,
        Some(Value::String(s)) if s.parse::<u64>().is_ok() => s.parse().unwrap(),
        Some(_) => return Err(cfg_err("run.seed", "expected a nonnegative integer")),
    };

    if let Some(mimo) = section(&doc, "mimo")? {
        let Some(Value::Array(hs)) = mimo.get("H") else {
            return Err(cfg_err("mimo.H", "missing or not an array"));
        };
        let h = hs
            .iter()
            .enumerate()
            .map(|(i, m)| parse_matrix(m, &format!("mimo.H[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        if h.len() != k {
            return Err(cfg_err(
                "mimo.H",
                format!("has {} matrices, expected K={k}", h.len()),
            ));
        }
        let p = match mimo.get("P") {
            Some(v) => number_array(v, "mimo.P")?,
            None => vec![1.0; k],
        };
        return MimoConfig::new(h, p, noise_var).map(Config::Mimo);
    }

    let g = number_array(
        users
            .get("g")
            .ok_or_else(|| cfg_err("users.g", "missing"))?,
        "users.g",
    )?;
    let cfg = SystemConfig {
        k,
        g,
        noise_var,
        modulation,
        seed,
    };
    cfg.validate()?;
    Ok(Config::System(cfg))
}

/// Convenience for callers that need the SISO form.
pub fn load_system_config(text: &str) -> Result<SystemConfig> {
    match load_config(text)? {
        Config::System(c) => Ok(c),
        Config::Mimo(_) => Err(cfg_err("mimo", "expected a SISO configuration")),
    }
}
