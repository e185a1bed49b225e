//! Queue configuration file: `key = value`, one key per line, `#` starts a
//! comment line.
//!
//! ```text
//! queue = 127.0.0.1:7400
//! party0 = 127.0.0.1:7401
//! party1 = 127.0.0.1:7402
//! party2 = 127.0.0.1:7403
//! model = 3f2a9c0d41e7b655
//! codec = 13,20
//! input_shape = 150,125,1
//! party0_key = <64 hex digits>
//! party1_key = <64 hex digits>
//! mesh_key = <64 hex digits>
//! dealer_seed = <64 hex digits>
//! timeout_secs = 120
//! ```
//!
//! `input_shape` is `H,W,C` for images or a single length for flat inputs.
//! `timeout_secs` is optional.

use std::collections::HashSet;
use std::fs;
use std::path::Path;
use std::time::Duration;

use privnet_core::FixedPointCodec;
use privnet_nn::Shape;
use rand::RngCore;

use crate::error::{Result, ServingError};

pub const DEFAULT_TIMEOUT_SECS: u64 = 120;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueueConfig {
    pub queue: String,
    pub parties: [String; 3],
    pub model: String,
    pub codec: FixedPointCodec,
    pub input_shape: Shape,
    /// End-to-end keys between the client and parties 0 and 1.
    pub party_keys: [[u8; 32]; 2],
    /// Base key for the links between parties.
    pub mesh_key: [u8; 32],
    /// Master seed of the helper party's correlated randomness.
    pub dealer_seed: [u8; 32],
    pub timeout_secs: u64,
}

const KEYS: [&str; 12] = [
    "queue",
    "party0",
    "party1",
    "party2",
    "model",
    "codec",
    "input_shape",
    "party0_key",
    "party1_key",
    "mesh_key",
    "dealer_seed",
    "timeout_secs",
];

fn random_key<R: RngCore + ?Sized>(rng: &mut R) -> [u8; 32] {
    let mut k = [0u8; 32];
    rng.fill_bytes(&mut k);
    k
}

fn check_endpoint(e: &str) -> std::result::Result<(), String> {
    let (host, port) = e.rsplit_once(':').ok_or_else(|| format!("endpoint {e:?} is not host:port"))?;
    if host.is_empty() || host.contains(char::is_whitespace) {
        return Err(format!("endpoint {e:?} has no host"));
    }
    port.parse::<u16>().map_err(|_| format!("endpoint {e:?} has a bad port"))?;
    Ok(())
}

fn parse_key(v: &str) -> std::result::Result<[u8; 32], String> {
    let bytes = hex::decode(v).map_err(|e| format!("bad hex: {e}"))?;
    bytes.try_into().map_err(|_| "key must be 32 bytes (64 hex digits)".to_string())
}

fn parse_shape(v: &str) -> std::result::Result<Shape, String> {
    let dims: Vec<usize> = v
        .split(',')
        .map(|d| d.trim().parse::<usize>().map_err(|_| format!("bad dimension {d:?}")))
        .collect::<std::result::Result<_, _>>()?;
    match dims[..] {
        [n] if n > 0 => Ok(Shape::Flat(n)),
        [h, w, c] if h * w * c > 0 => Ok(Shape::Image { h, w, c }),
        _ => Err("input_shape needs H,W,C or a single length, all positive".into()),
    }
}

fn format_shape(s: Shape) -> String {
    match s {
        Shape::Flat(n) => n.to_string(),
        Shape::Image { h, w, c } => format!("{h},{w},{c}"),
    }
}

impl QueueConfig {
    /// Localhost endpoints on consecutive ports starting at `base_port`,
    /// with fresh keys drawn from `rng`.
    pub fn localhost<R: RngCore + ?Sized>(
        base_port: u16,
        model: &str,
        codec: FixedPointCodec,
        input_shape: Shape,
        rng: &mut R,
    ) -> Self {
        let ep = |i: u16| format!("127.0.0.1:{}", base_port + i);
        QueueConfig {
            queue: ep(0),
            parties: [ep(1), ep(2), ep(3)],
            model: model.to_string(),
            codec,
            input_shape,
            party_keys: [random_key(rng), random_key(rng)],
            mesh_key: random_key(rng),
            dealer_seed: random_key(rng),
            timeout_secs: DEFAULT_TIMEOUT_SECS,
        }
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_secs)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for e in std::iter::once(&self.queue).chain(&self.parties) {
            check_endpoint(e).map_err(ServingError::Invalid)?;
            if !seen.insert(e.to_ascii_lowercase()) {
                return Err(ServingError::Invalid(format!("endpoint {e} is used twice")));
            }
        }
        if self.model.is_empty() || self.model.contains(char::is_whitespace) {
            return Err(ServingError::Invalid("model id must be a non-empty word".into()));
        }
        if self.timeout_secs == 0 {
            return Err(ServingError::Invalid("timeout_secs must be positive".into()));
        }
        if self.party_keys[0] == self.party_keys[1] {
            return Err(ServingError::Invalid("party0_key and party1_key must differ".into()));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        format!(
            "queue = {}\nparty0 = {}\nparty1 = {}\nparty2 = {}\nmodel = {}\ncodec = {},{}\ninput_shape = {}\n\
             party0_key = {}\nparty1_key = {}\nmesh_key = {}\ndealer_seed = {}\ntimeout_secs = {}\n",
            self.queue,
            self.parties[0],
            self.parties[1],
            self.parties[2],
            self.model,
            self.codec.fraction_bits(),
            self.codec.magnitude_bits(),
            format_shape(self.input_shape),
            hex::encode(self.party_keys[0]),
            hex::encode(self.party_keys[1]),
            hex::encode(self.mesh_key),
            hex::encode(self.dealer_seed),
            self.timeout_secs,
        )
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut values: [Option<(usize, &str)>; 12] = [None; 12];
        let mut last = 0;
        for (i, raw) in text.lines().enumerate() {
            let n = i + 1;
            last = n;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |message: String| ServingError::Config { line: n, message };
            let (k, v) = line.split_once('=').ok_or_else(|| bad("expected key = value".into()))?;
            let (k, v) = (k.trim(), v.trim());
            let slot = KEYS.iter().position(|&x| x == k).ok_or_else(|| bad(format!("unknown key {k:?}")))?;
            if values[slot].is_some() {
                return Err(bad(format!("key {k:?} given twice")));
            }
            if v.is_empty() {
                return Err(bad(format!("key {k:?} has no value")));
            }
            values[slot] = Some((n, v));
        }
        let end = last + 1;
        let get = |key: &str| -> Result<(usize, &str)> {
            let slot = KEYS.iter().position(|&x| x == key).unwrap();
            values[slot].ok_or_else(|| ServingError::Config { line: end, message: format!("missing key {key:?}") })
        };
        let at = |line: usize| move |message: String| ServingError::Config { line, message };

        let endpoint = |key: &str| -> Result<String> {
            let (n, v) = get(key)?;
            check_endpoint(v).map_err(at(n))?;
            Ok(v.to_string())
        };
        let key = |name: &str| -> Result<[u8; 32]> {
            let (n, v) = get(name)?;
            parse_key(v).map_err(at(n))
        };

        let queue = endpoint("queue")?;
        let parties = [endpoint("party0")?, endpoint("party1")?, endpoint("party2")?];
        let model = get("model")?.1.to_string();
        let (cn, cv) = get("codec")?;
        let codec = {
            let parts: Vec<&str> = cv.split(',').map(str::trim).collect();
            match parts[..] {
                [f, k] => {
                    let f = f.parse().map_err(|_| at(cn)(format!("bad fraction bits {f:?}")))?;
                    let k = k.parse().map_err(|_| at(cn)(format!("bad magnitude bits {k:?}")))?;
                    FixedPointCodec::new(f, k).map_err(|e| at(cn)(e.to_string()))?
                }
                _ => return Err(at(cn)("codec needs F,K".into())),
            }
        };
        let (sn, sv) = get("input_shape")?;
        let input_shape = parse_shape(sv).map_err(at(sn))?;
        let timeout_secs = match values[11] {
            None => DEFAULT_TIMEOUT_SECS,
            Some((n, v)) => v.parse().map_err(|_| at(n)(format!("bad timeout {v:?}")))?,
        };
        let cfg = QueueConfig {
            queue,
            parties,
            model,
            codec,
            input_shape,
            party_keys: [key("party0_key")?, key("party1_key")?],
            mesh_key: key("mesh_key")?,
            dealer_seed: key("dealer_seed")?,
            timeout_secs,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        self.validate()?;
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes() {
        assert_eq!(parse_shape("150,125,1").unwrap(), Shape::Image { h: 150, w: 125, c: 1 });
        assert_eq!(parse_shape("12").unwrap(), Shape::Flat(12));
        assert!(parse_shape("1,2").is_err());
        assert!(parse_shape("0").is_err());
        assert!(check_endpoint("localhost:99999").is_err());
        assert!(check_endpoint("[::1]:80").is_ok());
    }
}
