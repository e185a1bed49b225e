//! Share vault: one party's additive shares of a set of named tensors.
//!
//! Layout (all text lines end in `\n`):
//!
//! ```text
//! PRIVNET-SHARES v1
//! tensor <name> <d1,d2,...> <party> <count>
//! <count little-endian u64 words>
//! tensor ...
//! end
//! ```
//!
//! Names must be non-empty and free of whitespace. `count` equals the
//! product of the shape dimensions.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::ring::RingElement;

pub const VAULT_HEADER: &str = "PRIVNET-SHARES v1";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VaultTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<RingElement>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShareVault {
    pub party: u8,
    pub tensors: Vec<VaultTensor>,
}

impl ShareVault {
    pub fn new(party: u8) -> Self {
        Self { party, tensors: Vec::new() }
    }

    pub fn get(&self, name: &str) -> Option<&VaultTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn push(&mut self, name: &str, shape: Vec<usize>, values: Vec<RingElement>) -> Result<()> {
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(Error::Vault(format!("invalid tensor name {name:?}")));
        }
        if shape.iter().product::<usize>() != values.len() {
            return Err(Error::Vault(format!("tensor {name}: shape {shape:?} does not match {} values", values.len())));
        }
        if self.get(name).is_some() {
            return Err(Error::Vault(format!("duplicate tensor {name}")));
        }
        self.tensors.push(VaultTensor { name: name.to_string(), shape, values });
        Ok(())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{VAULT_HEADER}")?;
        for t in &self.tensors {
            let dims: Vec<String> = t.shape.iter().map(usize::to_string).collect();
            writeln!(w, "tensor {} {} {} {}", t.name, dims.join(","), self.party, t.values.len())?;
            let mut blob = Vec::with_capacity(t.values.len() * 8);
            for v in &t.values {
                blob.extend_from_slice(&v.0.to_le_bytes());
            }
            w.write_all(&blob)?;
        }
        writeln!(w, "end")?;
        w.flush()?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_from<R: BufRead>(mut r: R) -> Result<Self> {
        let mut line = String::new();
        read_line(&mut r, &mut line)?;
        if line != VAULT_HEADER {
            return Err(Error::Vault(format!("bad header {line:?}")));
        }
        let mut party = None;
        let mut tensors: Vec<VaultTensor> = Vec::new();
        loop {
            read_line(&mut r, &mut line)?;
            if line == "end" {
                break;
            }
            let fields: Vec<&str> = line.split(' ').collect();
            if fields.len() != 5 || fields[0] != "tensor" {
                return Err(Error::Vault(format!("bad record line {line:?}")));
            }
            let name = fields[1].to_string();
            let shape = fields[2]
                .split(',')
                .map(|d| d.parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::Vault(format!("bad shape in {line:?}")))?;
            let p: u8 = fields[3].parse().map_err(|_| Error::Vault(format!("bad party in {line:?}")))?;
            let count: usize = fields[4].parse().map_err(|_| Error::Vault(format!("bad count in {line:?}")))?;
            if shape.iter().product::<usize>() != count {
                return Err(Error::Vault(format!("tensor {name}: shape {shape:?} disagrees with count {count}")));
            }
            match party {
                None => party = Some(p),
                Some(q) if q != p => {
                    return Err(Error::Vault(format!("tensor {name} belongs to party {p}, vault to party {q}")))
                }
                _ => {}
            }
            if tensors.iter().any(|t| t.name == name) {
                return Err(Error::Vault(format!("duplicate tensor {name}")));
            }
            let mut blob = vec![0u8; count * 8];
            r.read_exact(&mut blob).map_err(|_| Error::Vault(format!("tensor {name}: truncated share blob")))?;
            let values =
                blob.chunks_exact(8).map(|c| crate::ring::Ring(u64::from_le_bytes(c.try_into().unwrap()))).collect();
            tensors.push(VaultTensor { name, shape, values });
        }
        Ok(Self { party: party.unwrap_or(0), tensors })
    }
}

fn read_line<R: BufRead>(r: &mut R, line: &mut String) -> Result<()> {
    line.clear();
    let n = r.read_line(line)?;
    if n == 0 || !line.ends_with('\n') {
        return Err(Error::Vault("unexpected end of vault".into()));
    }
    line.pop();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::Ring;

    fn sample() -> ShareVault {
        let mut v = ShareVault::new(1);
        v.push("conv1.w", vec![2, 2], vec![Ring(1), Ring(u64::MAX), Ring(3), Ring(4)]).unwrap();
        v.push("conv1.b", vec![1], vec![Ring(9)]).unwrap();
        v
    }

    #[test]
    fn roundtrip() {
        let v = sample();
        let bytes = v.to_bytes();
        assert!(bytes.starts_with(b"PRIVNET-SHARES v1\ntensor conv1.w 2,2 1 4\n"));
        let back = ShareVault::read_from(&bytes[..]).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn truncated_blob_rejected() {
        let bytes = sample().to_bytes();
        let cut = &bytes[..bytes.len() - 20];
        assert!(ShareVault::read_from(cut).is_err());
    }

    #[test]
    fn bad_names_rejected() {
        let mut v = ShareVault::new(0);
        assert!(v.push("a b", vec![1], vec![Ring(0)]).is_err());
        assert!(v.push("a", vec![2], vec![Ring(0)]).is_err());
    }
}
