//! Share bundle: the directory the model owner hands to the parties.
//!
//! ```text
//! model.manifest   architecture only, no weights
//! party0.vault     party 0's shares of every tensor
//! party1.vault     party 1's shares
//! receipt.txt      tensor list and checksum of the encoded model
//! ```
//!
//! Receipt layout:
//!
//! ```text
//! PRIVNET-RECEIPT v1
//! model <first 16 hex digits of the checksum>
//! checksum <sha-256 hex>
//! tensor <name> <d1,d2,...>
//! end
//! ```

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use privnet_core::sharing::additive::reconstruct_slice;
use privnet_core::sharing::ShareVault;
use privnet_core::{Party, RingElement};
use privnet_nn::model_file::{load_architecture, save_architecture};
use privnet_nn::{share_model, Architecture, ModelGraph, NnError, SharedModel};
use rand::RngCore;
use sha2::{Digest, Sha256};

use crate::error::{Result, ServingError};

pub const RECEIPT_HEADER: &str = "PRIVNET-RECEIPT v1";
pub const MANIFEST_FILE: &str = "model.manifest";
pub const RECEIPT_FILE: &str = "receipt.txt";

pub fn vault_file(party: usize) -> String {
    format!("party{party}.vault")
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShareReceipt {
    pub model_id: String,
    pub checksum: String,
    pub tensors: Vec<(String, Vec<usize>)>,
}

fn bundle_err(path: &Path, message: impl Into<String>) -> ServingError {
    ServingError::Bundle { path: path.to_path_buf(), message: message.into() }
}

/// SHA-256 over the codec parameters and every encoded tensor, in
/// architecture order.
pub fn model_checksum(arch: &Architecture, tensors: &[(String, Vec<usize>, Vec<RingElement>)]) -> String {
    let mut h = Sha256::new();
    h.update([arch.codec.fraction_bits() as u8, arch.codec.magnitude_bits() as u8]);
    for (name, shape, values) in tensors {
        h.update(name.as_bytes());
        h.update([0u8]);
        for d in shape {
            h.update((*d as u64).to_le_bytes());
        }
        for v in values {
            h.update(v.to_u64().to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

impl ShareReceipt {
    fn from_tensors(arch: &Architecture, tensors: &[(String, Vec<usize>, Vec<RingElement>)]) -> Self {
        let checksum = model_checksum(arch, tensors);
        ShareReceipt {
            model_id: checksum[..16].to_string(),
            checksum,
            tensors: tensors.iter().map(|(n, s, _)| (n.clone(), s.clone())).collect(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{RECEIPT_HEADER}\nmodel {}\nchecksum {}\n", self.model_id, self.checksum);
        for (name, shape) in &self.tensors {
            let dims: Vec<String> = shape.iter().map(usize::to_string).collect();
            s += &format!("tensor {name} {}\n", dims.join(","));
        }
        s + "end\n"
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| bundle_err(path, e.to_string()))?;
        let mut lines = text.lines();
        if lines.next() != Some(RECEIPT_HEADER) {
            return Err(bundle_err(path, format!("missing {RECEIPT_HEADER:?} header")));
        }
        let (mut model_id, mut checksum, mut tensors, mut ended) = (None, None, Vec::new(), false);
        for line in lines {
            let words: Vec<&str> = line.split_whitespace().collect();
            match words[..] {
                ["model", id] => model_id = Some(id.to_string()),
                ["checksum", c] => checksum = Some(c.to_string()),
                ["tensor", name, dims] => {
                    let shape = dims
                        .split(',')
                        .map(|d| d.parse().map_err(|_| bundle_err(path, format!("bad dimension {d:?}"))))
                        .collect::<Result<_>>()?;
                    tensors.push((name.to_string(), shape));
                }
                ["end"] => {
                    ended = true;
                    break;
                }
                _ => return Err(bundle_err(path, format!("unexpected line {line:?}"))),
            }
        }
        match (model_id, checksum, ended) {
            (Some(model_id), Some(checksum), true) => Ok(ShareReceipt { model_id, checksum, tensors }),
            _ => Err(bundle_err(path, "receipt is truncated")),
        }
    }
}

fn encoded_tensors(model: &ModelGraph) -> Result<Vec<(String, Vec<usize>, Vec<RingElement>)>> {
    model
        .arch
        .tensor_specs()?
        .into_iter()
        .map(|(name, shape)| {
            let t = model.tensor(&name)?;
            let values = model
                .arch
                .codec
                .encode_slice(&t.data)
                .map_err(|source| NnError::TensorRange { tensor: name.clone(), source })?;
            Ok((name, shape, values))
        })
        .collect()
}

/// Shares `model` into `dir` and returns the receipt. Fails before writing
/// anything if a weight does not fit the codec.
pub fn write_bundle<R: RngCore + ?Sized>(model: &ModelGraph, dir: &Path, rng: &mut R) -> Result<ShareReceipt> {
    let receipt = ShareReceipt::from_tensors(&model.arch, &encoded_tensors(model)?);
    let vaults = share_model(model, rng)?;
    fs::create_dir_all(dir)?;
    save_architecture(&model.arch, &dir.join(MANIFEST_FILE))?;
    for (i, v) in vaults.iter().enumerate() {
        fs::write(dir.join(vault_file(i)), v.to_bytes())?;
    }
    fs::write(dir.join(RECEIPT_FILE), receipt.to_text())?;
    Ok(receipt)
}

pub fn read_vault(path: &Path) -> Result<ShareVault> {
    let f = fs::File::open(path).map_err(|e| bundle_err(path, e.to_string()))?;
    ShareVault::read_from(BufReader::new(f)).map_err(|e| bundle_err(path, e.to_string()))
}

pub fn read_bundle_architecture(dir: &Path) -> Result<Architecture> {
    let path = dir.join(MANIFEST_FILE);
    if !path.is_file() {
        return Err(bundle_err(&path, "not found"));
    }
    load_architecture(&path).map_err(|e| bundle_err(&path, e.to_string()))
}

/// Reconstructs both vaults and checks them against the receipt.
pub fn verify_bundle(dir: &Path) -> Result<ShareReceipt> {
    let arch = read_bundle_architecture(dir)?;
    let receipt_path = dir.join(RECEIPT_FILE);
    let receipt = ShareReceipt::read(&receipt_path)?;
    let paths: Vec<PathBuf> = (0..2).map(|i| dir.join(vault_file(i))).collect();
    let v0 = read_vault(&paths[0])?;
    let v1 = read_vault(&paths[1])?;
    let mut tensors = Vec::new();
    for (name, shape) in arch.tensor_specs()? {
        let part = |v: &ShareVault, p: &Path| {
            v.get(&name)
                .filter(|t| t.shape == shape)
                .map(|t| t.values.clone())
                .ok_or_else(|| bundle_err(p, format!("tensor {name} missing or misshapen")))
        };
        let values = reconstruct_slice(&part(&v0, &paths[0])?, &part(&v1, &paths[1])?)?;
        tensors.push((name, shape, values));
    }
    let actual = ShareReceipt::from_tensors(&arch, &tensors);
    if actual != receipt {
        return Err(bundle_err(&receipt_path, "reconstructed model does not match the receipt"));
    }
    Ok(receipt)
}

/// Loads what `party` needs to serve: its vault for parties 0 and 1, only
/// the architecture for the helper.
pub fn load_party_model(dir: &Path, party: Party) -> Result<(SharedModel, ShareReceipt)> {
    let arch = read_bundle_architecture(dir)?;
    let receipt = ShareReceipt::read(&dir.join(RECEIPT_FILE))?;
    if party.is_dealer() {
        return Ok((SharedModel::for_dealer(arch)?, receipt));
    }
    let path = dir.join(vault_file(party.index()));
    let vault = read_vault(&path)?;
    if vault.party as usize != party.index() {
        return Err(bundle_err(&path, format!("vault belongs to party {}, not {party}", vault.party)));
    }
    let model = SharedModel::from_vault(arch, &vault).map_err(|e| bundle_err(&path, e.to_string()))?;
    Ok((model, receipt))
}
