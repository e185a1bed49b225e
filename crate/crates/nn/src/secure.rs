//! Inference over additively shared weights and inputs.
//!
//! Linear layers use matrix Beaver triples followed by local truncation,
//! ReLU uses the secure sign bit, pooling runs the batched max tournament or
//! the public-constant average. The helper runs the same code on all-zero
//! shares and only deals triples.

use std::collections::BTreeMap;

use privnet_core::mpc::local::{run_local, LocalSetup};
use privnet_core::mpc::protocols;
use privnet_core::sharing::additive::{reconstruct_slice, share_slice};
use privnet_core::sharing::ShareVault;
use privnet_core::{FixedPointCodec, Party, PartyContext, RingElement};
use rand::RngCore;

use crate::error::{NnError, Result};
use crate::forward::{conv_geometry, image_dims};
use crate::graph::{Architecture, Layer, ModelGraph};
use crate::ops::{im2col, pool_windows};

/// One party's view of a shared model.
#[derive(Clone, Debug)]
pub struct SharedModel {
    pub arch: Architecture,
    pub party: Party,
    pub weights: BTreeMap<String, Vec<RingElement>>,
}

impl SharedModel {
    /// Loads a computing party's shares, checking them against the
    /// architecture.
    pub fn from_vault(arch: Architecture, vault: &ShareVault) -> Result<Self> {
        let party = Party::from_index(vault.party as usize)
            .ok()
            .filter(|p| !p.is_dealer())
            .ok_or_else(|| NnError::Shape(format!("vault belongs to party {}", vault.party)))?;
        let mut weights = BTreeMap::new();
        for (name, shape) in arch.tensor_specs()? {
            let t = vault.get(&name).ok_or_else(|| NnError::MissingTensor(name.clone()))?;
            if t.shape != shape {
                return Err(NnError::Shape(format!(
                    "shared tensor {name:?} has shape {:?}, expected {shape:?}",
                    t.shape
                )));
            }
            weights.insert(name, t.values.clone());
        }
        Ok(SharedModel { arch, party, weights })
    }

    /// The helper's placeholder: zeros of the right shapes.
    pub fn for_dealer(arch: Architecture) -> Result<Self> {
        let weights =
            arch.tensor_specs()?.into_iter().map(|(n, s)| (n, vec![RingElement::zero(); s.iter().product()])).collect();
        Ok(SharedModel { arch, party: Party::P2, weights })
    }

    fn tensor(&self, name: &str) -> Result<&[RingElement]> {
        self.weights.get(name).map(Vec::as_slice).ok_or_else(|| NnError::MissingTensor(name.to_string()))
    }
}

/// Encodes every weight and splits it into two vaults, one per computing
/// party. A weight outside the codec's range is reported by tensor name.
pub fn share_model<R: RngCore + ?Sized>(model: &ModelGraph, rng: &mut R) -> Result<[ShareVault; 2]> {
    model.validate()?;
    let codec = model.arch.codec;
    let mut vaults = [ShareVault::new(0), ShareVault::new(1)];
    for (name, shape) in model.arch.tensor_specs()? {
        let t = model.tensor(&name)?;
        let encoded =
            codec.encode_slice(&t.data).map_err(|source| NnError::TensorRange { tensor: name.clone(), source })?;
        let (s0, s1) = share_slice(&encoded, rng);
        vaults[0].push(&name, shape.clone(), s0)?;
        vaults[1].push(&name, shape, s1)?;
    }
    Ok(vaults)
}

/// Encodes and shares one input vector.
pub fn share_input<R: RngCore + ?Sized>(
    codec: FixedPointCodec,
    input: &[f64],
    rng: &mut R,
) -> Result<(Vec<RingElement>, Vec<RingElement>)> {
    let encoded =
        codec.encode_slice(input).map_err(|source| NnError::TensorRange { tensor: "input".into(), source })?;
    Ok(share_slice(&encoded, rng))
}

fn run_layer(
    ctx: &mut PartyContext<u64>,
    model: &SharedModel,
    layer: &Layer,
    shape: crate::graph::Shape,
    x: Vec<RingElement>,
) -> Result<Vec<RingElement>> {
    Ok(match layer {
        Layer::Conv2d { filters, weight, bias, .. } => {
            let g = conv_geometry(layer, shape)?;
            let patches = im2col(&x, &g);
            let rows = g.out_h() * g.out_w();
            let prod = protocols::matmul(ctx, &patches, model.tensor(weight)?, (rows, g.patch_len(), *filters))?;
            let mut y = protocols::truncate_shares(ctx, &prod);
            let b = model.tensor(bias)?;
            for row in y.chunks_exact_mut(*filters) {
                for (v, &bv) in row.iter_mut().zip(b) {
                    *v += bv;
                }
            }
            y
        }
        Layer::Dense { units, weight, bias } => {
            let prod = protocols::matmul(ctx, &x, model.tensor(weight)?, (1, x.len(), *units))?;
            let mut y = protocols::truncate_shares(ctx, &prod);
            for (v, &bv) in y.iter_mut().zip(model.tensor(bias)?) {
                *v += bv;
            }
            y
        }
        Layer::Relu => protocols::relu(ctx, &x)?,
        Layer::MaxPool2d { window } => {
            let grouped = pool_windows(&x, image_dims(shape)?, *window);
            protocols::max_windows(ctx, &grouped, window.0 * window.1)?
        }
        Layer::AvgPool2d { window } => {
            let grouped = pool_windows(&x, image_dims(shape)?, *window);
            protocols::avg_windows(ctx, &grouped, window.0 * window.1)?
        }
        Layer::Flatten => x,
    })
}

/// Runs the shared model on a shared input and returns this party's share
/// of the class scores. Failures name the layer they occurred in.
pub fn forward_secure(
    ctx: &mut PartyContext<u64>,
    model: &SharedModel,
    input: &[RingElement],
) -> Result<Vec<RingElement>> {
    let shapes = model.arch.shape_trace()?;
    if input.len() != shapes[0].len() {
        return Err(NnError::Shape(format!("input share has {} values, model expects {}", input.len(), shapes[0])));
    }
    let mut x = input.to_vec();
    for (index, (layer, &shape)) in model.arch.layers.iter().zip(&shapes).enumerate() {
        x = run_layer(ctx, model, layer, shape, x).map_err(|e| match e {
            NnError::Core(source) => NnError::SecureLayer { index, layer: layer.kind().to_string(), source },
            other => other,
        })?;
    }
    Ok(x)
}

/// Shares `model` and `input`, runs all three parties in-process and
/// returns the decoded scores.
pub fn predict_local<R: RngCore + ?Sized>(
    setup: &LocalSetup,
    model: &ModelGraph,
    input: &[f64],
    rng: &mut R,
) -> Result<Vec<f64>> {
    let [v0, v1] = share_model(model, rng)?;
    let models = [
        SharedModel::from_vault(model.arch.clone(), &v0)?,
        SharedModel::from_vault(model.arch.clone(), &v1)?,
        SharedModel::for_dealer(model.arch.clone())?,
    ];
    let (x0, x1) = share_input(model.arch.codec, input, rng)?;
    let inputs = [x0, x1, vec![RingElement::zero(); input.len()]];
    let outputs = predict_shared(setup, &models, &inputs)?;
    Ok(model.arch.codec.decode_slice(&outputs))
}

/// Runs already-shared models and inputs in-process and reconstructs the
/// score vector in the ring.
pub fn predict_shared(
    setup: &LocalSetup,
    models: &[SharedModel; 3],
    inputs: &[Vec<RingElement>; 3],
) -> Result<Vec<RingElement>> {
    let failure = std::sync::Mutex::new(None);
    let out = run_local(setup, |ctx| {
        let i = ctx.party().index();
        forward_secure(ctx, &models[i], &inputs[i]).map_err(|e| {
            let msg = e.to_string();
            let secondary = matches!(
                &e,
                NnError::SecureLayer {
                    source: privnet_core::Error::Aborted(_) | privnet_core::Error::ChannelClosed { .. },
                    ..
                }
            );
            let mut slot = failure.lock().unwrap();
            if slot.is_none() && !secondary {
                *slot = Some(e);
            }
            privnet_core::Error::Aborted(msg)
        })
    });
    match out {
        Ok([s0, s1, _]) => Ok(reconstruct_slice(&s0, &s1)?),
        Err(e) => Err(failure.into_inner().unwrap().unwrap_or(NnError::Core(e))),
    }
}
