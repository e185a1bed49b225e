//! Prediction client. Shares the input, seals each share for its party,
//! submits both through the queue and reconstructs the returned scores.

use std::time::Duration;

use privnet_core::sharing::additive::reconstruct_slice;
use privnet_core::wire::{bytes_to_ring, ring_to_bytes};
use privnet_core::{Frame, MsgType, RingElement, SessionId};
use privnet_nn::argmax_class;
use privnet_nn::secure::share_input;
use rand::RngCore;

use crate::config::QueueConfig;
use crate::error::{Result, ServingError};
use crate::protocol::{client_cipher, connect, expect_ok, read_frame, submit_payload, write_frame};

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub request_id: SessionId,
    pub scores: Vec<f64>,
    /// Reconstructed scores in the ring, before decoding.
    pub raw: Vec<RingElement>,
    pub class: usize,
}

pub struct Client {
    config: QueueConfig,
}

impl Client {
    pub fn new(config: QueueConfig) -> Self {
        Client { config }
    }

    pub fn config(&self) -> &QueueConfig {
        &self.config
    }

    /// Encodes and shares `input` with fresh randomness and a fresh
    /// request id, then runs the prediction.
    pub fn predict<R: RngCore + ?Sized>(&self, input: &[f64], rng: &mut R) -> Result<Prediction> {
        let request_id = SessionId::random(rng);
        let (x0, x1) = share_input(self.config.codec, input, rng)?;
        self.submit_shares(request_id, [&x0, &x1])
    }

    /// Submits already computed input shares under `request_id`.
    pub fn submit_shares(&self, request_id: SessionId, shares: [&[RingElement]; 2]) -> Result<Prediction> {
        let timeout = self.config.timeout() + Duration::from_secs(10);
        let mut stream = connect(&self.config.queue, timeout)?;
        let submit =
            Frame::new(MsgType::PredictSubmit, request_id, 0, submit_payload(shares[0].len(), &self.config.model));
        write_frame(&mut stream, &submit)?;
        for (i, share) in shares.iter().enumerate() {
            let frame = Frame::new(MsgType::SharePayload, request_id, i as u64, ring_to_bytes(share));
            let sealed = client_cipher(&self.config.party_keys[i], request_id).seal(frame)?;
            write_frame(&mut stream, &sealed)?;
        }
        let mut outs: Vec<Vec<RingElement>> = Vec::with_capacity(2);
        for i in 0..2 {
            let f = read_frame(&mut stream)?;
            if f.msg_type == MsgType::Status {
                expect_ok(&f)?;
                return Err(ServingError::Protocol("OK status before the result shares".into()));
            }
            if f.msg_type != MsgType::ResultShare || f.session != request_id || f.seq != i as u64 {
                return Err(ServingError::Protocol(format!("unexpected {:?} frame in reply", f.msg_type)));
            }
            let opened = client_cipher(&self.config.party_keys[i], request_id)
                .open(f)
                .map_err(|_| ServingError::Protocol(format!("result share {i} failed authentication")))?;
            outs.push(bytes_to_ring(&opened.payload)?);
        }
        expect_ok(&read_frame(&mut stream)?)?;
        let raw = reconstruct_slice(&outs[0], &outs[1])?;
        let scores = self.config.codec.decode_slice(&raw);
        let class = argmax_class(&scores)?;
        Ok(Prediction { request_id, scores, raw, class })
    }
}
