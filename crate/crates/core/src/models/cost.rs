//! Closed-form parameter and activation counts.
//!
//! Activation convention: for one sample, every tensor a layer produces
//! during the full observe-and-predict pass is counted once per time step.
//! That covers convolution, batch-norm, ReLU, pooling, upsampling, dense
//! layer and crop/pad outputs, the four gate pre-activation blocks and both
//! recurrent state tensors, and the final logistic output. Input frames and
//! reshapes are not counted. Decoders run only during prediction steps.

use super::spec::{ModelSpec, Variant};
use super::ModelError;

fn conv(i: usize, o: usize, k: usize) -> u64 {
    (o * i * k * k + o) as u64
}

fn bn(c: usize) -> u64 {
    2 * c as u64
}

fn linear(i: usize, o: usize) -> u64 {
    (i * o + o) as u64
}

fn lstm(i: usize, h: usize) -> u64 {
    (4 * h * (i + h) + 8 * h) as u64
}

/// Per-component parameter counts, in module order.
pub fn param_breakdown(spec: &ModelSpec) -> Result<Vec<(&'static str, u64)>, ModelError> {
    let mut parts = Vec::new();
    let mut ch = spec.in_channels;
    let mut enc = 0;
    for b in &spec.encoder {
        enc += conv(ch, b.out_channels, b.kernel) + bn(b.out_channels);
        ch = b.out_channels;
    }
    parts.push(("encoder", enc));
    let hs = spec.hidden;
    let up_blocks = |mut ch: usize| {
        let mut total = 0;
        for b in &spec.decoder {
            total += conv(ch, b.out_channels, 3) + bn(b.out_channels);
            ch = b.out_channels;
        }
        (total, ch)
    };
    match spec.variant {
        Variant::Aoi | Variant::Reconstruction => {
            let f = spec.feature_dim()?;
            parts.push(("fc1", linear(f, spec.latent_dim)));
            parts.push(("lstm", lstm(spec.latent_dim, hs)));
            parts.push(("fc2", linear(hs, spec.latent_dim)));
            if spec.variant == Variant::Aoi {
                parts.push((
                    "head",
                    linear(hs, spec.head_hidden) + linear(spec.head_hidden, 1),
                ));
            } else {
                let s = spec.seed_size;
                parts.push(("fc_dec", linear(hs, spec.seed_channels * s * s)));
                let (blocks, last) = up_blocks(spec.seed_channels);
                parts.push(("decoder", blocks + conv(last, 1, 1)));
            }
        }
        Variant::ConvLstm => {
            parts.push(("convlstm", conv(ch + hs, 4 * hs, spec.convlstm_kernel)));
            parts.push(("proj", conv(hs, ch, 1)));
            let (blocks, last) = up_blocks(hs);
            parts.push(("decoder", blocks + conv(last, 1, 1)));
        }
    }
    Ok(parts)
}

/// Number of trainable scalars; batch-norm running statistics excluded.
pub fn count_params(spec: &ModelSpec) -> Result<u64, ModelError> {
    Ok(param_breakdown(spec)?.iter().map(|(_, n)| n).sum())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivationTally {
    pub components: Vec<(&'static str, u64)>,
}

impl ActivationTally {
    pub fn total(&self) -> u64 {
        self.components.iter().map(|(_, n)| n).sum()
    }

    pub fn get(&self, name: &str) -> u64 {
        self.components
            .iter()
            .filter(|(n, _)| *n == name)
            .map(|(_, v)| v)
            .sum()
    }
}

/// Activation elements of one observe-and-predict pass for a single sample.
pub fn count_activations(
    spec: &ModelSpec,
    t_obs: usize,
    t_pred: usize,
) -> Result<ActivationTally, ModelError> {
    let (to, tp) = (t_obs as u64, t_pred as u64);
    let steps = to + tp;
    let hs = spec.hidden as u64;
    let plane = (spec.height * spec.width) as u64;

    let mut per_frame = 0u64;
    for (b, s) in spec.encoder.iter().zip(spec.encoder_shapes()?) {
        let c = b.out_channels as u64;
        per_frame += 3 * c * (s.conv.0 * s.conv.1) as u64;
        if b.pool.is_some() {
            per_frame += c * (s.out.0 * s.out.1) as u64;
        }
    }
    let mut components = vec![("encoder", to * per_frame)];

    let up_blocks = |mut ch: u64, mut hw: (usize, usize)| {
        let mut total = 0u64;
        for b in &spec.decoder {
            if b.upsample {
                hw = (hw.0 * 2, hw.1 * 2);
                total += ch * (hw.0 * hw.1) as u64;
            }
            ch = b.out_channels as u64;
            total += 3 * ch * (hw.0 * hw.1) as u64;
        }
        (total, ch, hw)
    };

    match spec.variant {
        Variant::Aoi | Variant::Reconstruction => {
            let d = spec.latent_dim as u64;
            components.push(("latent", steps * d));
            components.push(("gates", steps * 4 * hs));
            components.push(("recurrent_state", steps * 2 * hs));
            if spec.variant == Variant::Aoi {
                let hh = spec.head_hidden as u64;
                components.push(("head", tp * (2 * hh + 2)));
            } else {
                let s = spec.seed_size;
                let seed = spec.seed_channels as u64 * (s * s) as u64;
                let (blocks, _, hw) = up_blocks(spec.seed_channels as u64, (s, s));
                let out = 2 * (hw.0 * hw.1) as u64 + plane;
                components.push(("decoder", tp * (seed + blocks + out)));
            }
        }
        Variant::ConvLstm => {
            let (c1, eh, ew) = spec.encoder_output()?;
            let e = (eh * ew) as u64;
            components.push(("latent", tp * c1 as u64 * e));
            components.push(("gates", steps * 4 * hs * e));
            components.push(("recurrent_state", steps * 2 * hs * e));
            let (blocks, last, _) = up_blocks(hs, (eh, ew));
            let out = last * plane + 2 * plane;
            components.push(("decoder", tp * (blocks + out)));
        }
    }
    Ok(ActivationTally { components })
}
