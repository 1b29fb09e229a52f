use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::nn::conv::out_extent;

/// Hidden width shared by every variant.
pub const HIDDEN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Single-cell probability head.
    Aoi,
    /// Full-map decoder on top of the same encoder and LSTM.
    Reconstruction,
    /// Convolutional recurrent baseline.
    ConvLstm,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Aoi, Variant::Reconstruction, Variant::ConvLstm];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Aoi => "aoi",
            Variant::Reconstruction => "reconstruction",
            Variant::ConvLstm => "convlstm",
        }
    }

    /// Whether the model predicts full probability maps.
    pub fn is_map(self) -> bool {
        !matches!(self, Variant::Aoi)
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "aoi" => Ok(Variant::Aoi),
            "reconstruction" | "recon" => Ok(Variant::Reconstruction),
            "convlstm" => Ok(Variant::ConvLstm),
            other => Err(format!(
                "unknown variant `{other}` (aoi, reconstruction, convlstm)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolSpec {
    pub kernel: usize,
    pub stride: usize,
}

/// conv → BN → ReLU → optional max-pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderBlockSpec {
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub pool: Option<PoolSpec>,
}

/// Optional 2x nearest upsample → conv 3x3 s1 p1 → BN → ReLU.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoderBlockSpec {
    pub out_channels: usize,
    pub upsample: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub variant: Variant,
    pub height: usize,
    pub width: usize,
    pub in_channels: usize,
    /// Frame encoder. The convolutional variant uses only its blocks as the
    /// input stem.
    pub encoder: Vec<EncoderBlockSpec>,
    /// LSTM input size `d` (dense variants).
    pub latent_dim: usize,
    pub hidden: usize,
    /// Width of the hidden layer of the single-cell head.
    pub head_hidden: usize,
    /// Channels of the `seed_size x seed_size` map the reconstruction
    /// decoder starts from.
    pub seed_channels: usize,
    pub seed_size: usize,
    pub decoder: Vec<DecoderBlockSpec>,
    pub convlstm_kernel: usize,
    pub t_obs: usize,
    pub t_pred: usize,
}

/// Output extents of one encoder block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockShape {
    pub conv: (usize, usize),
    pub out: (usize, usize),
}

fn enc(
    out_channels: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
    pool: bool,
) -> EncoderBlockSpec {
    EncoderBlockSpec {
        out_channels,
        kernel,
        stride,
        padding,
        pool: pool.then_some(PoolSpec {
            kernel: 3,
            stride: 2,
        }),
    }
}

fn dec(widths: &[usize], upsample: &[bool]) -> Vec<DecoderBlockSpec> {
    widths
        .iter()
        .zip(upsample)
        .map(|(&out_channels, &upsample)| DecoderBlockSpec {
            out_channels,
            upsample,
        })
        .collect()
}

impl ModelSpec {
    fn base(variant: Variant, size: usize, encoder: Vec<EncoderBlockSpec>) -> Self {
        Self {
            variant,
            height: size,
            width: size,
            in_channels: 3,
            encoder,
            latent_dim: 64,
            hidden: HIDDEN,
            head_hidden: 64,
            seed_channels: 0,
            seed_size: 2,
            decoder: Vec::new(),
            convlstm_kernel: 3,
            t_obs: 10,
            t_pred: 50,
        }
    }

    /// 251x251 configuration calibrated against the reference parameter
    /// budgets.
    pub fn paper(variant: Variant) -> Self {
        let encoder = vec![
            enc(32, 7, 2, 0, true),
            enc(96, 3, 2, 0, true),
            enc(160, 3, 2, 0, true),
        ];
        Self::with_variant(
            Self::base(variant, 251, encoder),
            variant,
            &[32, 32, 16, 16, 8, 8, 8],
            32,
            &[32, 16, 8],
        )
    }

    /// 64x64 configuration for single-core training runs.
    pub fn desk(variant: Variant) -> Self {
        let encoder = vec![
            enc(16, 7, 2, 3, true),
            enc(32, 3, 2, 1, true),
            enc(64, 3, 2, 1, false),
        ];
        let mut s = Self::with_variant(
            Self::base(variant, 64, encoder),
            variant,
            &[16, 16, 8, 8, 8],
            16,
            &[16, 8, 8, 8],
        );
        if variant == Variant::ConvLstm {
            // An 8x8 recurrent grid keeps the convolutional cell affordable on one core.
            s.encoder = vec![EncoderBlockSpec {
                out_channels: 16,
                kernel: 7,
                stride: 4,
                padding: 3,
                pool: Some(PoolSpec {
                    kernel: 2,
                    stride: 2,
                }),
            }];
        }
        s
    }

    /// 8x8 configuration small enough for exhaustive gradient checks.
    pub fn toy(variant: Variant) -> Self {
        let encoder = vec![
            EncoderBlockSpec {
                out_channels: 4,
                kernel: 3,
                stride: 2,
                padding: 1,
                pool: Some(PoolSpec {
                    kernel: 2,
                    stride: 2,
                }),
            },
            enc(6, 3, 1, 1, false),
        ];
        let mut s = Self::with_variant(Self::base(variant, 8, encoder), variant, &[4, 4], 4, &[4]);
        s.latent_dim = 8;
        s.head_hidden = 8;
        if variant == Variant::ConvLstm {
            s.encoder = vec![enc(4, 3, 2, 1, false)];
            s.decoder = dec(&[4], &[true]);
        }
        s
    }

    fn with_variant(
        mut s: Self,
        variant: Variant,
        recon: &[usize],
        seed: usize,
        convlstm: &[usize],
    ) -> Self {
        match variant {
            Variant::Aoi => {}
            Variant::Reconstruction => {
                s.seed_channels = seed;
                s.decoder = dec(recon, &vec![true; recon.len()]);
            }
            Variant::ConvLstm => {
                s.encoder.truncate(1);
                let mut up = vec![true; convlstm.len()];
                up[0] = false;
                s.decoder = dec(convlstm, &up);
            }
        }
        s
    }

    pub fn named(profile: &str, variant: Variant) -> Option<Self> {
        match profile {
            "paper" => Some(Self::paper(variant)),
            "desk" => Some(Self::desk(variant)),
            "toy" => Some(Self::toy(variant)),
            _ => None,
        }
    }

    /// Spatial extents after each encoder block.
    pub fn encoder_shapes(&self) -> Result<Vec<BlockShape>, ModelError> {
        let mut hw = (self.height, self.width);
        let mut out = Vec::with_capacity(self.encoder.len());
        for (i, b) in self.encoder.iter().enumerate() {
            let too_small = || ModelError::InputTooSmall {
                block: i,
                height: hw.0,
                width: hw.1,
            };
            let conv = (
                out_extent(hw.0, b.kernel, b.stride, b.padding).ok_or_else(too_small)?,
                out_extent(hw.1, b.kernel, b.stride, b.padding).ok_or_else(too_small)?,
            );
            let pooled = match b.pool {
                Some(p) => (
                    out_extent(conv.0, p.kernel, p.stride, 0).ok_or_else(too_small)?,
                    out_extent(conv.1, p.kernel, p.stride, 0).ok_or_else(too_small)?,
                ),
                None => conv,
            };
            out.push(BlockShape { conv, out: pooled });
            hw = pooled;
        }
        Ok(out)
    }

    /// Flat spatial trace `conv, pool, conv, pool, ...` of the encoder.
    pub fn encoder_trace(&self) -> Result<Vec<usize>, ModelError> {
        let mut t = Vec::new();
        for (b, s) in self.encoder.iter().zip(self.encoder_shapes()?) {
            t.push(s.conv.0);
            if b.pool.is_some() {
                t.push(s.out.0);
            }
        }
        Ok(t)
    }

    /// Channels and extents of the encoder output.
    pub fn encoder_output(&self) -> Result<(usize, usize, usize), ModelError> {
        let shapes = self.encoder_shapes()?;
        match (self.encoder.last(), shapes.last()) {
            (Some(b), Some(s)) => Ok((b.out_channels, s.out.0, s.out.1)),
            _ => Ok((self.in_channels, self.height, self.width)),
        }
    }

    /// Flattened encoder feature size `F`.
    pub fn feature_dim(&self) -> Result<usize, ModelError> {
        let (c, h, w) = self.encoder_output()?;
        Ok(c * h * w)
    }

    /// Spatial extent the reconstruction decoder reaches before cropping.
    pub fn decoder_extent(&self, start: (usize, usize)) -> (usize, usize) {
        self.decoder.iter().fold(
            start,
            |hw, b| if b.upsample { (hw.0 * 2, hw.1 * 2) } else { hw },
        )
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad =
            |field: &'static str, reason: String| Err(ModelError::InvalidSpec { field, reason });
        if self.hidden != HIDDEN {
            return bad("hidden", format!("must be {HIDDEN}, got {}", self.hidden));
        }
        if self.height == 0 || self.width == 0 {
            return bad("height", "input extents must be positive".into());
        }
        if self.in_channels == 0 {
            return bad("in_channels", "must be positive".into());
        }
        if self.t_obs == 0 {
            return bad("t_obs", "must be positive".into());
        }
        if self.t_pred == 0 {
            return bad("t_pred", "must be positive".into());
        }
        if self.encoder.is_empty() {
            return bad("encoder", "needs at least one block".into());
        }
        for b in &self.encoder {
            if b.out_channels == 0 || b.kernel == 0 || b.stride == 0 {
                return bad("encoder", format!("degenerate block {b:?}"));
            }
            if matches!(b.pool, Some(p) if p.kernel == 0 || p.stride == 0) {
                return bad("encoder", format!("degenerate pool in {b:?}"));
            }
        }
        self.encoder_shapes()?;
        if self.decoder.iter().any(|b| b.out_channels == 0) {
            return bad("decoder", "block widths must be positive".into());
        }
        match self.variant {
            Variant::Aoi => {
                if self.latent_dim == 0 || self.head_hidden == 0 {
                    return bad(
                        "latent_dim",
                        "latent and head widths must be positive".into(),
                    );
                }
            }
            Variant::Reconstruction => {
                if self.latent_dim == 0 || self.seed_channels == 0 || self.seed_size == 0 {
                    return bad(
                        "seed_channels",
                        "latent and seed sizes must be positive".into(),
                    );
                }
                let (h, w) = self.decoder_extent((self.seed_size, self.seed_size));
                if h < self.height || w < self.width {
                    return bad(
                        "decoder",
                        format!("reaches {h}x{w}, short of {}x{}", self.height, self.width),
                    );
                }
            }
            Variant::ConvLstm => {
                if self.convlstm_kernel % 2 == 0 {
                    return bad("convlstm_kernel", "must be odd to preserve extents".into());
                }
            }
        }
        Ok(())
    }

    /// Channels feeding the final 1x1 output convolution of map variants.
    pub fn decoder_out_channels(&self) -> usize {
        self.decoder.last().map_or(
            match self.variant {
                Variant::ConvLstm => self.hidden,
                _ => self.seed_channels,
            },
            |b| b.out_channels,
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("spec serializes")
    }
}
