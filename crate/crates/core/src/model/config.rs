use serde::{Deserialize, Serialize};

use crate::direction::NUM_DIRECTIONS;
use crate::error::{Error, Result};
use crate::features::NUM_PAIRS;

/// One convolutional block: `convs` × (conv 1×2 + ReLU), then a 2×2 max pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSpec {
    pub convs: usize,
    pub out_channels: usize,
}

/// How the 3×F×T phase matrix is presented to the first convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputLayout {
    /// One channel, the three IPD maps stacked along frequency: 1×3F×T.
    SingleChannelStacked,
    /// The three IPD maps as channels: 3×F×T.
    #[default]
    ThreeChannel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Binary cross-entropy averaged over the nine softmax outputs.
    #[default]
    SoftmaxBce,
    /// Categorical cross-entropy on the softmax.
    CrossEntropy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JerryNetConfig {
    pub blocks: Vec<BlockSpec>,
    /// (height, width) of every convolution kernel; height runs along frequency.
    pub kernel: [usize; 2],
    pub stride: usize,
    pub pool: [usize; 2],
    /// Hidden fully connected widths; the output layer is appended.
    pub fc_dims: Vec<usize>,
    pub num_classes: usize,
    pub input_layout: InputLayout,
    pub loss: LossKind,
}

impl Default for JerryNetConfig {
    /// Desk-scale network: four single-conv blocks, 256/64 hidden units.
    fn default() -> Self {
        Self {
            blocks: [8, 16, 32, 64]
                .into_iter()
                .map(|c| BlockSpec {
                    convs: 1,
                    out_channels: c,
                })
                .collect(),
            kernel: [1, 2],
            stride: 1,
            pool: [2, 2],
            fc_dims: vec![256, 64],
            num_classes: NUM_DIRECTIONS,
            input_layout: InputLayout::ThreeChannel,
            loss: LossKind::SoftmaxBce,
        }
    }
}

/// Shape of a feature map, channels × height × width.
pub type Shape3 = [usize; 3];

impl JerryNetConfig {
    /// Ten two-conv blocks feeding 4096- and 256-unit dense layers. Needs an
    /// input at least 1024 wide and tall.
    pub fn full_size() -> Self {
        Self {
            blocks: [16, 16, 32, 32, 64, 64, 128, 128, 256, 256]
                .into_iter()
                .map(|c| BlockSpec {
                    convs: 2,
                    out_channels: c,
                })
                .collect(),
            fc_dims: vec![4096, 256],
            ..Self::default()
        }
    }

    /// Tiny two-block network used for gradient checks.
    pub fn toy() -> Self {
        Self {
            blocks: vec![
                BlockSpec {
                    convs: 1,
                    out_channels: 2,
                },
                BlockSpec {
                    convs: 1,
                    out_channels: 3,
                },
            ],
            fc_dims: vec![5, 4],
            ..Self::default()
        }
    }

    pub fn input_shape(&self, num_bins: usize, num_frames: usize) -> Shape3 {
        match self.input_layout {
            InputLayout::ThreeChannel => [NUM_PAIRS, num_bins, num_frames],
            InputLayout::SingleChannelStacked => [1, NUM_PAIRS * num_bins, num_frames],
        }
    }

    /// Checks the fixed architectural constraints that do not depend on input size.
    pub fn validate(&self) -> Result<()> {
        if self.kernel != [1, 2] {
            return Err(Error::invalid(format!("kernel must be 1x2, got {:?}", self.kernel)));
        }
        if self.stride != 1 {
            return Err(Error::invalid(format!("stride must be 1, got {}", self.stride)));
        }
        if self.pool[0] == 0 || self.pool[1] == 0 {
            return Err(Error::invalid("pool size must be positive"));
        }
        if self.num_classes != NUM_DIRECTIONS {
            return Err(Error::invalid(format!(
                "num_classes must be {NUM_DIRECTIONS}, got {}",
                self.num_classes
            )));
        }
        if self.blocks.is_empty() {
            return Err(Error::invalid("at least one block is required"));
        }
        if self.blocks.iter().any(|b| b.convs == 0 || b.out_channels == 0) {
            return Err(Error::invalid("blocks need at least one conv and one channel"));
        }
        if self.fc_dims.contains(&0) {
            return Err(Error::invalid("dense layers need at least one unit"));
        }
        Ok(())
    }

    /// Feature-map shape after each block, validating that no convolution or
    /// pool shrinks a dimension below 1.
    pub fn block_shapes(&self, input: Shape3) -> Result<Vec<Shape3>> {
        self.validate()?;
        let [mut c, mut h, mut w] = input;
        let mut shapes = Vec::with_capacity(self.blocks.len());
        for (b, block) in self.blocks.iter().enumerate() {
            for _ in 0..block.convs {
                if h < self.kernel[0] || w < self.kernel[1] {
                    return Err(Error::invalid(format!(
                        "block {b}: {h}x{w} feature map is smaller than the kernel"
                    )));
                }
                h = h - self.kernel[0] + 1;
                w = w - self.kernel[1] + 1;
                c = block.out_channels;
            }
            if h / self.pool[0] == 0 || w / self.pool[1] == 0 {
                return Err(Error::invalid(format!(
                    "block {b}: pooling a {h}x{w} map would leave an empty dimension"
                )));
            }
            h /= self.pool[0];
            w /= self.pool[1];
            shapes.push([c, h, w]);
        }
        Ok(shapes)
    }

    /// Flattened width entering the first dense layer.
    pub fn flat_dim(&self, input: Shape3) -> Result<usize> {
        let last = *self.block_shapes(input)?.last().expect("at least one block");
        Ok(last.iter().product())
    }

    /// Canonical JSON used for hashing.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
