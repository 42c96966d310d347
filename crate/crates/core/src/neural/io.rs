//! Text model format: header, then per layer a `layer <out> <in> <activation>` line,
//! `out` weight rows and one bias row, all at 17 significant digits.

use std::path::Path;

use ndarray::{Array1, Array2};

use super::layer::{Activation, Layer};
use super::model::{ArchMeta, FeedbackModel};
use crate::artifact::{self, float_line, Reader};
use crate::error::Result;

const FILE_TAG: &str = "mimofb-model";
const FILE_VERSION: u32 = 1;

impl FeedbackModel {
    pub fn to_text(&self) -> String {
        let meta = self.meta();
        let mut body = format!(
            "{FILE_TAG} {FILE_VERSION}\nn_tx {}\nn_rx {}\npilot_len {}\nbits {}\n",
            meta.n_tx,
            meta.n_rx,
            meta.pilot_len,
            self.bits()
        );
        for (name, layers) in [
            ("encoder", self.encoder_layers()),
            ("decoder", self.decoder_layers()),
        ] {
            body.push_str(&format!("{name} {}\n", layers.len()));
            for l in layers {
                body.push_str(&format!(
                    "layer {} {} {}\n",
                    l.outputs(),
                    l.inputs(),
                    l.activation
                ));
                for row in l.weight.rows() {
                    body.push_str(&float_line(row.iter().copied()));
                }
                body.push_str(&float_line(l.bias.iter().copied()));
            }
        }
        artifact::seal(body)
    }

    pub fn from_text(path: &Path, text: &str) -> Result<Self> {
        let mut r = artifact::unseal(path, text)?;
        let version: u32 = r.value(FILE_TAG)?;
        if version != FILE_VERSION {
            return Err(r.error(format!("unsupported model version {version}")));
        }
        let meta = ArchMeta {
            n_tx: r.value("n_tx")?,
            n_rx: r.value("n_rx")?,
            pilot_len: r.value("pilot_len")?,
        };
        let bits: usize = r.value("bits")?;
        let encoder = read_stack(&mut r, "encoder")?;
        let decoder = read_stack(&mut r, "decoder")?;
        r.finish()?;
        FeedbackModel::from_layers(meta, bits, encoder, decoder)
            .map_err(|e| artifact::corrupt(path, e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(path, &text)
    }
}

fn read_stack(r: &mut Reader<'_>, name: &str) -> Result<Vec<Layer>> {
    let count: usize = r.value(name)?;
    if count == 0 || count > 64 {
        return Err(r.error(format!("implausible {name} depth {count}")));
    }
    let mut layers = Vec::with_capacity(count);
    for _ in 0..count {
        let header = r.expect_key("layer")?;
        let [outputs, inputs, activation] = header.as_slice() else {
            return Err(r.error("layer header needs <outputs> <inputs> <activation>"));
        };
        let outputs: usize = outputs.parse().map_err(|_| r.error("bad layer width"))?;
        let inputs: usize = inputs.parse().map_err(|_| r.error("bad layer width"))?;
        let activation: Activation = activation.parse().map_err(|e: String| r.error(e))?;
        let mut weight = Vec::with_capacity(outputs * inputs);
        for _ in 0..outputs {
            weight.extend(r.floats(inputs)?);
        }
        let bias = r.floats(outputs)?;
        layers.push(Layer {
            weight: Array2::from_shape_vec((outputs, inputs), weight)
                .map_err(|e| r.error(e.to_string()))?,
            bias: Array1::from(bias),
            activation,
        });
    }
    Ok(layers)
}
