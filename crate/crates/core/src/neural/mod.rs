//! Receiver/transmitter networks with a stochastic binarization bottleneck, trained
//! end to end on the effective channel gain.

mod io;
mod layer;
mod loss;
mod model;
mod optim;
mod table;
mod train;

pub use layer::{
    sign_binarize, stochastic_binarize, Activation, Binarization, Layer, LayerGrad,
    MIN_NORMALIZE_NORM,
};
pub use loss::{loss, loss_and_gradients, Gradients, TrainingSample};
pub use model::{ArchMeta, Architecture, FeedbackModel};
pub use optim::Optimizer;
pub use table::{index_of_word, word_for_index, DecoderTable, MAX_TABLE_BITS};
pub use train::{
    synthesize_batch, trace_csv, train, train_from, TraceRow, TrainConfig, TrainOutcome,
};
