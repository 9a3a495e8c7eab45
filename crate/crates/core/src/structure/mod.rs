//! The structural layers that sit between the pair encoder and the loss.

mod attention;
mod rgcn;
mod siamese;
mod synlstm;

pub use attention::{AttentionOutput, MaskedAttentionLayer};
pub use rgcn::{normalized_adjacency, RgcnLayer};
pub use siamese::SiameseScorer;
pub use synlstm::{bi_synlstm, GateParams, SynLstmCell};
