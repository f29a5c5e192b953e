// SPDX-License-Identifier: MIT OR Apache-2.0

//! Evidence that steering acts through a small set of output tokens:
//! unembedding geometry, log-odds tracking, the logit lens, logit clamping,
//! neuron alignment and ablation, and comparison with contrastive
//! directions.

mod intervene;
mod lens;
mod neurons;
mod unembed;

pub use intervene::{
    ablation_csv, ablation_sweep, clamp_csv, clamping_experiment, AblationRow, ClampOptions,
    ClampResult, RankedNeuron,
};
pub use lens::{
    log_odds, log_sum_exp, logit_lens, logodds_csv, logodds_table, lens_csv, LensRow, LogOddsRow,
    TopToken,
};
pub use neurons::{
    alignment_csv, compare_contrastive, contrastive_csv, neuron_alignment, AlignmentReport,
    ContrastiveRow, NeuronAlignment,
};
pub use unembed::{project_unembeddings, Centering, TokenGroupProjection, TokenProjection, ANGLE_ORIENTATION};
