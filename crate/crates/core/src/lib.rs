//! Partial-discharge detection for single-cycle power-line voltage
//! waveforms.
//!
//! Each waveform is decomposed with STL at several seasonal window lengths;
//! absolute-value statistics of the residuals form a feature vector that is
//! min-max scaled and classified by a kernel SVM trained with SMO.

pub mod eval;
pub mod features;
pub mod json;
pub mod pipeline;
pub mod sampler;
pub mod stl;
pub mod svm;
pub mod waveform;
