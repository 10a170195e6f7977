//! Per-class alignment, illumination transfer and recognition.

mod align;
mod recognize;

pub use align::{align_all, align_single, alignment_success, AlignOptions, AlignmentOutcome};
pub use recognize::{
    recognize, src_baseline, transfer_gallery, RecognitionResult, RecognizeOptions, TransferredGallery,
    CONFIDENCE_RATIO,
};
