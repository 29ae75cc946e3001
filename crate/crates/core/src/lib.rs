//! Lung ultrasound preprocessing.
//!
//! The crate covers the image-side pipeline used to study how the
//! subcutaneous tissue, the pleural line and Merlin's space each contribute
//! to severity classification:
//!
//! 1. [`pleura`] – pleural-line segmentation (blur, resize, Sobel/intensity
//!    thresholds, per-column candidates, region consolidation, quartic fit).
//! 2. [`curves`] – cropping above the pleura and column-wise straightening.
//! 3. [`masking`] – SubQ / pleura / Merlin partition and the seven masked
//!    input variants, each a named [`masking::MaskStrategy`].
//! 4. [`clips`] – segment-based frame sampling, augmentation and class
//!    balancing.
//! 5. [`metrics`] – accuracy, F1 and one-vs-all ROC/AUC.
//! 6. [`phantom`] – synthetic B-mode phantoms with exact ground truth.

pub mod clips;
pub mod curves;
pub mod error;
pub mod imgops;
pub mod io;
pub mod masking;
pub mod metrics;
pub mod phantom;
pub mod pleura;
pub mod types;

pub use error::{Error, Result};
pub use types::{Clip, Curve, Frame, Point, SeverityScore};
