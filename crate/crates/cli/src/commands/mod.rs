pub mod mask;
pub mod metrics;
pub mod phantom;
pub mod pipeline;
pub mod segment;
pub mod straighten;

pub use mask::cmd_mask;
pub use metrics::cmd_metrics;
pub use phantom::cmd_phantom;
pub use pipeline::cmd_pipeline;
pub use segment::cmd_segment;
pub use straighten::cmd_straighten;
