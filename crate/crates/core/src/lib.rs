pub mod ingest;
pub mod features;
pub mod regress;
pub mod analysis;
pub mod pipeline;
pub mod synth;
