//! Multilevel supervisory control synthesis.
//!
//! A model of plant automata and requirements is refined into its most
//! refined product system, turned into a dependency structure matrix,
//! clustered (optionally with recursive bus detection), and transformed
//! into a tree of small synthesis problems solved one by one.

pub mod clustering;
pub mod compose;
pub mod matrix;
pub mod model;
pub mod refine;
pub mod report;
pub mod synthesis;
pub mod transform;

pub use clustering::{cluster, load_clustering, Cluster, ClusterParams};
pub use model::{parse_model, ModelSet};
pub use refine::{refine, ProductSystem};
pub use report::{analyze, pipeline, render_css_profile, PipelineConfig};
pub use synthesis::{synthesize, synthesize_tree, TreeSynthesisResult};
pub use transform::{transform_c_to_t, SynthesisTree};
