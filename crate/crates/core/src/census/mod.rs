pub mod canon;
pub mod components;
pub mod report;

pub use canon::{canonical_form, enumerate_classes, GraphClass, K_MAX};
pub use components::{components, Components};
pub use report::{census, census_strict, weighted_count, CensusReport, ComponentInfo, CountMode, Frame};
