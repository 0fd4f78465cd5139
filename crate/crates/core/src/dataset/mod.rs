//! Generation, normalization, batching and storage of the experiment datasets.

mod batches;
mod build;
mod io;
mod norm;
mod spec;

pub use batches::{batch_iterator, BatchIter};
pub use build::{build_dataset, Dataset, SampleMeta};
pub use io::{read_dataset, write_dataset, SpectraHeader};
pub use norm::{normalize_labels, NormRecord};
pub use spec::{
    experiment_specs, validation_name, DatasetKind, DatasetSpec, ExperimentScale, MixPolicy, SubstrateMix,
    HHX_PER_OIL_PCT, VALIDATION_OIL_PCT,
};
