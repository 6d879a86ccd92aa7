//! Synthetic data: the expert-rule tabular set and rock phantoms.

pub mod phantom;
pub mod tabular;

pub use phantom::{generate_phantom, sparse_mask, Intensity, IntensityMap, PhantomConfig};
pub use tabular::{
    generate_table1_dataset, label_function, table1_catalog, table1_rows, SynthTabularConfig,
    TABLE1_CLASSES, TABLE1_COLUMNS, TABLE1_LABEL_COLUMN,
};
