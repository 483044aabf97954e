//! Reading and writing data, propensity estimation, the forest archive format
//! and post-hoc subgroup analysis.

mod archive;
mod data;
mod propensity;
mod subgroup;

pub use archive::{DrawRecord, ForestArchive, NodeRecord, SCHEMA_VERSION};
pub use data::{cate_table_text, load_csv, load_csv_with, read_table, write_cate_table, write_table, CsvSpec, Table};
pub use propensity::{estimate_propensity, PropensityFit};
pub use subgroup::{
    render_subgroups, subgroup_difference, subgroup_posterior, subgroup_tree, Subgroup,
    SubgroupDifference, SubgroupTree,
};
