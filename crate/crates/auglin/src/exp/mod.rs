//! Experiment engine: named presets, a generic sweep runner, structured
//! config parsing, and CSV/SVG emission.

pub mod config;
pub mod csvio;
pub mod presets;
pub mod svg;
pub mod sweep;
pub mod table;

pub use config::{parse_config, validate, ConfigError, ExperimentConfig};
pub use csvio::{emit_csv, parse_csv, read_csv, to_csv_string};
pub use presets::{list_presets, run_preset};
pub use svg::{emit_plot, render_svg, PlotSpec};
pub use sweep::run_sweep;
pub use table::{median, quartiles, spearman, Cell, ResultsTable};
