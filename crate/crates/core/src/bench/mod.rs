//! Operational layer: the problem catalog, plant and data files, batch runs
//! with CSV reporting, and SVG plots of two-objective fronts.

mod catalog;
mod experiment;
mod formats;
mod io;
mod plot;

pub use catalog::{
    catalog_problem, lpvs, ocs_observer_gains, plant_problem, Mode, Settings, CATALOG_IDS, DEFAULT_GAIN_BOUND,
    SUBSPACE_SCALES, UNSTABLE_PENALTY,
};
pub use experiment::{
    apf_csv, fmt_real, results_csv, run_experiment, run_problem, ExperimentReport, ResultRow, RunConfig, RunStatus,
    Summary,
};
pub use formats::{
    amf_to_json, evp_result_json, parse_amf, parse_gain, parse_place_task, place_result_json, real_or_inf,
};
pub use io::{load_plant, parse_plant, plant_to_json, save_plant, CatalogData};
pub use plot::{emit_plot, read_front, render_svg};
