//! LFMCW radar dictionary, scenario scripting, measurement synthesis and
//! dataset files.

pub mod dataset;
pub mod scenario;
pub mod sensor;

pub use dataset::{read_dataset, write_dataset, DatasetHeader};
pub use scenario::{
    simulate, truth_positions, Dataset, GroundTruthTrack, MeasurementFrame, Normalization, ScenarioConfig, TrackInit,
    TrackScript,
};
pub use sensor::{RadarSensor, SPEED_OF_LIGHT};
