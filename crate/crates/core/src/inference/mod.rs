//! Model backends, multi-ACCDOA decoding and the analytic cost model.

mod accdoa;
mod backend;
mod cost;

pub use accdoa::{
    decode_multi_accdoa, read_label_csv, write_events_csv, DecodeConfig, LabelRow, MultiAccdoaOutput, SeldEvent,
    DEFAULT_CLASSES, DEFAULT_TRACKS,
};
pub use backend::{
    behavior_from_spec, make_mock_backend, run_backend, InputSpec, MockBackend, MockBehavior, ModelBackend, OutputSpec, ScriptedEvent,
    MOCK_TIME_POOL,
};
pub use cost::{count_cost, CostReport, Layer, LayerCost, LayerGraph, RecurrentCell, TensorShape};
