//! Mock AV stack: route following and run verdicts.

mod client;
mod pursuit;
mod route;

pub use client::{
    run_av_client, run_av_stream, AvClientConfig, AvReport, DeviationTrace, TraceSample, Verdict,
};
pub use pursuit::{
    follow_route, lookahead_distance, pursuit_angle, target_speed, PursuitParams, VehicleGeometry,
};
pub use route::{lateral_deviation, Pose2, Projection, Route, RouteError};
