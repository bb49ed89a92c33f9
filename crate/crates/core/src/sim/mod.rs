//! Mock simulator: kinematic vehicle, synthetic sensors and the lockstep
//! server loop.

mod load;
mod sensors;
mod server;
mod vehicle;

pub use load::LoadModel;
pub use sensors::{
    generate_camera, generate_gnss, generate_imu, generate_lidar, generate_vehicle_status,
    lidar_point_count, Obstacle, World, LIDAR_MAX_RANGE,
};
pub use server::{run_sim_server, serve, serve_stream, step_frames, SimEnd, SimReport, SimServerConfig};
pub use vehicle::{step_vehicle, VehicleState};
