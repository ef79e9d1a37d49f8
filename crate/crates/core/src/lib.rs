pub mod earth;
pub mod error;
pub mod estimator;
pub mod inmotion;
pub mod io;
pub mod odometer;
pub mod pipeline;
pub mod report;
pub mod scenario;
pub mod sim;
pub mod strapdown;

pub use earth::{Dcm, EarthModel, GeodeticPosition, MisalignmentAngles, Vec3};
pub use error::{Error, Result};
pub use odometer::{OdometerReading, SpeedEstimate};
pub use strapdown::{ImuIncrement, NavState};
