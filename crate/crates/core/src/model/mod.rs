//! Domain types shared by every layer of the stack.

pub mod address;
pub mod geo;
pub mod lifecycle;
pub mod manifest;
pub mod platform;
pub mod record;
pub mod units;

pub use address::{AddressError, AddressMap, BindError, GlobalAddress, LocalAddress};
pub use geo::{geo_distance_m, GeoPoint, InvalidGeoPoint};
pub use lifecycle::{transition, IllegalTransition, Lifecycle, LifecycleEvent, Step, VsState};
pub use manifest::{Comparator, ManifestError, TaskManifest, ThresholdRule};
pub use platform::Platform;
pub use record::{VirtualSensorRecord, VsView};
pub use units::{convert_unit, Capability, Unit, UnitError};
