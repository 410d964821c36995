pub mod attribute;
pub mod glb;
pub mod health;
pub mod stats;
