pub mod assess;
pub mod enhance;
pub mod error;
pub mod imgcore;
pub mod massdetect;
pub mod mcdetect;
pub mod phantom;
pub mod segment;
