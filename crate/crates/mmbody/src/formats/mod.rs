pub mod checkpoint;
pub mod lvol;
pub mod obj;
pub mod ply;
pub mod report;
pub mod tables;
