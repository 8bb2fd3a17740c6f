pub mod audit;
pub mod regions;
pub mod report;
pub mod score;
pub mod surface;
pub mod variants;
