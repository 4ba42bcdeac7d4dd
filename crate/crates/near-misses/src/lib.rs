pub mod bootstrap;
pub mod counting;
pub mod duality;
pub mod kernels;
pub mod linalg;
pub mod oscillatory;
pub mod poly;
pub mod surfaces;
pub mod util;
