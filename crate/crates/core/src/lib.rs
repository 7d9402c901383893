pub mod complex_grid;
pub mod config;
pub mod expr;
pub mod lie_group;
pub mod model_spaces;
pub mod pipeline;
pub mod report;
pub mod synthesis;
pub mod verification;
pub mod weierstrass;
