//! Small numerical building blocks shared by the model modules.

pub mod fit;
pub mod quad;
pub mod roots;
pub mod sum;
pub mod trajectory;
