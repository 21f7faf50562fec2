pub mod classical;
pub mod mlkem;

mod common;
