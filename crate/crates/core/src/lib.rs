pub mod audit;
pub mod classify;
pub mod seqcore;
pub mod simulate;
pub mod systems;
