//! Front ends for the question-answering pipeline.

pub mod commands;
pub mod service;
