#![allow(dead_code)]

pub mod criteria;
pub mod fixtures;
pub mod gen;
pub mod oracle;
