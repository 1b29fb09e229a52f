// Each test target uses a different subset of these helpers.
#![allow(dead_code)]

pub mod grad;
pub mod sim;
