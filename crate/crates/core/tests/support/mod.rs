#![allow(dead_code)]

pub mod bleu_fixture;
pub mod kfold_oracle;
pub mod nmt_oracle;
pub mod smt_oracle;
