pub mod assertions;
pub mod corpus;
pub mod driver;
pub mod heapstate;
pub mod inline;
pub mod ir;
pub mod oracle;
pub mod summarize;
