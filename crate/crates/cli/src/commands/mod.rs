pub mod conceptor;
pub mod debias;
pub mod ingest;
pub mod project;
pub mod simeval;
pub mod weat;
