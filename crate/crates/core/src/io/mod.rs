pub mod index_file;
pub mod vectors;
