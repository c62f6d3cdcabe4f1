pub mod circuit_file;
pub mod engine;
pub mod experiments;
pub mod gates;
pub mod oracle;
pub mod pauli;
pub mod provenance;
pub mod tomography;
