pub mod jet;
pub mod oracle;
pub mod setup;
