pub mod oracle;
pub mod separable;
