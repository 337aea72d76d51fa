//! HTTP service and command-line tool around the `shotadvisor` library.

pub mod cli;
pub mod http;
mod transport;

pub use transport::ReqwestTransport;
