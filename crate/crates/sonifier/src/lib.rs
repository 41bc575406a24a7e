pub mod live;
pub mod server;
