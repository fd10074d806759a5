pub mod analytics;
pub mod classify;
pub mod cli;
pub mod collect;
pub mod config;
pub mod crawl;
pub mod error;
pub mod fixtures;
pub mod flatfile;
pub mod harvest;
pub mod infiltrate;
pub mod pdns;
pub mod patterns;
pub mod psl;
pub mod report;
pub mod types;

pub use error::{Error, Result};
pub use psl::{to_apex, ApexDomain};
pub use types::{merge_intervals, Cidr, DateDay, Interval, ServiceId};
