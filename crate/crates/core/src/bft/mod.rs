//! Machinery shared by the three atomic-broadcast protocols.

mod future;
mod newlog;
mod replica;

pub use crate::msg::leader;
pub use future::FutureBuffer;
pub use newlog::{fill_log, select_prepared, valid_new_leader, Selected};
pub use replica::Replica;

/// Which protocol a replica runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Light,
    Rotation,
    HotStuff,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Normal,
    Initializing,
    Advanced,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub enum Phase {
    #[default]
    Start,
    Preprepared,
    Prepared,
    Precommitted,
    Committed,
}
