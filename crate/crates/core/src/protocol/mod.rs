//! Wire format and lockstep tick coordination.

mod clock;
mod ledger;
mod wire;

pub use clock::{InvalidStep, SimClock};
pub use ledger::{
    check_ordering, AwaitError, LedgerError, SeqEvent, TickCoordinator, TickDecision, TickLedger,
    TickWaiter, TimeoutReport,
};
pub use wire::{
    decode_frame, encode_frame, frame_header, read_frame, write_frame, MsgType, WireError,
    WireFrame, DEFAULT_MAX_PAYLOAD, HEADER_LEN, MAGIC,
};

/// Default simulator-side listener port.
pub const DEFAULT_SIM_PORT: u16 = 2000;
/// Default AV-side listener port.
pub const DEFAULT_AV_PORT: u16 = 9090;
