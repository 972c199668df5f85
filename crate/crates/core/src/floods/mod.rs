//! GDACS flood catalogue client and flood-event Brier skill.

mod client;
mod event;

pub use client::{parse_events, GdacsClient, Transport, GDACS_EVENT_LIST, PAGE_SIZE};
pub use event::{
    events_per_year, filter_by_issuance, flood_bss, write_events_csv, AlertLevel, FloodEvent, BBOX_HALF_WIDTH,
};
