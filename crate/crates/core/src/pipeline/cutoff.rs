use serde::{Deserialize, Serialize};

use crate::cdf::SeriesEntry;
use crate::correction::Availability;
use crate::error::{Error, LeakageViolation, Result};
use crate::griddata::{CalendarDate, PERIOD_DAYS};

/// The last instant a forecast for `target` at lead `lead_days` may draw on:
/// everything strictly before `target - lead + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservabilityCutoff {
    pub target: CalendarDate,
    pub lead_days: i64,
    pub cutoff: CalendarDate,
}

impl ObservabilityCutoff {
    pub fn new(target: CalendarDate, lead_days: i64) -> Self {
        ObservabilityCutoff {
            target,
            lead_days,
            cutoff: target.add_days(-lead_days + 1),
        }
    }

    pub fn shifted(mut self, days: i64) -> Self {
        self.cutoff = self.cutoff.add_days(days);
        self
    }

    /// A forecast issued on `issued` exists before the cutoff.
    pub fn issued_usable(&self, issued: CalendarDate) -> bool {
        issued < self.cutoff
    }

    /// The observation period starting on `start` has ended before the cutoff.
    pub fn period_usable(&self, start: CalendarDate) -> bool {
        start.add_days(PERIOD_DAYS - 1) < self.cutoff
    }
}

/// Availability rule handed to the corrections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CutoffRule {
    #[default]
    Strict,
    /// Moves the cutoff `days` later. Exists to prove that the guard fires.
    Widened { days: i64 },
}

/// A [`CutoffRule`] bound to a lead time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RuleAvailability {
    pub rule: CutoffRule,
    pub lead_days: i64,
}

impl RuleAvailability {
    pub fn cutoff(&self, target: CalendarDate) -> ObservabilityCutoff {
        let c = ObservabilityCutoff::new(target, self.lead_days);
        match self.rule {
            CutoffRule::Strict => c,
            CutoffRule::Widened { days } => c.shifted(days),
        }
    }
}

impl Availability for RuleAvailability {
    fn entry_usable(&self, target: CalendarDate, entry: &SeriesEntry) -> bool {
        let c = self.cutoff(target);
        c.issued_usable(entry.issued) && c.period_usable(entry.verifying)
    }

    fn observation_usable(&self, target: CalendarDate, period_start: CalendarDate) -> bool {
        self.cutoff(target).period_usable(period_start)
    }
}

/// Audits every training access of a replay against the strict cutoff,
/// independently of the rule the corrections were given.
#[derive(Debug, Clone)]
pub struct AccessGuard {
    lead_days: i64,
    checks: usize,
}

impl AccessGuard {
    pub fn new(lead_days: i64) -> Self {
        AccessGuard { lead_days, checks: 0 }
    }

    pub fn checks(&self) -> usize {
        self.checks
    }

    fn violation(&self, target: CalendarDate, what: &str, accessed: CalendarDate) -> Error {
        Error::Leakage(LeakageViolation {
            target,
            cutoff: ObservabilityCutoff::new(target, self.lead_days).cutoff,
            what: what.into(),
            accessed,
        })
    }

    pub fn check_issued(&mut self, target: CalendarDate, what: &str, issued: CalendarDate) -> Result<()> {
        self.checks += 1;
        if ObservabilityCutoff::new(target, self.lead_days).issued_usable(issued) {
            Ok(())
        } else {
            Err(self.violation(target, what, issued))
        }
    }

    pub fn check_period(&mut self, target: CalendarDate, what: &str, start: CalendarDate) -> Result<()> {
        self.checks += 1;
        if ObservabilityCutoff::new(target, self.lead_days).period_usable(start) {
            Ok(())
        } else {
            Err(self.violation(target, what, start))
        }
    }

    pub fn check_entry(&mut self, target: CalendarDate, what: &str, entry: &SeriesEntry) -> Result<()> {
        self.check_issued(target, what, entry.issued)?;
        self.check_period(target, &format!("{what} outcome"), entry.verifying)
    }
}
