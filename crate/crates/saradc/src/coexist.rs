//! Flexible duty-cycle coexistence between vehicle NR-U transmissions and
//! WiFi on the unlicensed band.
//!
//! A fixed slot of length `o_total` is split into an exclusive vehicle part
//! `o1` and a WiFi part `o2 = o_total - o1`; `o2` is always derived, never
//! stored, so the split conserves airtime exactly. Vehicles attached to the
//! licensed macro tier do not contend for unlicensed airtime at all: their
//! semantic link uses the whole slot and their WiFi group keeps the whole
//! slot too.

/// Duty-cycle slot: total length in seconds and the vehicle fraction, bounded
/// to keep both services live.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DutyCycle {
    pub o_total_s: f64,
    pub o1_fraction: f64,
    pub o1_min: f64,
    pub o1_max: f64,
}

impl DutyCycle {
    pub fn new(o_total_s: f64, o1_fraction: f64, o1_min: f64, o1_max: f64) -> Self {
        debug_assert!(o_total_s > 0.0);
        debug_assert!(0.0 <= o1_min && o1_min <= o1_max && o1_max <= 1.0);
        Self {
            o_total_s,
            o1_fraction,
            o1_min,
            o1_max,
        }
    }
}

/// Result of [`split_slot`]: the two segment lengths plus a flag set when the
/// requested fraction fell outside the configured bounds and was clamped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotSplit {
    pub o1_s: f64,
    pub o2_s: f64,
    pub clamped: bool,
}

/// Splits the slot; `o1 + o2 = o_total` holds exactly because `o2` is
/// computed as the remainder.
pub fn split_slot(dc: &DutyCycle) -> SlotSplit {
    let clamped = dc.o1_fraction < dc.o1_min || dc.o1_fraction > dc.o1_max;
    let fraction = dc.o1_fraction.clamp(dc.o1_min, dc.o1_max);
    let o1_s = fraction * dc.o_total_s;
    SlotSplit {
        o1_s,
        o2_s: dc.o_total_s - o1_s,
        clamped,
    }
}

/// WiFi users sharing one vehicle's unlicensed neighbourhood: their nominal
/// rate, the vehicle they contend with, and the per-group throughput floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WifiGroup {
    /// Nominal WiFi rate in bits/s.
    pub rate_bits_s: f64,
    /// Index of the vehicle whose duty cycle governs this group's airtime.
    pub associated_vehicle: usize,
    /// Lower semantic-throughput threshold for this group, in suts.
    pub st_floor: f64,
}

impl WifiGroup {
    pub fn new(rate_bits_s: f64, associated_vehicle: usize, st_floor: f64) -> Self {
        debug_assert!(rate_bits_s > 0.0);
        Self {
            rate_bits_s,
            associated_vehicle,
            st_floor,
        }
    }
}

/// Semantic throughput of one WiFi group over its airtime `o2_s`, in suts:
/// `(R_w / u) * o2`. Callers pass `o2_s = o_total` when the associated
/// vehicle sits on the licensed band.
pub fn st_wifi(group: &WifiGroup, u: u32, o2_s: f64) -> f64 {
    debug_assert!(u >= 1);
    group.rate_bits_s / u as f64 * o2_s
}
