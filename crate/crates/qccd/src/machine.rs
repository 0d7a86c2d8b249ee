//! Trap topology, ion crystals, transport primitives, cooling, and
//! noise parameters.
//!
//! The device is a linear chain of zones. The default layout has five:
//! a load zone `L`, two gate zones `G1`/`G2` with three sub-slots each
//! (left, center, right), and two auxiliary zones `A1`/`A2` between
//! them, for nine addressable sites in chain order
//! `L, A1, G1.L, G1.C, G1.R, A2, G2.L, G2.C, G2.R`.
//!
//! Ions come in two species: qubits and coolants, always in balanced
//! numbers. They group into two- and four-ion crystals whose species
//! patterns are fixed by the cooling scheme — a two-ion crystal is a
//! qubit plus its coolant, a four-ion crystal is two such pairs meeting
//! either coolant-out (`[q,c,c,q]`) or coolant-in (`[c,q,q,c]`).
//!
//! Transport is a small primitive library with measured durations and
//! per-move heating:
//!
//! * intrazone shift — move a two-ion crystal one sub-slot over,
//! * interzone shift — move a two-ion crystal to the adjacent zone,
//! * split — divide a four-ion crystal at a gate-zone center into its
//!   two pairs (linear order preserved),
//! * combine — the inverse merge,
//! * swap — physically rotate a four-ion crystal, reversing its ion
//!   order (the only primitive that reorders qubits).
//!
//! Heating is tracked as dimensionless ledger units per crystal and
//! cleared by cooling stages; the scheduler keeps the ledger below a
//! threshold before any gate. Scheduled transport runs 10% longer than
//! the table value to account for waveform interpolation margins.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Distance between adjacent sub-slots of a gate zone, micrometers.
pub const INTRAZONE_DISTANCE_UM: f64 = 110.0;

/// Scheduled transport duration = table duration times this factor.
pub const TRANSPORT_OVERHEAD: f64 = 1.10;

// ---------------------------------------------------------------------------
// Layout

/// What a zone is for. Only gate zones have sub-slot structure and may
/// host splits, combines, swaps, and gates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZoneKind {
    Load,
    Gate,
    Storage,
    Auxiliary,
}

/// Position within a zone. Gate zones have all three; other zones
/// collapse to a single `Center` site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubSlot {
    Left,
    Center,
    Right,
}

/// One addressable location in the trap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Site {
    pub zone: usize,
    pub slot: SubSlot,
}

impl Site {
    pub fn new(zone: usize, slot: SubSlot) -> Self {
        Site { zone, slot }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Zone {
    pub name: String,
    pub kind: ZoneKind,
}

/// Linear chain of zones. Zone order in the vector is chain order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapLayout {
    pub zones: Vec<Zone>,
    #[serde(default = "defaults::intrazone_distance_um")]
    pub intrazone_distance_um: f64,
}

impl Default for TrapLayout {
    /// The five-zone production layout: `L, A1, G1, A2, G2`.
    fn default() -> Self {
        let z = |name: &str, kind| Zone {
            name: name.to_string(),
            kind,
        };
        TrapLayout {
            zones: vec![
                z("L", ZoneKind::Load),
                z("A1", ZoneKind::Auxiliary),
                z("G1", ZoneKind::Gate),
                z("A2", ZoneKind::Auxiliary),
                z("G2", ZoneKind::Gate),
            ],
            intrazone_distance_um: INTRAZONE_DISTANCE_UM,
        }
    }
}

impl TrapLayout {
    pub fn validate(&self) -> Result<()> {
        if self.zones.is_empty() {
            return Err(Error::Machine("layout has no zones".into()));
        }
        for (i, z) in self.zones.iter().enumerate() {
            if z.name.is_empty() {
                return Err(Error::Machine(format!("zone {i} has an empty name")));
            }
            if self.zones[..i].iter().any(|w| w.name == z.name) {
                return Err(Error::Machine(format!("duplicate zone name '{}'", z.name)));
            }
        }
        if !self.zones.iter().any(|z| z.kind == ZoneKind::Gate) {
            return Err(Error::Machine("layout has no gate zone".into()));
        }
        if !(self.intrazone_distance_um.is_finite() && self.intrazone_distance_um > 0.0) {
            return Err(Error::Machine("intrazone distance must be positive".into()));
        }
        Ok(())
    }

    /// Sub-slots a zone exposes, in chain order.
    pub fn slots(&self, zone: usize) -> &'static [SubSlot] {
        match self.zones[zone].kind {
            ZoneKind::Gate => &[SubSlot::Left, SubSlot::Center, SubSlot::Right],
            _ => &[SubSlot::Center],
        }
    }

    /// All sites in chain order, leftmost first.
    pub fn sites(&self) -> Vec<Site> {
        let mut out = Vec::new();
        for (zi, _) in self.zones.iter().enumerate() {
            for &slot in self.slots(zi) {
                out.push(Site::new(zi, slot));
            }
        }
        out
    }

    /// Position of a site along the chain (0 = leftmost).
    pub fn position(&self, site: Site) -> Result<usize> {
        self.sites()
            .iter()
            .position(|&s| s == site)
            .ok_or_else(|| Error::Machine(format!("no such site {}", self.site_name(site))))
    }

    /// Whether two sites are nearest neighbors along the chain.
    pub fn adjacent(&self, a: Site, b: Site) -> bool {
        match (self.position(a), self.position(b)) {
            (Ok(pa), Ok(pb)) => pa.abs_diff(pb) == 1,
            _ => false,
        }
    }

    pub fn is_gate_zone(&self, zone: usize) -> bool {
        zone < self.zones.len() && self.zones[zone].kind == ZoneKind::Gate
    }

    /// Indices of gate zones in chain order.
    pub fn gate_zones(&self) -> Vec<usize> {
        (0..self.zones.len())
            .filter(|&z| self.is_gate_zone(z))
            .collect()
    }

    /// Human-readable site label, e.g. `G1.L`; single-site zones print
    /// as the bare zone name.
    pub fn site_name(&self, site: Site) -> String {
        let zone = self
            .zones
            .get(site.zone)
            .map(|z| z.name.as_str())
            .unwrap_or("?");
        if site.zone < self.zones.len() && self.slots(site.zone).len() == 1 {
            zone.to_string()
        } else {
            let s = match site.slot {
                SubSlot::Left => "L",
                SubSlot::Center => "C",
                SubSlot::Right => "R",
            };
            format!("{zone}.{s}")
        }
    }
}

// ---------------------------------------------------------------------------
// Crystals

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Species {
    Qubit,
    Coolant,
}

/// One ion: a qubit carries its logical index, a coolant carries none.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ion {
    pub species: Species,
    pub logical_id: Option<usize>,
}

impl Ion {
    pub fn qubit(id: usize) -> Self {
        Ion {
            species: Species::Qubit,
            logical_id: Some(id),
        }
    }
    pub fn coolant() -> Self {
        Ion {
            species: Species::Coolant,
            logical_id: None,
        }
    }
}

/// A co-trapped group of ions at one site. `ions` is ordered along the
/// chain axis, leftmost first. Heat accumulates per crystal and is
/// cleared by cooling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Crystal {
    pub ions: Vec<Ion>,
    pub site: Site,
    pub axial_heat: f64,
    pub radial_heat: f64,
}

impl Crystal {
    pub fn new(ions: Vec<Ion>, site: Site) -> Self {
        Crystal {
            ions,
            site,
            axial_heat: 0.0,
            radial_heat: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.ions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ions.is_empty()
    }

    /// Logical qubit indices in axis order.
    pub fn qubits(&self) -> Vec<usize> {
        self.ions.iter().filter_map(|i| i.logical_id).collect()
    }

    fn pattern(&self) -> Vec<Species> {
        self.ions.iter().map(|i| i.species).collect()
    }

    /// Whether the species pattern is one the cooling scheme supports:
    /// `[c,q]`, `[q,c]`, `[c,q,q,c]`, or `[q,c,c,q]`.
    pub fn is_allowed_configuration(&self) -> bool {
        use Species::{Coolant as C, Qubit as Q};
        matches!(
            self.pattern().as_slice(),
            [C, Q] | [Q, C] | [C, Q, Q, C] | [Q, C, C, Q]
        )
    }

    fn add_heat(&mut self, axial: f64, radial: f64) {
        self.axial_heat += axial;
        self.radial_heat += radial;
    }
}

// ---------------------------------------------------------------------------
// Transport and timing tables

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportKind {
    IntrazoneShift,
    InterzoneShift,
    Split,
    Combine,
    Swap,
}

/// A heating figure from the primitive characterization. Measurements
/// quoted as "< x" store `x` with the bound flag set; ranges store
/// their midpoint unflagged. The ledger accrues `value` either way —
/// a conservative ceiling for bounded entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Heat {
    pub value: f64,
    pub upper_bound: bool,
}

impl Heat {
    pub fn bound(value: f64) -> Self {
        Heat {
            value,
            upper_bound: true,
        }
    }
    pub fn exact(value: f64) -> Self {
        Heat {
            value,
            upper_bound: false,
        }
    }
}

/// Duration and heating of one transport primitive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportPrimitive {
    pub duration_us: f64,
    pub axial_heat: Heat,
    pub radial_heat: Heat,
}

/// The characterized primitive library.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportTable {
    #[serde(default = "defaults::intrazone_shift")]
    pub intrazone_shift: TransportPrimitive,
    #[serde(default = "defaults::interzone_shift")]
    pub interzone_shift: TransportPrimitive,
    #[serde(default = "defaults::split")]
    pub split: TransportPrimitive,
    #[serde(default = "defaults::combine")]
    pub combine: TransportPrimitive,
    #[serde(default = "defaults::swap")]
    pub swap: TransportPrimitive,
}

impl Default for TransportTable {
    fn default() -> Self {
        TransportTable {
            intrazone_shift: defaults::intrazone_shift(),
            interzone_shift: defaults::interzone_shift(),
            split: defaults::split(),
            combine: defaults::combine(),
            swap: defaults::swap(),
        }
    }
}

impl TransportTable {
    pub fn get(&self, kind: TransportKind) -> &TransportPrimitive {
        match kind {
            TransportKind::IntrazoneShift => &self.intrazone_shift,
            TransportKind::InterzoneShift => &self.interzone_shift,
            TransportKind::Split => &self.split,
            TransportKind::Combine => &self.combine,
            TransportKind::Swap => &self.swap,
        }
    }

    /// Scheduled duration: table value plus the 10% interpolation
    /// margin.
    pub fn effective_duration_us(&self, kind: TransportKind) -> f64 {
        self.get(kind).duration_us * TRANSPORT_OVERHEAD
    }

    pub fn validate(&self) -> Result<()> {
        for kind in [
            TransportKind::IntrazoneShift,
            TransportKind::InterzoneShift,
            TransportKind::Split,
            TransportKind::Combine,
            TransportKind::Swap,
        ] {
            let p = self.get(kind);
            if !(p.duration_us.is_finite() && p.duration_us > 0.0) {
                return Err(Error::Machine(format!(
                    "transport {kind:?} must have positive duration"
                )));
            }
            if p.axial_heat.value < 0.0 || p.radial_heat.value < 0.0 {
                return Err(Error::Machine(format!(
                    "transport {kind:?} has negative heat"
                )));
            }
        }
        Ok(())
    }
}

/// Durations of the non-transport operations, microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingTable {
    /// State preparation (optical pumping), per qubit.
    #[serde(default = "defaults::init_us")]
    pub init_us: f64,
    /// High-fidelity readout used at the end of a circuit.
    #[serde(default = "defaults::measure_hf_us")]
    pub measure_hf_us: f64,
    /// Shorter low-crosstalk readout used mid-circuit.
    #[serde(default = "defaults::measure_lc_us")]
    pub measure_lc_us: f64,
    /// Cooling stage 1 (after transport).
    #[serde(default = "defaults::cool1_us")]
    pub cool1_us: f64,
    /// Cooling stage 2 (after transport).
    #[serde(default = "defaults::cool2_us")]
    pub cool2_us: f64,
    /// Cooling stage 3 (immediately before gates).
    #[serde(default = "defaults::cool3_us")]
    pub cool3_us: f64,
    /// Single-qubit pi/2 pulse.
    #[serde(default = "defaults::sq_pi2_us")]
    pub sq_pi2_us: f64,
    /// Two-qubit entangling gate.
    #[serde(default = "defaults::tq_gate_us")]
    pub tq_gate_us: f64,
}

impl Default for TimingTable {
    fn default() -> Self {
        TimingTable {
            init_us: defaults::init_us(),
            measure_hf_us: defaults::measure_hf_us(),
            measure_lc_us: defaults::measure_lc_us(),
            cool1_us: defaults::cool1_us(),
            cool2_us: defaults::cool2_us(),
            cool3_us: defaults::cool3_us(),
            sq_pi2_us: defaults::sq_pi2_us(),
            tq_gate_us: defaults::tq_gate_us(),
        }
    }
}

impl TimingTable {
    pub fn cool_us(&self, stage: u8) -> Result<f64> {
        match stage {
            1 => Ok(self.cool1_us),
            2 => Ok(self.cool2_us),
            3 => Ok(self.cool3_us),
            _ => Err(Error::Machine(format!("no cooling stage {stage}"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("init_us", self.init_us),
            ("measure_hf_us", self.measure_hf_us),
            ("measure_lc_us", self.measure_lc_us),
            ("cool1_us", self.cool1_us),
            ("cool2_us", self.cool2_us),
            ("cool3_us", self.cool3_us),
            ("sq_pi2_us", self.sq_pi2_us),
            ("tq_gate_us", self.tq_gate_us),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Machine(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Noise model

/// Aggregate error parameters used by the simulator.
///
/// The depolarizing figures are *average gate infidelities* `r`, as a
/// randomized-benchmarking experiment reports them. The simulator's
/// uniform depolarizing channel `E(rho) = (1-p) rho + p I/d` has
/// average infidelity `r = p (d-1)/d`, so the channel parameter is
/// `p = r d/(d-1)` — see [`depolarizing_param`]. The convention is
/// fixed here and unit-tested against the benchmarking fit in both
/// directions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    /// Two-qubit gate average infidelity.
    #[serde(default = "defaults::p_tq_depol")]
    pub p_tq_depol: f64,
    /// Single-qubit gate average infidelity.
    #[serde(default = "defaults::p_sq_depol")]
    pub p_sq_depol: f64,
    /// State-preparation-and-measurement bit-flip probability
    /// (high-fidelity terminal readout).
    #[serde(default = "defaults::p_spam")]
    pub p_spam: f64,
    /// Readout error of the shorter low-crosstalk mid-circuit
    /// measurement.
    #[serde(default = "defaults::p_meas_lc")]
    pub p_meas_lc: f64,
    /// Dephasing strength induced on idle neighbors by a mid-circuit
    /// measurement.
    #[serde(default = "defaults::p_meas_crosstalk_idle")]
    pub p_meas_crosstalk_idle: f64,
    /// Spin-echo coherence time, seconds.
    #[serde(default = "defaults::t2_spin_echo_s")]
    pub t2_spin_echo_s: f64,
    /// Probability per shot that a background check discards the shot.
    #[serde(default = "defaults::p_scrub_per_shot")]
    pub p_scrub_per_shot: f64,
    /// Factor <= 1 scaling idle dephasing when dynamical decoupling is
    /// active (1 = no suppression).
    #[serde(default = "defaults::dd_memory_multiplier")]
    pub dd_memory_multiplier: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            p_tq_depol: defaults::p_tq_depol(),
            p_sq_depol: defaults::p_sq_depol(),
            p_spam: defaults::p_spam(),
            p_meas_lc: defaults::p_meas_lc(),
            p_meas_crosstalk_idle: defaults::p_meas_crosstalk_idle(),
            t2_spin_echo_s: defaults::t2_spin_echo_s(),
            p_scrub_per_shot: defaults::p_scrub_per_shot(),
            dd_memory_multiplier: defaults::dd_memory_multiplier(),
        }
    }
}

impl NoiseModel {
    /// A model with every error channel switched off.
    pub fn noiseless() -> Self {
        NoiseModel {
            p_tq_depol: 0.0,
            p_sq_depol: 0.0,
            p_spam: 0.0,
            p_meas_lc: 0.0,
            p_meas_crosstalk_idle: 0.0,
            t2_spin_echo_s: defaults::t2_spin_echo_s(),
            p_scrub_per_shot: 0.0,
            // Zero multiplier switches idle dephasing off entirely (the
            // multiplier scales the 1/T2 rate), keeping T2 itself finite
            // and valid.
            dd_memory_multiplier: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let probs = [
            ("p_tq_depol", self.p_tq_depol),
            ("p_sq_depol", self.p_sq_depol),
            ("p_spam", self.p_spam),
            ("p_meas_lc", self.p_meas_lc),
            ("p_meas_crosstalk_idle", self.p_meas_crosstalk_idle),
            ("p_scrub_per_shot", self.p_scrub_per_shot),
        ];
        for (name, v) in probs {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Machine(format!(
                    "{name} must be in [0, 1], got {v}"
                )));
            }
        }
        if !(self.t2_spin_echo_s.is_finite() && self.t2_spin_echo_s > 0.0) {
            return Err(Error::Machine(format!(
                "t2_spin_echo_s must be positive, got {}",
                self.t2_spin_echo_s
            )));
        }
        if !(0.0..=1.0).contains(&self.dd_memory_multiplier) {
            return Err(Error::Machine(format!(
                "dd_memory_multiplier must be in [0, 1], got {}",
                self.dd_memory_multiplier
            )));
        }
        Ok(())
    }

    /// Apply comma-separated `key=value` overrides (the CLI `--noise`
    /// syntax), then re-validate.
    pub fn with_overrides(mut self, spec: &str) -> Result<Self> {
        for (key, value) in parse_noise_overrides(spec)? {
            match key.as_str() {
                "p_tq_depol" => self.p_tq_depol = value,
                "p_sq_depol" => self.p_sq_depol = value,
                "p_spam" => self.p_spam = value,
                "p_meas_lc" => self.p_meas_lc = value,
                "p_meas_crosstalk_idle" => self.p_meas_crosstalk_idle = value,
                "t2_spin_echo_s" => self.t2_spin_echo_s = value,
                "p_scrub_per_shot" => self.p_scrub_per_shot = value,
                "dd_memory_multiplier" => self.dd_memory_multiplier = value,
                _ => unreachable!("parse_noise_overrides vets keys"),
            }
        }
        self.validate()?;
        Ok(self)
    }
}

/// Valid keys for [`parse_noise_overrides`].
pub const NOISE_OVERRIDE_KEYS: [&str; 8] = [
    "p_tq_depol",
    "p_sq_depol",
    "p_spam",
    "p_meas_lc",
    "p_meas_crosstalk_idle",
    "t2_spin_echo_s",
    "p_scrub_per_shot",
    "dd_memory_multiplier",
];

/// Parse comma-separated `key=value` noise overrides. Whitespace around
/// keys and values is ignored; empty entries (trailing commas) are
/// rejected. Range checks happen at [`NoiseModel::validate`], not here.
pub fn parse_noise_overrides(spec: &str) -> Result<Vec<(String, f64)>> {
    let mut out = Vec::new();
    if spec.trim().is_empty() {
        return Ok(out);
    }
    for entry in spec.split(',') {
        let entry = entry.trim();
        let (key, value) = entry.split_once('=').ok_or_else(|| {
            Error::Parse(format!("noise override '{entry}' is not key=value"))
        })?;
        let key = key.trim();
        if !NOISE_OVERRIDE_KEYS.contains(&key) {
            return Err(Error::Parse(format!(
                "unknown noise parameter '{key}' (expected one of {})",
                NOISE_OVERRIDE_KEYS.join(", ")
            )));
        }
        let value: f64 = value.trim().parse().map_err(|_| {
            Error::Parse(format!("noise override '{entry}' has a malformed number"))
        })?;
        if !value.is_finite() {
            return Err(Error::Parse(format!(
                "noise override '{entry}' must be finite"
            )));
        }
        out.push((key.to_string(), value));
    }
    Ok(out)
}

/// Channel parameter `p` of the uniform depolarizing channel whose
/// average gate infidelity is `r`, in dimension `d`:
/// `E(rho) = (1-p) rho + p I/d` has `r = p (d-1)/d`.
pub fn depolarizing_param(avg_infidelity: f64, dim: usize) -> f64 {
    let d = dim as f64;
    avg_infidelity * d / (d - 1.0)
}

// ---------------------------------------------------------------------------
// Machine configuration (JSON-loadable)

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MachineMode {
    N4,
    N6,
}

impl MachineMode {
    pub fn n_qubits(self) -> usize {
        match self {
            MachineMode::N4 => 4,
            MachineMode::N6 => 6,
        }
    }
}

/// Everything the compiler and simulator need to know about the
/// machine, loadable from JSON with per-field defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineConfig {
    #[serde(default = "defaults::mode")]
    pub mode: MachineMode,
    #[serde(default)]
    pub layout: TrapLayout,
    #[serde(default)]
    pub transport: TransportTable,
    #[serde(default)]
    pub timing: TimingTable,
    #[serde(default)]
    pub noise: NoiseModel,
}

impl Default for MachineConfig {
    fn default() -> Self {
        MachineConfig {
            mode: defaults::mode(),
            layout: TrapLayout::default(),
            transport: TransportTable::default(),
            timing: TimingTable::default(),
            noise: NoiseModel::default(),
        }
    }
}

impl MachineConfig {
    pub fn validate(&self) -> Result<()> {
        self.layout.validate()?;
        self.transport.validate()?;
        self.timing.validate()?;
        self.noise.validate()?;
        if self.layout.gate_zones().len() < 2 {
            return Err(Error::Machine(
                "default operating modes need at least two gate zones".into(),
            ));
        }
        Ok(())
    }
}

/// Parse and validate a machine configuration from JSON. Unknown fields
/// are rejected so that a typo cannot silently fall back to a default.
pub fn parse_machine_config(json: &str) -> Result<MachineConfig> {
    let config: MachineConfig =
        serde_json::from_str(json).map_err(|e| Error::Parse(format!("machine config: {e}")))?;
    config.validate()?;
    Ok(config)
}

pub fn serialize_machine_config(config: &MachineConfig) -> String {
    serde_json::to_string_pretty(config).expect("machine config serializes")
}

mod defaults {
    use super::*;

    pub fn intrazone_distance_um() -> f64 {
        INTRAZONE_DISTANCE_UM
    }
    pub fn intrazone_shift() -> TransportPrimitive {
        TransportPrimitive {
            duration_us: 57.8,
            axial_heat: Heat::bound(1.0),
            radial_heat: Heat::bound(1.0),
        }
    }
    pub fn interzone_shift() -> TransportPrimitive {
        TransportPrimitive {
            duration_us: 282.6,
            axial_heat: Heat::bound(1.0),
            radial_heat: Heat::bound(1.0),
        }
    }
    pub fn split() -> TransportPrimitive {
        TransportPrimitive {
            duration_us: 128.2,
            // measured as a 0.5-1 range; stored as the midpoint
            axial_heat: Heat::exact(0.75),
            radial_heat: Heat::bound(1.0),
        }
    }
    pub fn combine() -> TransportPrimitive {
        TransportPrimitive {
            duration_us: 128.2,
            axial_heat: Heat::exact(0.75),
            radial_heat: Heat::bound(1.0),
        }
    }
    pub fn swap() -> TransportPrimitive {
        TransportPrimitive {
            duration_us: 200.0,
            axial_heat: Heat::exact(2.0),
            radial_heat: Heat::bound(4.0),
        }
    }
    pub fn init_us() -> f64 {
        10.0
    }
    pub fn measure_hf_us() -> f64 {
        120.0
    }
    pub fn measure_lc_us() -> f64 {
        60.0
    }
    pub fn cool1_us() -> f64 {
        550.0
    }
    pub fn cool2_us() -> f64 {
        850.0
    }
    pub fn cool3_us() -> f64 {
        650.0
    }
    pub fn sq_pi2_us() -> f64 {
        5.0
    }
    pub fn tq_gate_us() -> f64 {
        25.0
    }
    pub fn p_tq_depol() -> f64 {
        8.0e-3
    }
    pub fn p_sq_depol() -> f64 {
        1.1e-4
    }
    pub fn p_spam() -> f64 {
        3.0e-3
    }
    pub fn p_meas_lc() -> f64 {
        7.0e-3
    }
    pub fn p_meas_crosstalk_idle() -> f64 {
        1.0e-2
    }
    pub fn t2_spin_echo_s() -> f64 {
        2.0
    }
    pub fn p_scrub_per_shot() -> f64 {
        1.0e-3
    }
    pub fn dd_memory_multiplier() -> f64 {
        1.0
    }
    pub fn mode() -> MachineMode {
        MachineMode::N4
    }
}

// ---------------------------------------------------------------------------
// Machine state and transport application

/// A transport primitive with its operands, ready to apply.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "op")]
pub enum TransportOp {
    /// Move a two-ion crystal one sub-slot over within a gate zone.
    IntrazoneShift { from: Site, to: Site },
    /// Move a two-ion crystal to an adjacent site in a neighboring
    /// zone.
    InterzoneShift { from: Site, to: Site },
    /// Divide the four-ion crystal at `zone`'s center into its left and
    /// right pairs, placed at the named sub-slots (linear order
    /// preserved).
    Split {
        zone: usize,
        left_to: SubSlot,
        right_to: SubSlot,
    },
    /// Merge the two-ion crystals at `zone`'s `left` and `right`
    /// sub-slots into a four-ion crystal at the center.
    Combine {
        zone: usize,
        left: SubSlot,
        right: SubSlot,
    },
    /// Rotate the four-ion crystal at `zone`'s center, reversing its
    /// ion order.
    Swap { zone: usize },
}

impl TransportOp {
    pub fn kind(&self) -> TransportKind {
        match self {
            TransportOp::IntrazoneShift { .. } => TransportKind::IntrazoneShift,
            TransportOp::InterzoneShift { .. } => TransportKind::InterzoneShift,
            TransportOp::Split { .. } => TransportKind::Split,
            TransportOp::Combine { .. } => TransportKind::Combine,
            TransportOp::Swap { .. } => TransportKind::Swap,
        }
    }
}

/// The full dynamical state of the trap: crystal arrangement, heat,
/// per-qubit phase frames, and an elapsed-time accumulator.
///
/// The clock is a serial accumulator — every applied operation adds its
/// own duration. Wall-clock parallelism across zones is the scheduler's
/// concern, not this type's.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineState {
    pub crystals: Vec<Crystal>,
    /// Software-Z frame per logical qubit, radians.
    pub phase_frame: Vec<f64>,
    pub clock_us: f64,
    pub mode: MachineMode,
}

/// Build the default layout and initial ion arrangement for a mode.
///
/// * `N4`: a coolant-out four-ion crystal in each gate zone center —
///   `[c,q0,q1,c]` at `G1.C` and `[c,q2,q3,c]` at `G2.C`.
/// * `N6`: the same gate-zone crystals in coolant-in/out alternation
///   plus one pair parked in each auxiliary zone as memory —
///   `[c,q0]` at `A1`, `[q1,c,c,q2]` at `G1.C`, `[q3,c]` at `A2`,
///   `[c,q4,q5,c]` at `G2.C`.
///
/// Along the chain, two-ion units alternate orientation
/// (`[c,q], [q,c], [c,q], ...`), which keeps every combine the
/// primitives can reach inside the allowed configuration set.
pub fn default_machine(mode: MachineMode) -> (TrapLayout, MachineState) {
    let layout = TrapLayout::default();
    let g1 = 2usize;
    let a1 = 1usize;
    let a2 = 3usize;
    let g2 = 4usize;
    let center = |z| Site::new(z, SubSlot::Center);
    let crystals = match mode {
        MachineMode::N4 => vec![
            Crystal::new(
                vec![Ion::coolant(), Ion::qubit(0), Ion::qubit(1), Ion::coolant()],
                center(g1),
            ),
            Crystal::new(
                vec![Ion::coolant(), Ion::qubit(2), Ion::qubit(3), Ion::coolant()],
                center(g2),
            ),
        ],
        MachineMode::N6 => vec![
            Crystal::new(vec![Ion::coolant(), Ion::qubit(0)], center(a1)),
            Crystal::new(
                vec![Ion::qubit(1), Ion::coolant(), Ion::coolant(), Ion::qubit(2)],
                center(g1),
            ),
            Crystal::new(vec![Ion::qubit(3), Ion::coolant()], center(a2)),
            Crystal::new(
                vec![Ion::coolant(), Ion::qubit(4), Ion::qubit(5), Ion::coolant()],
                center(g2),
            ),
        ],
    };
    let state = MachineState {
        crystals,
        phase_frame: vec![0.0; mode.n_qubits()],
        clock_us: 0.0,
        mode,
    };
    (layout, state)
}

impl MachineState {
    /// Index of the crystal occupying `site`, if any.
    pub fn crystal_at(&self, site: Site) -> Option<usize> {
        self.crystals.iter().position(|c| c.site == site)
    }

    /// Crystal index and site holding logical qubit `q`.
    pub fn locate_qubit(&self, q: usize) -> Option<(usize, Site)> {
        self.crystals
            .iter()
            .enumerate()
            .find(|(_, c)| c.qubits().contains(&q))
            .map(|(i, c)| (i, c.site))
    }

    /// Logical qubit indices read left to right along the chain. The
    /// only primitive that changes this order is `Swap`.
    pub fn qubit_order_along_trap(&self, layout: &TrapLayout) -> Vec<usize> {
        let mut indexed: Vec<(usize, &Crystal)> = self
            .crystals
            .iter()
            .map(|c| {
                (
                    layout.position(c.site).expect("crystal on a layout site"),
                    c,
                )
            })
            .collect();
        indexed.sort_by_key(|&(pos, _)| pos);
        indexed.into_iter().flat_map(|(_, c)| c.qubits()).collect()
    }

    /// Structural well-formedness: allowed configurations, one crystal
    /// per site, every logical qubit exactly once, heat non-negative.
    pub fn validate(&self, layout: &TrapLayout) -> Result<()> {
        let mut seen_qubits = vec![false; self.mode.n_qubits()];
        let mut qubit_ions = 0usize;
        let mut coolant_ions = 0usize;
        for (i, crystal) in self.crystals.iter().enumerate() {
            layout.position(crystal.site)?;
            if !crystal.is_allowed_configuration() {
                return Err(Error::Machine(format!(
                    "crystal {i} has a disallowed configuration {:?}",
                    crystal.pattern()
                )));
            }
            if self.crystals[..i].iter().any(|c| c.site == crystal.site) {
                return Err(Error::Machine(format!(
                    "two crystals occupy {}",
                    layout.site_name(crystal.site)
                )));
            }
            if crystal.axial_heat < 0.0 || crystal.radial_heat < 0.0 {
                return Err(Error::Machine(format!("crystal {i} has negative heat")));
            }
            for ion in &crystal.ions {
                match ion.species {
                    Species::Qubit => {
                        qubit_ions += 1;
                        let id = ion.logical_id.ok_or_else(|| {
                            Error::Machine(format!("crystal {i} has a qubit ion without an id"))
                        })?;
                        if id >= seen_qubits.len() {
                            return Err(Error::Machine(format!(
                                "logical qubit {id} out of range for mode"
                            )));
                        }
                        if seen_qubits[id] {
                            return Err(Error::Machine(format!(
                                "logical qubit {id} appears twice"
                            )));
                        }
                        seen_qubits[id] = true;
                    }
                    Species::Coolant => {
                        coolant_ions += 1;
                        if ion.logical_id.is_some() {
                            return Err(Error::Machine(format!(
                                "crystal {i} has a coolant ion with a logical id"
                            )));
                        }
                    }
                }
            }
        }
        if !seen_qubits.iter().all(|&s| s) {
            return Err(Error::Machine("a logical qubit is missing".into()));
        }
        if qubit_ions != coolant_ions {
            return Err(Error::Machine(format!(
                "{qubit_ions} qubit ions vs {coolant_ions} coolant ions (must balance)"
            )));
        }
        if self.phase_frame.len() != self.mode.n_qubits() {
            return Err(Error::Machine("phase frame length mismatch".into()));
        }
        Ok(())
    }

    fn require_free(&self, layout: &TrapLayout, site: Site) -> Result<()> {
        layout.position(site)?;
        if self.crystal_at(site).is_some() {
            return Err(Error::Machine(format!(
                "destination {} is occupied",
                layout.site_name(site)
            )));
        }
        Ok(())
    }

    /// Apply one transport primitive, advancing the clock by the
    /// effective (margin-included) duration and accruing heat on the
    /// crystals that moved.
    pub fn apply_transport(
        &mut self,
        layout: &TrapLayout,
        table: &TransportTable,
        op: TransportOp,
    ) -> Result<()> {
        let prim = *table.get(op.kind());
        match op {
            TransportOp::IntrazoneShift { from, to } => {
                if from.zone != to.zone || !layout.is_gate_zone(from.zone) {
                    return Err(Error::Machine(
                        "intrazone shift must stay within one gate zone".into(),
                    ));
                }
                if !layout.adjacent(from, to) {
                    return Err(Error::Machine(format!(
                        "intrazone shift {} -> {} is not between adjacent sub-slots",
                        layout.site_name(from),
                        layout.site_name(to)
                    )));
                }
                let idx = self.crystal_at(from).ok_or_else(|| {
                    Error::Machine(format!("no crystal at {}", layout.site_name(from)))
                })?;
                if self.crystals[idx].len() != 2 {
                    return Err(Error::Machine("only two-ion crystals shift".into()));
                }
                self.require_free(layout, to)?;
                self.crystals[idx].site = to;
                self.crystals[idx].add_heat(prim.axial_heat.value, prim.radial_heat.value);
            }
            TransportOp::InterzoneShift { from, to } => {
                if from.zone == to.zone {
                    return Err(Error::Machine(
                        "interzone shift must change zones".into(),
                    ));
                }
                if !layout.adjacent(from, to) {
                    return Err(Error::Machine(format!(
                        "interzone shift {} -> {} is not between adjacent sites",
                        layout.site_name(from),
                        layout.site_name(to)
                    )));
                }
                let idx = self.crystal_at(from).ok_or_else(|| {
                    Error::Machine(format!("no crystal at {}", layout.site_name(from)))
                })?;
                if self.crystals[idx].len() != 2 {
                    return Err(Error::Machine("only two-ion crystals shift".into()));
                }
                self.require_free(layout, to)?;
                self.crystals[idx].site = to;
                self.crystals[idx].add_heat(prim.axial_heat.value, prim.radial_heat.value);
            }
            TransportOp::Split {
                zone,
                left_to,
                right_to,
            } => {
                if !layout.is_gate_zone(zone) {
                    return Err(Error::Machine("split requires a gate zone".into()));
                }
                if left_to >= right_to || right_to == SubSlot::Left || left_to == SubSlot::Right {
                    return Err(Error::Machine(
                        "split products must go to distinct, ordered sub-slots".into(),
                    ));
                }
                let center = Site::new(zone, SubSlot::Center);
                let idx = self.crystal_at(center).ok_or_else(|| {
                    Error::Machine(format!("no crystal at {}", layout.site_name(center)))
                })?;
                if self.crystals[idx].len() != 4 {
                    return Err(Error::Machine("split requires a four-ion crystal".into()));
                }
                for slot in [left_to, right_to] {
                    let dest = Site::new(zone, slot);
                    if dest != center {
                        self.require_free(layout, dest)?;
                    }
                }
                let parent = self.crystals.swap_remove(idx);
                let (ax, rad) = (parent.axial_heat, parent.radial_heat);
                let mut left = Crystal::new(parent.ions[..2].to_vec(), Site::new(zone, left_to));
                let mut right = Crystal::new(parent.ions[2..].to_vec(), Site::new(zone, right_to));
                // Both products ride through the split waveform: each
                // inherits the parent's ledger plus the split heating.
                left.axial_heat = ax + prim.axial_heat.value;
                left.radial_heat = rad + prim.radial_heat.value;
                right.axial_heat = ax + prim.axial_heat.value;
                right.radial_heat = rad + prim.radial_heat.value;
                self.crystals.push(left);
                self.crystals.push(right);
            }
            TransportOp::Combine { zone, left, right } => {
                if !layout.is_gate_zone(zone) {
                    return Err(Error::Machine("combine requires a gate zone".into()));
                }
                if left >= right {
                    return Err(Error::Machine(
                        "combine operands must be ordered sub-slots".into(),
                    ));
                }
                let l_site = Site::new(zone, left);
                let r_site = Site::new(zone, right);
                let center = Site::new(zone, SubSlot::Center);
                let l_idx = self.crystal_at(l_site).ok_or_else(|| {
                    Error::Machine(format!("no crystal at {}", layout.site_name(l_site)))
                })?;
                let r_idx = self.crystal_at(r_site).ok_or_else(|| {
                    Error::Machine(format!("no crystal at {}", layout.site_name(r_site)))
                })?;
                if self.crystals[l_idx].len() != 2 || self.crystals[r_idx].len() != 2 {
                    return Err(Error::Machine("combine merges two-ion crystals".into()));
                }
                if l_site != center && r_site != center {
                    self.require_free(layout, center)?;
                }
                let (first, second) = if l_idx < r_idx {
                    (l_idx, r_idx)
                } else {
                    (r_idx, l_idx)
                };
                let b = self.crystals.swap_remove(second);
                let a = self.crystals.swap_remove(first);
                let (l_cr, r_cr) = if a.site == l_site { (a, b) } else { (b, a) };
                let mut ions = l_cr.ions;
                ions.extend(r_cr.ions);
                let mut merged = Crystal::new(ions, center);
                merged.axial_heat = l_cr.axial_heat + r_cr.axial_heat + prim.axial_heat.value;
                merged.radial_heat = l_cr.radial_heat + r_cr.radial_heat + prim.radial_heat.value;
                if !merged.is_allowed_configuration() {
                    return Err(Error::Machine(
                        "combine would produce a disallowed configuration".into(),
                    ));
                }
                self.crystals.push(merged);
            }
            TransportOp::Swap { zone } => {
                if !layout.is_gate_zone(zone) {
                    return Err(Error::Machine("swap requires a gate zone".into()));
                }
                let center = Site::new(zone, SubSlot::Center);
                let idx = self.crystal_at(center).ok_or_else(|| {
                    Error::Machine(format!("no crystal at {}", layout.site_name(center)))
                })?;
                if self.crystals[idx].len() != 4 {
                    return Err(Error::Machine("swap requires a four-ion crystal".into()));
                }
                self.crystals[idx].ions.reverse();
                self.crystals[idx].add_heat(prim.axial_heat.value, prim.radial_heat.value);
            }
        }
        self.clock_us += prim.duration_us * TRANSPORT_OVERHEAD;
        Ok(())
    }

    /// Run a cooling stage on the crystal at `site`: clears its heat
    /// ledger and advances the clock by the stage duration. Cooling is
    /// scheduled unconditionally — a cold crystal still pays the time.
    pub fn insert_cooling(
        &mut self,
        layout: &TrapLayout,
        timing: &TimingTable,
        stage: u8,
        site: Site,
    ) -> Result<()> {
        let dur = timing.cool_us(stage)?;
        let idx = self.crystal_at(site).ok_or_else(|| {
            Error::Machine(format!(
                "cooling stage {stage}: no crystal at {}",
                layout.site_name(site)
            ))
        })?;
        self.crystals[idx].axial_heat = 0.0;
        self.crystals[idx].radial_heat = 0.0;
        self.clock_us += dur;
        Ok(())
    }

    /// Advance the clock for a non-transport event (gate, measurement,
    /// initialization).
    pub fn advance_clock(&mut self, us: f64) {
        self.clock_us += us;
    }

    /// Snapshot of where every ion sits, for end-state comparisons
    /// (ignores heat, clock, and phase frames).
    pub fn configuration(&self, layout: &TrapLayout) -> Vec<(usize, Vec<Ion>)> {
        let mut config: Vec<(usize, Vec<Ion>)> = self
            .crystals
            .iter()
            .map(|c| {
                (
                    layout.position(c.site).expect("crystal on a layout site"),
                    c.ions.clone(),
                )
            })
            .collect();
        config.sort_by_key(|&(pos, _)| pos);
        config
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n4() -> (TrapLayout, MachineState, TransportTable, TimingTable) {
        let (layout, state) = default_machine(MachineMode::N4);
        (layout, state, TransportTable::default(), TimingTable::default())
    }

    const G1: usize = 2;
    const A2: usize = 3;
    const G2: usize = 4;

    fn site(zone: usize, slot: SubSlot) -> Site {
        Site::new(zone, slot)
    }

    #[test]
    fn default_layout_has_nine_sites_in_chain_order() {
        let layout = TrapLayout::default();
        layout.validate().unwrap();
        let names: Vec<String> = layout
            .sites()
            .into_iter()
            .map(|s| layout.site_name(s))
            .collect();
        assert_eq!(
            names,
            ["L", "A1", "G1.L", "G1.C", "G1.R", "A2", "G2.L", "G2.C", "G2.R"]
        );
        assert_eq!(layout.gate_zones(), vec![G1, G2]);
    }

    #[test]
    fn default_machine_n4_fills_both_gate_zones() {
        let (layout, state) = default_machine(MachineMode::N4);
        state.validate(&layout).unwrap();
        assert_eq!(state.crystals.len(), 2);
        assert_eq!(state.qubit_order_along_trap(&layout), vec![0, 1, 2, 3]);
        assert_eq!(state.clock_us, 0.0);
        for c in &state.crystals {
            assert_eq!(c.len(), 4);
            assert_eq!(c.site.slot, SubSlot::Center);
            assert_eq!((c.axial_heat, c.radial_heat), (0.0, 0.0));
        }
        // Determinism: building the same mode twice gives equal states.
        let (_, again) = default_machine(MachineMode::N4);
        assert_eq!(state, again);
    }

    #[test]
    fn default_machine_n6_parks_memory_pairs_in_auxiliary_zones() {
        let (layout, state) = default_machine(MachineMode::N6);
        state.validate(&layout).unwrap();
        assert_eq!(state.qubit_order_along_trap(&layout), vec![0, 1, 2, 3, 4, 5]);
        let a1_idx = state.crystal_at(site(1, SubSlot::Center)).unwrap();
        let a2_idx = state.crystal_at(site(A2, SubSlot::Center)).unwrap();
        assert_eq!(state.crystals[a1_idx].len(), 2);
        assert_eq!(state.crystals[a2_idx].len(), 2);
        let qubit_ions: usize = state.crystals.iter().map(|c| c.qubits().len()).sum();
        assert_eq!(qubit_ions, 6);
    }

    #[test]
    fn transport_table_defaults_match_the_characterization() {
        let t = TransportTable::default();
        assert_eq!(t.intrazone_shift.duration_us, 57.8);
        assert_eq!(t.interzone_shift.duration_us, 282.6);
        assert_eq!(t.split.duration_us, 128.2);
        assert_eq!(t.combine.duration_us, 128.2);
        assert_eq!(t.swap.duration_us, 200.0);
        assert!(t.intrazone_shift.axial_heat.upper_bound);
        assert_eq!(t.split.axial_heat, Heat::exact(0.75));
        assert_eq!(t.swap.axial_heat, Heat::exact(2.0));
        assert_eq!(t.swap.radial_heat, Heat::bound(4.0));
        // 10% interpolation margin on scheduled durations.
        assert!((t.effective_duration_us(TransportKind::Swap) - 220.0).abs() < 1e-12);
        assert!(
            (t.effective_duration_us(TransportKind::InterzoneShift) - 310.86).abs() < 1e-9
        );
    }

    #[test]
    fn timing_table_defaults_and_cooling_stages() {
        let t = TimingTable::default();
        assert_eq!(
            [t.init_us, t.measure_hf_us, t.measure_lc_us],
            [10.0, 120.0, 60.0]
        );
        assert_eq!([t.sq_pi2_us, t.tq_gate_us], [5.0, 25.0]);
        assert_eq!(t.cool_us(1).unwrap(), 550.0);
        assert_eq!(t.cool_us(2).unwrap(), 850.0);
        assert_eq!(t.cool_us(3).unwrap(), 650.0);
        assert!(t.cool_us(4).is_err());
        let all: f64 = (1..=3).map(|s| t.cool_us(s).unwrap()).sum();
        assert_eq!(all, 2050.0);
    }

    #[test]
    fn noise_defaults_and_depolarizing_conversion() {
        let n = NoiseModel::default();
        n.validate().unwrap();
        assert_eq!(n.p_tq_depol, 8.0e-3);
        assert_eq!(n.p_sq_depol, 1.1e-4);
        assert_eq!(n.p_spam, 3.0e-3);
        assert_eq!(n.p_meas_lc, 7.0e-3);
        assert_eq!(n.p_meas_crosstalk_idle, 1.0e-2);
        assert_eq!(n.t2_spin_echo_s, 2.0);
        assert_eq!(n.dd_memory_multiplier, 1.0);
        // r = p (d-1)/d in both directions.
        assert!((depolarizing_param(8.0e-3, 4) - 8.0e-3 * 4.0 / 3.0).abs() < 1e-18);
        assert!((depolarizing_param(1.1e-4, 2) - 2.2e-4).abs() < 1e-18);
        let p = depolarizing_param(0.01, 4);
        assert!((p * 3.0 / 4.0 - 0.01).abs() < 1e-15);
    }

    #[test]
    fn split_preserves_linear_order_and_heats_both_products() {
        let (layout, mut state, table, _) = n4();
        state
            .apply_transport(
                &layout,
                &table,
                TransportOp::Split {
                    zone: G1,
                    left_to: SubSlot::Left,
                    right_to: SubSlot::Right,
                },
            )
            .unwrap();
        state.validate(&layout).unwrap();
        let left = &state.crystals[state.crystal_at(site(G1, SubSlot::Left)).unwrap()];
        let right = &state.crystals[state.crystal_at(site(G1, SubSlot::Right)).unwrap()];
        assert_eq!(left.qubits(), vec![0]);
        assert_eq!(left.ions[0].species, Species::Coolant);
        assert_eq!(right.qubits(), vec![1]);
        assert_eq!(right.ions[1].species, Species::Coolant);
        assert_eq!(left.axial_heat, 0.75);
        assert_eq!(right.radial_heat, 1.0);
        assert!((state.clock_us - 128.2 * 1.10).abs() < 1e-12);
        assert!(state.crystal_at(site(G1, SubSlot::Center)).is_none());
    }

    #[test]
    fn combine_is_the_inverse_of_split() {
        let (layout, mut state, table, _) = n4();
        let before = state.configuration(&layout);
        for op in [
            TransportOp::Split {
                zone: G1,
                left_to: SubSlot::Left,
                right_to: SubSlot::Right,
            },
            TransportOp::Combine {
                zone: G1,
                left: SubSlot::Left,
                right: SubSlot::Right,
            },
        ] {
            state.apply_transport(&layout, &table, op).unwrap();
        }
        assert_eq!(state.configuration(&layout), before);
        // Heat accrued: split on both halves, then merged plus combine.
        let c = &state.crystals[state.crystal_at(site(G1, SubSlot::Center)).unwrap()];
        assert!((c.axial_heat - (0.75 + 0.75 + 0.75)).abs() < 1e-12);
    }

    #[test]
    fn swap_reverses_qubit_order_with_exact_timing() {
        let (layout, mut state, table, _) = n4();
        state
            .apply_transport(&layout, &table, TransportOp::Swap { zone: G1 })
            .unwrap();
        assert_eq!(state.qubit_order_along_trap(&layout), vec![1, 0, 2, 3]);
        assert!((state.clock_us - 220.0).abs() < 1e-12);
        let c = &state.crystals[state.crystal_at(site(G1, SubSlot::Center)).unwrap()];
        assert_eq!((c.axial_heat, c.radial_heat), (2.0, 4.0));
        state.validate(&layout).unwrap();
    }

    #[test]
    fn illegal_transports_are_rejected() {
        let (layout, state, table, _) = n4();

        // Split a two-ion crystal.
        let mut s = state.clone();
        s.apply_transport(
            &layout,
            &table,
            TransportOp::Split {
                zone: G1,
                left_to: SubSlot::Left,
                right_to: SubSlot::Right,
            },
        )
        .unwrap();
        // Center is now empty; splitting again must fail.
        assert!(s
            .apply_transport(
                &layout,
                &table,
                TransportOp::Split {
                    zone: G1,
                    left_to: SubSlot::Left,
                    right_to: SubSlot::Right,
                },
            )
            .is_err());
        // A four-ion crystal cannot take an interzone shift.
        let mut s = state.clone();
        assert!(s
            .apply_transport(
                &layout,
                &table,
                TransportOp::InterzoneShift {
                    from: site(G1, SubSlot::Center),
                    to: site(A2, SubSlot::Center),
                },
            )
            .is_err());
        // Destination occupied.
        let mut s = state.clone();
        s.apply_transport(
            &layout,
            &table,
            TransportOp::Split {
                zone: G1,
                left_to: SubSlot::Left,
                right_to: SubSlot::Right,
            },
        )
        .unwrap();
        assert!(s
            .apply_transport(
                &layout,
                &table,
                TransportOp::IntrazoneShift {
                    from: site(G1, SubSlot::Left),
                    to: site(G1, SubSlot::Right),
                },
            )
            .is_err()); // not adjacent
        s.apply_transport(
            &layout,
            &table,
            TransportOp::IntrazoneShift {
                from: site(G1, SubSlot::Left),
                to: site(G1, SubSlot::Center),
            },
        )
        .unwrap();
        assert!(s
            .apply_transport(
                &layout,
                &table,
                TransportOp::IntrazoneShift {
                    from: site(G1, SubSlot::Right),
                    to: site(G1, SubSlot::Center),
                },
            )
            .is_err()); // occupied
        // Interzone between non-adjacent sites.
        let mut s = state.clone();
        s.apply_transport(
            &layout,
            &table,
            TransportOp::Split {
                zone: G1,
                left_to: SubSlot::Left,
                right_to: SubSlot::Right,
            },
        )
        .unwrap();
        assert!(s
            .apply_transport(
                &layout,
                &table,
                TransportOp::InterzoneShift {
                    from: site(G1, SubSlot::Left),
                    to: site(A2, SubSlot::Center),
                },
            )
            .is_err());
        // Swap in a zone without a four-ion crystal at center.
        assert!(s
            .apply_transport(&layout, &table, TransportOp::Swap { zone: G1 })
            .is_err());
    }

    #[test]
    fn cross_zone_gather_and_return_restores_the_configuration() {
        // Pair qubit 1 (G1) with qubit 2 (G2), gate, and undo — the
        // exact macro the scheduler emits for a cross-zone interaction.
        let (layout, mut state, table, _) = n4();
        let initial = state.configuration(&layout);
        let l = SubSlot::Left;
        let c = SubSlot::Center;
        let r = SubSlot::Right;
        let seq = [
            TransportOp::Split { zone: G1, left_to: l, right_to: r },
            TransportOp::InterzoneShift { from: site(G1, r), to: site(A2, c) },
            TransportOp::Split { zone: G2, left_to: l, right_to: r },
            TransportOp::IntrazoneShift { from: site(G2, l), to: site(G2, c) },
            TransportOp::InterzoneShift { from: site(A2, c), to: site(G2, l) },
            TransportOp::Combine { zone: G2, left: l, right: c },
        ];
        for op in seq {
            state.apply_transport(&layout, &table, op).unwrap();
        }
        let merged = &state.crystals[state.crystal_at(site(G2, c)).unwrap()];
        assert_eq!(merged.qubits(), vec![1, 2]);
        assert!(merged.is_allowed_configuration()); // [q,c,c,q]
        state.validate(&layout).unwrap();

        let ret = [
            TransportOp::Split { zone: G2, left_to: l, right_to: c },
            TransportOp::InterzoneShift { from: site(G2, l), to: site(A2, c) },
            TransportOp::IntrazoneShift { from: site(G2, c), to: site(G2, l) },
            TransportOp::Combine { zone: G2, left: l, right: r },
            TransportOp::InterzoneShift { from: site(A2, c), to: site(G1, r) },
            TransportOp::Combine { zone: G1, left: l, right: r },
        ];
        for op in ret {
            state.apply_transport(&layout, &table, op).unwrap();
        }
        assert_eq!(state.configuration(&layout), initial);
        state.validate(&layout).unwrap();
    }

    #[test]
    fn cooling_clears_heat_and_always_costs_time() {
        let (layout, mut state, table, timing) = n4();
        state
            .apply_transport(&layout, &table, TransportOp::Swap { zone: G1 })
            .unwrap();
        let t0 = state.clock_us;
        state
            .insert_cooling(&layout, &timing, 2, site(G1, SubSlot::Center))
            .unwrap();
        let c = &state.crystals[state.crystal_at(site(G1, SubSlot::Center)).unwrap()];
        assert_eq!((c.axial_heat, c.radial_heat), (0.0, 0.0));
        assert!((state.clock_us - t0 - 850.0).abs() < 1e-12);
        // Cooling a cold crystal still advances the clock.
        let t1 = state.clock_us;
        state
            .insert_cooling(&layout, &timing, 3, site(G1, SubSlot::Center))
            .unwrap();
        assert!((state.clock_us - t1 - 650.0).abs() < 1e-12);
        // No crystal at the site.
        assert!(state
            .insert_cooling(&layout, &timing, 1, site(G1, SubSlot::Left))
            .is_err());
    }

    #[test]
    fn clock_is_a_serial_accumulator_over_operations() {
        let (layout, mut state, table, timing) = n4();
        let ops = [
            TransportOp::Split {
                zone: G1,
                left_to: SubSlot::Left,
                right_to: SubSlot::Right,
            },
            TransportOp::InterzoneShift {
                from: site(G1, SubSlot::Right),
                to: site(A2, SubSlot::Center),
            },
        ];
        let mut expected = 0.0;
        for op in ops {
            state.apply_transport(&layout, &table, op).unwrap();
            expected += table.effective_duration_us(op.kind());
            assert!((state.clock_us - expected).abs() < 1e-9);
        }
        state
            .insert_cooling(&layout, &timing, 1, site(A2, SubSlot::Center))
            .unwrap();
        expected += 550.0;
        assert!((state.clock_us - expected).abs() < 1e-9);
    }

    #[test]
    fn machine_config_json_roundtrip_and_partial_defaults() {
        let config = MachineConfig::default();
        let json = serialize_machine_config(&config);
        let back = parse_machine_config(&json).unwrap();
        assert_eq!(config, back);

        // Partial JSON fills in defaults.
        let partial = parse_machine_config(r#"{"mode": "n6", "noise": {"p_spam": 0.01}}"#).unwrap();
        assert_eq!(partial.mode, MachineMode::N6);
        assert_eq!(partial.noise.p_spam, 0.01);
        assert_eq!(partial.noise.p_tq_depol, 8.0e-3);
        assert_eq!(partial.timing, TimingTable::default());

        // Empty object is the full default.
        assert_eq!(parse_machine_config("{}").unwrap(), MachineConfig::default());
    }

    #[test]
    fn machine_config_rejects_unknown_fields_and_bad_values() {
        assert!(parse_machine_config(r#"{"mood": "n4"}"#).is_err());
        assert!(parse_machine_config(r#"{"noise": {"p_spam": 1.5}}"#).is_err());
        assert!(parse_machine_config(r#"{"noise": {"p_spamm": 0.1}}"#).is_err());
        assert!(parse_machine_config(r#"{"timing": {"tq_gate_us": -1.0}}"#).is_err());
        assert!(parse_machine_config(r#"{"noise": {"dd_memory_multiplier": 1.5}}"#).is_err());
        assert!(parse_machine_config("not json").is_err());
        // A layout without gate zones cannot run the default modes.
        assert!(parse_machine_config(
            r#"{"layout": {"zones": [{"name": "L", "kind": "load"}]}}"#
        )
        .is_err());
    }

    #[test]
    fn noise_overrides_parse_and_apply() {
        let n = NoiseModel::default()
            .with_overrides("p_spam=1e-3, p_tq_depol = 0.01")
            .unwrap();
        assert_eq!(n.p_spam, 1e-3);
        assert_eq!(n.p_tq_depol, 0.01);
        assert_eq!(n.p_sq_depol, 1.1e-4); // untouched

        assert!(NoiseModel::default().with_overrides("p_spam=2.0").is_err());
        assert!(NoiseModel::default().with_overrides("bogus=0.1").is_err());
        assert!(NoiseModel::default().with_overrides("p_spam=abc").is_err());
        assert!(NoiseModel::default().with_overrides("p_spam").is_err());
        assert!(NoiseModel::default().with_overrides("p_spam=0.1,").is_err());
        assert_eq!(
            NoiseModel::default().with_overrides("").unwrap(),
            NoiseModel::default()
        );
        assert!(NoiseModel::default().with_overrides("p_spam=inf").is_err());
    }

    #[test]
    fn validate_rejects_malformed_states() {
        let (layout, good) = default_machine(MachineMode::N4);

        // Duplicate logical qubit.
        let mut bad = good.clone();
        bad.crystals[1].ions[1] = Ion::qubit(0);
        assert!(bad.validate(&layout).is_err());

        // Disallowed configuration.
        let mut bad = good.clone();
        bad.crystals[0].ions.reverse();
        bad.crystals[0].ions[0] = Ion::qubit(0);
        bad.crystals[0].ions[1] = Ion::coolant();
        assert!(bad.validate(&layout).is_err());

        // Two crystals on one site.
        let mut bad = good.clone();
        bad.crystals[1].site = bad.crystals[0].site;
        assert!(bad.validate(&layout).is_err());

        // Negative heat.
        let mut bad = good.clone();
        bad.crystals[0].axial_heat = -1.0;
        assert!(bad.validate(&layout).is_err());

        good.validate(&layout).unwrap();
    }

    #[test]
    fn qubit_order_tracks_only_swaps() {
        // Random walk over legal transports: the qubit order along the
        // chain must match an oracle that only reacts to swaps by
        // reversing the affected pair.
        use rand::seq::IndexedRandom;
        use rand::Rng;

        let (layout, initial) = default_machine(MachineMode::N6);
        let table = TransportTable::default();
        let mut rng = crate::rng::rng_for(404, "machine-walk", 0);
        for _trial in 0..30 {
            let mut state = initial.clone();
            let mut oracle = state.qubit_order_along_trap(&layout);
            for _step in 0..40 {
                let candidates = enumerate_legal_ops(&layout, &table, &state);
                assert!(!candidates.is_empty(), "walk reached a stuck state");
                let op = *candidates.choose(&mut rng).unwrap();
                // Oracle update: a swap reverses its crystal's two
                // qubits, which are adjacent in the chain order.
                if let TransportOp::Swap { zone } = op {
                    let idx = state
                        .crystal_at(Site::new(zone, SubSlot::Center))
                        .unwrap();
                    let qs = state.crystals[idx].qubits();
                    let pos = oracle.iter().position(|&q| q == qs[0]).unwrap();
                    oracle.swap(pos, pos + 1);
                }
                state.apply_transport(&layout, &table, op).unwrap();
                state.validate(&layout).unwrap();
                assert_eq!(state.qubit_order_along_trap(&layout), oracle);
                // Ion conservation.
                let total: usize = state.crystals.iter().map(|c| c.len()).sum();
                assert_eq!(total, 12);
                if rng.random::<f64>() < 0.1 {
                    let site = state.crystals[0].site;
                    state
                        .insert_cooling(&layout, &TimingTable::default(), 3, site)
                        .unwrap();
                }
            }
        }
    }

    /// All transport ops that apply cleanly to `state` (used by the
    /// random-walk property test).
    fn enumerate_legal_ops(
        layout: &TrapLayout,
        table: &TransportTable,
        state: &MachineState,
    ) -> Vec<TransportOp> {
        let mut candidates = Vec::new();
        let sites = layout.sites();
        for &from in &sites {
            for &to in &sites {
                if layout.adjacent(from, to) {
                    if from.zone == to.zone {
                        candidates.push(TransportOp::IntrazoneShift { from, to });
                    } else {
                        candidates.push(TransportOp::InterzoneShift { from, to });
                    }
                }
            }
        }
        for zone in layout.gate_zones() {
            use SubSlot::{Center, Left, Right};
            candidates.push(TransportOp::Swap { zone });
            for (l, r) in [(Left, Right), (Left, Center), (Center, Right)] {
                candidates.push(TransportOp::Split {
                    zone,
                    left_to: l,
                    right_to: r,
                });
                candidates.push(TransportOp::Combine { zone, left: l, right: r });
            }
        }
        candidates
            .into_iter()
            .filter(|&op| {
                let mut probe = state.clone();
                probe.apply_transport(layout, table, op).is_ok()
            })
            .collect()
    }
}
