//! Transport scheduling: compiling circuits into timed machine event lists.
//!
//! The compiler turns a synthesized circuit (native ops only) into a
//! [`TransportSchedule`] — a time-ordered list of transport, cooling, gate,
//! measurement, and initialization events that replays legally on
//! [`MachineState`]. The strategy is local and deterministic:
//!
//! * **Placement.** [`assign_ions`] scores every injective assignment of
//!   circuit qubits onto machine qubits by the number of adjacent
//!   transpositions the circuit's two-qubit ops would force, keeping the
//!   lexicographically smallest minimizer. At this machine's scale (at
//!   most six qubits, 720 assignments) exhaustive scoring is cheap, so
//!   the heuristic lives in the cost model rather than in the search.
//! * **Routing.** The only primitive that reorders qubits along the trap
//!   is the swap, so routing reduces to sorting the qubit order:
//!   [`route_permutation`] emits parallel odd-even transposition rounds,
//!   and the compiler realizes each adjacent transposition as a
//!   join → swap → unjoin macro on the two units involved.
//! * **Joining.** Bringing two order-adjacent qubits into one crystal is
//!   planned by a uniform-cost search over the transport primitives,
//!   moving only the participating units (splitting their parents when
//!   needed) and leaving every other crystal frozen. The plan ends with
//!   a combine at a gate-zone center; running it in reverse restores the
//!   starting arrangement, so every episode leaves the trap in its home
//!   pattern and the full compile ends exactly where it began.
//! * **Cooling policy.** Sympathetic cooling stages 1 and 2 run after
//!   each interzone journey (once per traveling pair, on arrival), and
//!   stage 3 runs before each gate block on any crystal that moved since
//!   its last stage-3 cooling. The stage-3 rule is what keeps the heat
//!   ledger below threshold at every gate.
//! * **Timing.** Events are placed by list scheduling against two
//!   resource classes — zones and qubits — plus classical dependencies
//!   from measurement keys to conditioned gates. Events in different
//!   zones overlap freely; an interzone shift holds both zones.
//!
//! Measurement handling follows the trap's addressing constraints: a
//! mid-circuit measurement requires its target pair to sit alone in a
//! gate zone (the detection light would destroy coherence on any
//! co-resident crystal), so the compiler splits the target's crystal and
//! parks bystanders one zone over, reversing everything afterwards. The
//! trailing run of measurements in a circuit is terminal: those read out
//! in place with the slower high-fidelity sequence and need no
//! isolation, because every qubit is being read anyway.
//!
//! Software Z rotations occupy zero time and never leave the control
//! system, so they schedule as zero-duration events with no placement
//! constraints and accrue no Stark shift during phase tracking.

use crate::circuit::{gate_to_json, validate_circuit, Circuit, Gate};
use crate::error::{Error, Result};
use crate::machine::{
    default_machine, Crystal, MachineConfig, MachineMode, MachineState, Site, SubSlot,
    TimingTable, TransportOp, TransportTable, TrapLayout,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

// ---------------------------------------------------------------------------
// Schedule representation
// ---------------------------------------------------------------------------

/// What happens during a schedule event.
///
/// The payload carries everything replay needs: transport operands,
/// cooling stage and site, the gate itself (possibly conditioned), or
/// the measurement target. Gate events hold machine-qubit indices —
/// the assignment map has already been applied by the compiler.
#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    /// One transport primitive with its operands.
    Transport { op: TransportOp },
    /// Sympathetic cooling of the crystal at `site`.
    Cooling { stage: u8, site: Site },
    /// A single-qubit op: software RZ (zero duration) or an RXY pulse.
    SqGate { gate: Gate },
    /// The two-qubit entangler on a co-trapped pair.
    TqGate { gate: Gate },
    /// Readout of one qubit. Terminal measurements use the slow
    /// high-fidelity sequence; mid-circuit ones the fast low-cross-talk
    /// sequence on an isolated pair.
    Measure { q: usize, key: String, terminal: bool },
    /// Re-initialization of one qubit to |0> (from a mid-circuit reset).
    Init { q: usize },
}

/// The `kind` string used in JSON export and event summaries.
pub fn kind_name(kind: &EventKind) -> &'static str {
    match kind {
        EventKind::Transport { .. } => "transport",
        EventKind::Cooling { .. } => "cooling",
        EventKind::SqGate { .. } => "sq_gate",
        EventKind::TqGate { .. } => "tq_gate",
        EventKind::Measure { .. } => "measure",
        EventKind::Init { .. } => "init",
    }
}

/// One scheduled event: a start time, a duration, the primary zone it
/// occupies, the logical qubits it involves, and its payload.
///
/// `qubits` lists every logical qubit whose crystal participates —
/// transport and cooling list the whole crystal's qubits, gates list
/// their operands. The scheduler guarantees that no two events sharing
/// a qubit overlap in time, and that no two events in the same zone
/// overlap in time.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleEvent {
    pub start_us: f64,
    pub dur_us: f64,
    /// Primary zone (destination zone for interzone shifts).
    pub zone: usize,
    pub qubits: Vec<usize>,
    pub kind: EventKind,
}

impl ScheduleEvent {
    /// End time of the event.
    pub fn end_us(&self) -> f64 {
        self.start_us + self.dur_us
    }

    /// All zones the event occupies. Interzone shifts hold both the
    /// source and destination zone for their duration; everything else
    /// holds exactly its primary zone.
    pub fn zones(&self) -> Vec<usize> {
        match &self.kind {
            EventKind::Transport {
                op: TransportOp::InterzoneShift { from, to },
            } => vec![to.zone, from.zone],
            _ => vec![self.zone],
        }
    }
}

/// A compiled schedule: events ordered by start time, the assignment of
/// circuit qubits to machine qubits, and the qubit order along the trap
/// just before the final restoration sort returned every ion home.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportSchedule {
    pub mode: MachineMode,
    /// Machine qubit count (event indices live in this range).
    pub n_qubits: usize,
    /// Events sorted by start time (stable in emission order on ties).
    pub events: Vec<ScheduleEvent>,
    /// `qubit_to_ion[c]` is the machine qubit holding circuit qubit `c`.
    pub qubit_to_ion: Vec<usize>,
    /// Qubit order along the trap after the last circuit op, before the
    /// compiler sorted the ions back to their initial configuration.
    pub final_permutation: Vec<usize>,
}

impl TransportSchedule {
    /// Wall-clock end of the schedule: the latest event end time.
    pub fn wall_time_us(&self) -> f64 {
        self.events
            .iter()
            .map(ScheduleEvent::end_us)
            .fold(0.0, f64::max)
    }

    /// Count of events of one kind (by its `kind_name`).
    pub fn count_kind(&self, name: &str) -> usize {
        self.events
            .iter()
            .filter(|e| kind_name(&e.kind) == name)
            .count()
    }
}

/// Knobs for the compiler. The defaults give the standard policy used
/// throughout: sorted restoration, full cooling, and a heat ceiling that
/// the stage-3 rule keeps trivially satisfied.
#[derive(Debug, Clone, PartialEq)]
pub struct SchedulePolicy {
    /// Every gate asserts its crystal's heat ledger (axial and radial)
    /// is strictly below this many quanta. Must be positive; the
    /// default cooling policy zeroes the ledger before each gate block,
    /// so compilation only fails if the policy is weakened.
    pub heat_threshold: f64,
    /// Placement of circuit qubits onto machine qubits; `None` means
    /// the identity (circuit qubit `i` is machine qubit `i`). Produce
    /// one with [`assign_ions`] to minimize routing.
    pub assignment: Option<Vec<usize>>,
}

impl Default for SchedulePolicy {
    fn default() -> Self {
        SchedulePolicy {
            heat_threshold: 1.0,
            assignment: None,
        }
    }
}

/// Per-event-kind AC-Stark phase offsets, radians per executed event,
/// applied to every qubit in the event's crystal. Zero by default; the
/// hardware-emulation preset exercises the tracking machinery with
/// plausible magnitudes (transport dominates, pulses contribute small
/// differential light shifts, software RZ contributes nothing).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StarkOffsets {
    pub transport: f64,
    pub cooling: f64,
    pub sq_gate: f64,
    pub tq_gate: f64,
    pub measure: f64,
    pub init: f64,
}

impl StarkOffsets {
    /// All offsets zero (ideal hardware).
    pub fn zero() -> Self {
        StarkOffsets::default()
    }

    /// Nonzero constants for exercising the tracking protocol.
    pub fn hardware_emulation() -> Self {
        StarkOffsets {
            transport: 0.17,
            cooling: 0.0,
            sq_gate: 2.3e-3,
            tq_gate: 8.7e-3,
            measure: 0.0,
            init: 0.0,
        }
    }

    /// Offset accrued by one executed event. Zero-duration single-qubit
    /// events are software Z rotations — no light touches the ion, so
    /// they shift nothing.
    fn for_event(&self, kind: &EventKind, dur_us: f64) -> f64 {
        match kind {
            EventKind::Transport { .. } => self.transport,
            EventKind::Cooling { .. } => self.cooling,
            EventKind::SqGate { .. } => {
                if dur_us == 0.0 {
                    0.0
                } else {
                    self.sq_gate
                }
            }
            EventKind::TqGate { .. } => self.tq_gate,
            EventKind::Measure { .. } => self.measure,
            EventKind::Init { .. } => self.init,
        }
    }
}

// ---------------------------------------------------------------------------
// Permutation routing (odd-even transposition sort)
// ---------------------------------------------------------------------------

/// Plan the parallel swap rounds that turn the qubit order `current`
/// into `target` using the odd-even transposition network.
///
/// Round `r` compares adjacent positions of parity `r mod 2` and swaps
/// every out-of-order pair at once. The classic bound holds: an array
/// of length `n` sorts in at most `n` passes, so at most `n` rounds are
/// returned. Rounds that perform no swap are dropped (they cost no
/// machine time), so the result lists only swap-containing rounds, each
/// a set of disjoint position pairs `(i, i+1)` of uniform parity.
pub fn route_permutation(
    current: &[usize],
    target: &[usize],
) -> Result<Vec<Vec<(usize, usize)>>> {
    if current.len() != target.len() {
        return Err(Error::Schedule(format!(
            "route: orderings have different lengths ({} vs {})",
            current.len(),
            target.len()
        )));
    }
    let n = current.len();
    let mut rank: BTreeMap<usize, usize> = BTreeMap::new();
    for (i, &v) in target.iter().enumerate() {
        if rank.insert(v, i).is_some() {
            return Err(Error::Schedule(format!("route: duplicate element {v} in target")));
        }
    }
    let mut arr = Vec::with_capacity(n);
    for &v in current {
        match rank.get(&v) {
            Some(&r) => arr.push(r),
            None => {
                return Err(Error::Schedule(format!(
                    "route: element {v} is not in the target ordering"
                )))
            }
        }
    }
    if arr.iter().collect::<BTreeSet<_>>().len() != n {
        return Err(Error::Schedule("route: duplicate element in current ordering".into()));
    }

    let mut rounds = Vec::new();
    let mut pass = 0usize;
    while !arr.windows(2).all(|w| w[0] <= w[1]) {
        if pass > n {
            // The odd-even network sorts any length-n array in n passes;
            // exceeding that means the inputs were not permutations of
            // each other (already rejected above).
            return Err(Error::Schedule("route: sort failed to converge".into()));
        }
        let mut round = Vec::new();
        let mut i = pass % 2;
        while i + 1 < n {
            if arr[i] > arr[i + 1] {
                arr.swap(i, i + 1);
                round.push((i, i + 1));
            }
            i += 2;
        }
        if !round.is_empty() {
            rounds.push(round);
        }
        pass += 1;
    }
    Ok(rounds)
}

// ---------------------------------------------------------------------------
// Ion assignment
// ---------------------------------------------------------------------------

/// Adjacent-transposition cost of running `pairs` (in order) when
/// circuit qubit `c` sits at machine qubit `map[c]`, mirroring how the
/// compiler routes: before each two-qubit op, the left operand bubbles
/// rightward until the pair is adjacent in the trap order, and the
/// order keeps that change.
fn routing_cost(pairs: &[(usize, usize)], map: &[usize], machine_n: usize) -> usize {
    let mut order: Vec<usize> = (0..machine_n).collect();
    let mut total = 0usize;
    for &(a, b) in pairs {
        let pa = order.iter().position(|&x| x == map[a]).expect("mapped qubit present");
        let pb = order.iter().position(|&x| x == map[b]).expect("mapped qubit present");
        let (l, r) = if pa < pb { (pa, pb) } else { (pb, pa) };
        total += r - l - 1;
        if r - l > 1 {
            let v = order.remove(l);
            order.insert(r - 1, v);
        }
    }
    total
}

fn injections_lex(machine_n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut used = vec![false; machine_n];
    let mut cur = Vec::with_capacity(k);
    fn rec(machine_n: usize, k: usize, used: &mut [bool], cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for m in 0..machine_n {
            if !used[m] {
                used[m] = true;
                cur.push(m);
                rec(machine_n, k, used, cur, out);
                cur.pop();
                used[m] = false;
            }
        }
    }
    rec(machine_n, k, &mut used, &mut cur, &mut out);
    out
}

/// Choose where each circuit qubit lives on the machine.
///
/// Scores every injective assignment by [`routing_cost`] over the
/// circuit's two-qubit interaction sequence and returns the cheapest;
/// ties go to the lexicographically smallest map, so a circuit with no
/// routing pressure gets the identity. The machine never exceeds six
/// qubits, so exhaustive scoring (at most 720 candidates) replaces a
/// greedy heuristic outright and is trivially never worse than the
/// identity assignment.
pub fn assign_ions(c: &Circuit, mode: MachineMode) -> Result<Vec<usize>> {
    validate_circuit(c)?;
    let machine_n = mode.n_qubits();
    if c.n_qubits > machine_n {
        return Err(Error::Schedule(format!(
            "circuit has {} qubits but the mode supports {machine_n}",
            c.n_qubits
        )));
    }
    let pairs: Vec<(usize, usize)> = c
        .ops
        .iter()
        .filter_map(|g| match base_gate(g) {
            Gate::Zz { q, q2 } => Some((*q, *q2)),
            Gate::U4 { q, q2, .. } => Some((*q, *q2)),
            _ => None,
        })
        .collect();
    let mut best: Option<(usize, Vec<usize>)> = None;
    for map in injections_lex(machine_n, c.n_qubits) {
        let cost = routing_cost(&pairs, &map, machine_n);
        if best.as_ref().is_none_or(|(c0, _)| cost < *c0) {
            best = Some((cost, map));
        }
    }
    Ok(best.expect("at least one assignment exists").1)
}

/// Rewrite a circuit onto machine qubit labels: circuit qubit `i`
/// becomes `map[i]`, and the qubit count becomes `n_new`. Measurement
/// keys are untouched — they, not indices, identify classical bits.
pub fn relabel_circuit(c: &Circuit, map: &[usize], n_new: usize) -> Result<Circuit> {
    if map.len() != c.n_qubits {
        return Err(Error::Schedule(format!(
            "assignment maps {} qubits but the circuit has {}",
            map.len(),
            c.n_qubits
        )));
    }
    let mut seen = vec![false; n_new];
    for &m in map {
        if m >= n_new {
            return Err(Error::Schedule(format!("assignment target {m} out of range")));
        }
        if seen[m] {
            return Err(Error::Schedule(format!("assignment maps two qubits to {m}")));
        }
        seen[m] = true;
    }
    fn relabel_gate(g: &Gate, map: &[usize]) -> Gate {
        match g {
            Gate::Rz { q, theta } => Gate::Rz { q: map[*q], theta: *theta },
            Gate::Rxy { q, theta, phi } => Gate::Rxy { q: map[*q], theta: *theta, phi: *phi },
            Gate::Zz { q, q2 } => Gate::Zz { q: map[*q], q2: map[*q2] },
            Gate::Measure { q, key } => Gate::Measure { q: map[*q], key: key.clone() },
            Gate::Reset { q } => Gate::Reset { q: map[*q] },
            Gate::U2 { q, matrix } => Gate::U2 { q: map[*q], matrix: matrix.clone() },
            Gate::U4 { q, q2, matrix } => Gate::U4 {
                q: map[*q],
                q2: map[*q2],
                matrix: matrix.clone(),
            },
            Gate::Cond { on, value, apply } => Gate::Cond {
                on: on.clone(),
                value: *value,
                apply: Box::new(relabel_gate(apply, map)),
            },
        }
    }
    Ok(Circuit {
        n_qubits: n_new,
        ops: c.ops.iter().map(|g| relabel_gate(g, map)).collect(),
        metadata: c.metadata.clone(),
    })
}

// ---------------------------------------------------------------------------
// Episode decomposition
// ---------------------------------------------------------------------------

fn base_gate(g: &Gate) -> &Gate {
    match g {
        Gate::Cond { apply, .. } => apply,
        _ => g,
    }
}

/// A maximal run of ops the compiler can serve with one transport
/// macro: a gate block on at most two qubits, or a single measurement
/// or reset with its isolation requirements.
#[derive(Debug)]
enum Episode {
    Gates { qubits: Vec<usize>, ops: Vec<Gate> },
    MidMeasure { q: usize, key: String },
    Reset { q: usize },
    TerminalMeasure { q: usize, key: String },
}

/// Group ops into episodes. The scan is greedy: a run of unitary ops
/// stays in one episode while its qubit support fits in the current set,
/// and a two-qubit op may widen a one-qubit set to the pair it touches
/// (so the single-qubit layers of a synthesized two-qubit block ride
/// the same join as its entanglers). The maximal trailing run of
/// measurements is terminal; every earlier measurement is mid-circuit.
fn split_episodes(c: &Circuit) -> Vec<Episode> {
    let mut tail = c.ops.len();
    while tail > 0 && matches!(c.ops[tail - 1], Gate::Measure { .. }) {
        tail -= 1;
    }
    let mut episodes = Vec::new();
    let mut i = 0usize;
    while i < tail {
        match &c.ops[i] {
            Gate::Measure { q, key } => {
                episodes.push(Episode::MidMeasure { q: *q, key: key.clone() });
                i += 1;
            }
            Gate::Reset { q } => {
                episodes.push(Episode::Reset { q: *q });
                i += 1;
            }
            first => {
                let mut qubits = first.qubits();
                qubits.sort_unstable();
                let mut ops = vec![first.clone()];
                let mut j = i + 1;
                while j < tail {
                    let g = &c.ops[j];
                    if matches!(g, Gate::Measure { .. } | Gate::Reset { .. }) {
                        break;
                    }
                    let gq = g.qubits();
                    if gq.iter().all(|q| qubits.contains(q)) {
                        ops.push(g.clone());
                    } else if qubits.len() == 1 && gq.len() == 2 && gq.contains(&qubits[0]) {
                        qubits = gq;
                        qubits.sort_unstable();
                        ops.push(g.clone());
                    } else {
                        break;
                    }
                    j += 1;
                }
                episodes.push(Episode::Gates { qubits, ops });
                i = j;
            }
        }
    }
    for k in tail..c.ops.len() {
        if let Gate::Measure { q, key } = &c.ops[k] {
            episodes.push(Episode::TerminalMeasure { q: *q, key: key.clone() });
        }
    }
    episodes
}

// ---------------------------------------------------------------------------
// Transport planning (uniform-cost search over primitives)
// ---------------------------------------------------------------------------

/// Canonical fingerprint of an arrangement: crystals sorted by chain
/// position with their ion contents. Heat and clock are irrelevant to
/// reachability, so they are omitted.
fn state_key(state: &MachineState, layout: &TrapLayout) -> String {
    let mut items: Vec<(usize, String)> = state
        .crystals
        .iter()
        .map(|c| {
            let pos = layout.position(c.site).expect("crystal on a layout site");
            let ions: Vec<String> = c
                .ions
                .iter()
                .map(|i| match i.logical_id {
                    Some(q) => format!("q{q}"),
                    None => "c".to_string(),
                })
                .collect();
            (pos, ions.join(","))
        })
        .collect();
    items.sort();
    format!("{items:?}")
}

/// Deterministic uniform-cost search for a transport plan.
///
/// Explores single primitives from each popped arrangement: splits of
/// four-ion crystals allowed by `may_split`, and shifts of two-ion
/// crystals allowed by `may_move` into free adjacent sites. `finish`
/// inspects an arrangement and returns the closing ops (possibly empty)
/// once the goal is met. Cost is the effective transport duration;
/// ties break by insertion order, so the plan is reproducible. The
/// reachable arrangement space at this scale is tiny; the node cap is a
/// guard against misuse, not a tuning knob.
fn plan_transport(
    start: &MachineState,
    layout: &TrapLayout,
    table: &TransportTable,
    may_move: &dyn Fn(&Crystal) -> bool,
    may_split: &dyn Fn(&Crystal) -> bool,
    finish: &dyn Fn(&MachineState) -> Option<Vec<TransportOp>>,
    what: &str,
) -> Result<Vec<TransportOp>> {
    const MAX_NODES: usize = 50_000;
    struct Node {
        state: MachineState,
        ops: Vec<TransportOp>,
    }
    let mut nodes = vec![Node { state: start.clone(), ops: Vec::new() }];
    let mut heap: BinaryHeap<Reverse<(u64, u64)>> = BinaryHeap::new();
    heap.push(Reverse((0, 0)));
    let mut visited: BTreeSet<String> = BTreeSet::new();
    visited.insert(state_key(start, layout));
    let sites = layout.sites();

    while let Some(Reverse((cost, idx))) = heap.pop() {
        let (st, ops) = {
            let node = &nodes[idx as usize];
            (node.state.clone(), node.ops.clone())
        };
        if let Some(suffix) = finish(&st) {
            let mut check = st.clone();
            for op in &suffix {
                check.apply_transport(layout, table, *op)?;
            }
            let mut plan = ops;
            plan.extend(suffix);
            return Ok(plan);
        }
        if nodes.len() > MAX_NODES {
            return Err(Error::Schedule(format!(
                "{what}: transport planning exceeded its search bound"
            )));
        }

        let mut order: Vec<usize> = (0..st.crystals.len()).collect();
        order.sort_by_key(|&i| layout.position(st.crystals[i].site).expect("on layout"));
        let mut candidates: Vec<TransportOp> = Vec::new();
        for &ci in &order {
            let cr = &st.crystals[ci];
            if !may_move(cr) {
                continue;
            }
            match cr.len() {
                4 => {
                    if may_split(cr) {
                        for (l, r) in [
                            (SubSlot::Left, SubSlot::Right),
                            (SubSlot::Left, SubSlot::Center),
                            (SubSlot::Center, SubSlot::Right),
                        ] {
                            candidates.push(TransportOp::Split {
                                zone: cr.site.zone,
                                left_to: l,
                                right_to: r,
                            });
                        }
                    }
                }
                2 => {
                    let pos = layout.position(cr.site).expect("on layout");
                    let mut neighbors = Vec::new();
                    if pos > 0 {
                        neighbors.push(pos - 1);
                    }
                    if pos + 1 < sites.len() {
                        neighbors.push(pos + 1);
                    }
                    for np in neighbors {
                        let dest = sites[np];
                        if st.crystal_at(dest).is_some() {
                            continue;
                        }
                        let op = if dest.zone == cr.site.zone {
                            TransportOp::IntrazoneShift { from: cr.site, to: dest }
                        } else {
                            TransportOp::InterzoneShift { from: cr.site, to: dest }
                        };
                        candidates.push(op);
                    }
                }
                _ => {}
            }
        }
        for op in candidates {
            let mut next = st.clone();
            if next.apply_transport(layout, table, op).is_err() {
                continue;
            }
            if !visited.insert(state_key(&next, layout)) {
                continue;
            }
            let step = (table.effective_duration_us(op.kind()) * 1000.0).round() as u64;
            let mut next_ops = ops.clone();
            next_ops.push(op);
            nodes.push(Node { state: next, ops: next_ops });
            heap.push(Reverse((cost + step, (nodes.len() - 1) as u64)));
        }
    }
    Err(Error::Schedule(format!(
        "{what}: no legal transport plan exists from this configuration"
    )))
}

/// Invert a plan: reversed order, each primitive replaced by its
/// inverse (split <-> combine, shifts retraced, swap self-inverse).
/// Running a plan then its reverse restores the arrangement — except
/// that a swap executed in between leaves the two units exchanged,
/// which is exactly how a transposition is realized.
fn reverse_plan(plan: &[TransportOp]) -> Vec<TransportOp> {
    plan.iter()
        .rev()
        .map(|op| match *op {
            TransportOp::IntrazoneShift { from, to } => {
                TransportOp::IntrazoneShift { from: to, to: from }
            }
            TransportOp::InterzoneShift { from, to } => {
                TransportOp::InterzoneShift { from: to, to: from }
            }
            TransportOp::Split { zone, left_to, right_to } => TransportOp::Combine {
                zone,
                left: left_to,
                right: right_to,
            },
            TransportOp::Combine { zone, left, right } => TransportOp::Split {
                zone,
                left_to: left,
                right_to: right,
            },
            TransportOp::Swap { zone } => TransportOp::Swap { zone },
        })
        .collect()
}

// ---------------------------------------------------------------------------
// The compiler
// ---------------------------------------------------------------------------

struct Compiler<'a> {
    layout: &'a TrapLayout,
    table: &'a TransportTable,
    timing: &'a TimingTable,
    policy: &'a SchedulePolicy,
    state: MachineState,
    /// Next free time per zone.
    zone_free: Vec<f64>,
    /// Next free time per machine qubit.
    qubit_free: Vec<f64>,
    /// When each measurement key becomes available to conditioned ops.
    key_ready: BTreeMap<String, f64>,
    /// Qubits whose crystal has moved since its last stage-3 cooling.
    /// Initially true: the compile begins with a cold-start stage 3
    /// before the first gate block.
    dirty: Vec<bool>,
    events: Vec<ScheduleEvent>,
}

impl<'a> Compiler<'a> {
    fn locate(&self, q: usize) -> Result<(usize, Site)> {
        self.state
            .locate_qubit(q)
            .ok_or_else(|| Error::Schedule(format!("internal: qubit {q} not on the machine")))
    }

    fn same_crystal(&self, qa: usize, qb: usize) -> Result<bool> {
        Ok(self.locate(qa)?.0 == self.locate(qb)?.0)
    }

    /// Place an event after its resource and classical dependencies and
    /// claim its resources. Returns the start time.
    fn emit(
        &mut self,
        zones: &[usize],
        qubits: &[usize],
        dur_us: f64,
        kind: EventKind,
        after: f64,
    ) -> f64 {
        let mut start = after;
        for &z in zones {
            start = start.max(self.zone_free[z]);
        }
        for &q in qubits {
            start = start.max(self.qubit_free[q]);
        }
        for &z in zones {
            self.zone_free[z] = start + dur_us;
        }
        for &q in qubits {
            self.qubit_free[q] = start + dur_us;
        }
        self.events.push(ScheduleEvent {
            start_us: start,
            dur_us,
            zone: zones[0],
            qubits: qubits.to_vec(),
            kind,
        });
        start
    }

    /// Zones occupied and qubits carried by a transport op in the
    /// current arrangement (computed before the op is applied).
    fn transport_operands(&self, op: &TransportOp) -> Result<(Vec<usize>, Vec<usize>)> {
        let st = &self.state;
        let need = |site: Site| -> Result<usize> {
            st.crystal_at(site).ok_or_else(|| {
                Error::Schedule(format!(
                    "internal: no crystal at {} for {op:?}",
                    self.layout.site_name(site)
                ))
            })
        };
        match *op {
            TransportOp::IntrazoneShift { from, .. } => {
                let i = need(from)?;
                Ok((vec![from.zone], st.crystals[i].qubits()))
            }
            TransportOp::InterzoneShift { from, to } => {
                let i = need(from)?;
                Ok((vec![to.zone, from.zone], st.crystals[i].qubits()))
            }
            TransportOp::Split { zone, .. } => {
                let i = need(Site::new(zone, SubSlot::Center))?;
                Ok((vec![zone], st.crystals[i].qubits()))
            }
            TransportOp::Combine { zone, left, right } => {
                let li = need(Site::new(zone, left))?;
                let ri = need(Site::new(zone, right))?;
                let mut qs = st.crystals[li].qubits();
                qs.extend(st.crystals[ri].qubits());
                Ok((vec![zone], qs))
            }
            TransportOp::Swap { zone } => {
                let i = need(Site::new(zone, SubSlot::Center))?;
                Ok((vec![zone], st.crystals[i].qubits()))
            }
        }
    }

    fn exec_transport(&mut self, op: TransportOp) -> Result<()> {
        let (zones, qubits) = self.transport_operands(&op)?;
        self.state.apply_transport(self.layout, self.table, op)?;
        for &q in &qubits {
            self.dirty[q] = true;
        }
        let dur = self.table.effective_duration_us(op.kind());
        self.emit(&zones, &qubits, dur, EventKind::Transport { op }, 0.0);
        Ok(())
    }

    fn cool(&mut self, stage: u8, site: Site) -> Result<()> {
        let idx = self.state.crystal_at(site).ok_or_else(|| {
            Error::Schedule(format!(
                "internal: cooling stage {stage} at empty {}",
                self.layout.site_name(site)
            ))
        })?;
        let qubits = self.state.crystals[idx].qubits();
        let dur = self.timing.cool_us(stage)?;
        self.state.insert_cooling(self.layout, self.timing, stage, site)?;
        if stage == 3 {
            for &q in &qubits {
                self.dirty[q] = false;
            }
        }
        self.emit(&[site.zone], &qubits, dur, EventKind::Cooling { stage, site }, 0.0);
        Ok(())
    }

    /// Execute a transport plan, inserting cooling stages 1 and 2 after
    /// each unit's final interzone hop (once per traveling pair per
    /// journey, per the default policy).
    fn run_plan(&mut self, plan: &[TransportOp]) -> Result<()> {
        // Dry-run to find which qubit each interzone hop carries and
        // where each qubit's journey ends.
        let mut probe = self.state.clone();
        let mut moved: Vec<Option<usize>> = Vec::with_capacity(plan.len());
        for op in plan {
            let carried = if let TransportOp::InterzoneShift { from, .. } = op {
                probe
                    .crystal_at(*from)
                    .map(|i| probe.crystals[i].qubits()[0])
            } else {
                None
            };
            probe.apply_transport(self.layout, self.table, *op)?;
            moved.push(carried);
        }
        let mut last_hop: BTreeMap<usize, usize> = BTreeMap::new();
        for (i, carried) in moved.iter().enumerate() {
            if let Some(q) = carried {
                last_hop.insert(*q, i);
            }
        }
        for (i, op) in plan.iter().enumerate() {
            self.exec_transport(*op)?;
            if let Some(q) = moved[i] {
                if last_hop[&q] == i {
                    let (_, site) = self.locate(q)?;
                    self.cool(1, site)?;
                    self.cool(2, site)?;
                }
            }
        }
        Ok(())
    }

    /// Plan to merge the units of two order-adjacent qubits into one
    /// four-ion crystal at a gate-zone center.
    fn join_plan(&self, qa: usize, qb: usize) -> Result<Vec<TransportOp>> {
        let layout = self.layout;
        let involved =
            move |cr: &Crystal| cr.qubits().iter().any(|&q| q == qa || q == qb);
        plan_transport(
            &self.state,
            layout,
            self.table,
            &involved,
            &involved,
            &|st| {
                let (ia, sa) = st.locate_qubit(qa)?;
                let (ib, sb) = st.locate_qubit(qb)?;
                if ia == ib
                    || st.crystals[ia].len() != 2
                    || st.crystals[ib].len() != 2
                    || sa.zone != sb.zone
                    || !layout.is_gate_zone(sa.zone)
                {
                    return None;
                }
                let pa = layout.position(sa).ok()?;
                let pb = layout.position(sb).ok()?;
                let (left, right) = if pa < pb {
                    (sa.slot, sb.slot)
                } else {
                    (sb.slot, sa.slot)
                };
                Some(vec![TransportOp::Combine { zone: sa.zone, left, right }])
            },
            "join",
        )
    }

    /// Plan to leave `q`'s pair alone in a gate zone for a mid-circuit
    /// measurement or reset. Bystander units may be parked one zone
    /// over; only `q`'s own crystal may split. Deep in a full trap this
    /// can be genuinely unreachable (a pair walled in by occupied
    /// neighbors on both sides has nowhere to send its partner), in
    /// which case scheduling fails with a descriptive error.
    fn isolation_plan(&self, q: usize) -> Result<Vec<TransportOp>> {
        let layout = self.layout;
        let owns_q = move |cr: &Crystal| cr.qubits().contains(&q);
        plan_transport(
            &self.state,
            layout,
            self.table,
            &|_| true,
            &owns_q,
            &|st| {
                let (ci, site) = st.locate_qubit(q)?;
                if st.crystals[ci].len() != 2 || !layout.is_gate_zone(site.zone) {
                    return None;
                }
                let alone = st
                    .crystals
                    .iter()
                    .enumerate()
                    .all(|(j, c)| j == ci || c.site.zone != site.zone);
                if alone {
                    Some(Vec::new())
                } else {
                    None
                }
            },
            &format!("measurement isolation of qubit {q}"),
        )
    }

    /// Plan to bring `q`'s crystal into a gate zone (for pulsed
    /// single-qubit gates and terminal readout of parked memory pairs).
    fn gate_zone_plan(&self, q: usize) -> Result<Vec<TransportOp>> {
        let layout = self.layout;
        let owns_q = move |cr: &Crystal| cr.qubits().contains(&q);
        plan_transport(
            &self.state,
            layout,
            self.table,
            &owns_q,
            &|_| false,
            &|st| {
                let (_, site) = st.locate_qubit(q)?;
                if layout.is_gate_zone(site.zone) {
                    Some(Vec::new())
                } else {
                    None
                }
            },
            &format!("gate-zone fetch of qubit {q}"),
        )
    }

    fn in_gate_zone(&self, q: usize) -> Result<bool> {
        let (_, site) = self.locate(q)?;
        Ok(self.layout.is_gate_zone(site.zone))
    }

    /// Exchange two order-adjacent qubits: swap in place if they share
    /// a crystal, otherwise join, swap, and unjoin. The reversed join
    /// walks each unit back along the other's path, so the home sites
    /// are restored with the two qubits exchanged.
    fn transpose(&mut self, qa: usize, qb: usize) -> Result<()> {
        if self.same_crystal(qa, qb)? {
            let (_, site) = self.locate(qa)?;
            self.exec_transport(TransportOp::Swap { zone: site.zone })?;
        } else {
            let plan = self.join_plan(qa, qb)?;
            self.run_plan(&plan)?;
            let (_, site) = self.locate(qa)?;
            self.exec_transport(TransportOp::Swap { zone: site.zone })?;
            self.run_plan(&reverse_plan(&plan))?;
        }
        Ok(())
    }

    /// Realize odd-even rounds as transposition macros. Within a round
    /// the pairs are disjoint, so the qubit order captured at the round
    /// boundary stays valid for every pair in it.
    fn realize_rounds(&mut self, rounds: &[Vec<(usize, usize)>]) -> Result<()> {
        for round in rounds {
            let order = self.state.qubit_order_along_trap(self.layout);
            for &(i, j) in round {
                self.transpose(order[i], order[j])?;
            }
        }
        Ok(())
    }

    /// Bubble the left operand rightward until the pair is adjacent in
    /// the trap order (a degenerate odd-even sort toward the order with
    /// that single block move).
    fn ensure_adjacent(&mut self, qa: usize, qb: usize) -> Result<()> {
        let order = self.state.qubit_order_along_trap(self.layout);
        let pa = order.iter().position(|&x| x == qa).expect("qubit in order");
        let pb = order.iter().position(|&x| x == qb).expect("qubit in order");
        if pa.abs_diff(pb) == 1 {
            return Ok(());
        }
        let (l, r) = if pa < pb { (pa, pb) } else { (pb, pa) };
        let mut target = order.clone();
        let v = target.remove(l);
        target.insert(r - 1, v);
        let rounds = route_permutation(&order, &target)?;
        self.realize_rounds(&rounds)
    }

    /// Assert the gate-block heat contract on the crystal at `site`.
    fn check_heat(&self, site: Site) -> Result<()> {
        let idx = self
            .state
            .crystal_at(site)
            .ok_or_else(|| Error::Schedule("internal: heat check at empty site".into()))?;
        let cr = &self.state.crystals[idx];
        let worst = cr.axial_heat.max(cr.radial_heat);
        if worst >= self.policy.heat_threshold {
            return Err(Error::Schedule(format!(
                "heat ledger {worst} quanta at {} is not below the policy threshold {}",
                self.layout.site_name(cr.site),
                self.policy.heat_threshold
            )));
        }
        Ok(())
    }

    fn key_dep(&self, g: &Gate) -> f64 {
        if let Gate::Cond { on, .. } = g {
            *self.key_ready.get(on).unwrap_or(&0.0)
        } else {
            0.0
        }
    }

    fn emit_gate(&mut self, g: &Gate) -> Result<()> {
        let dep = self.key_dep(g);
        match base_gate(g) {
            Gate::Rz { q, .. } => {
                let (_, site) = self.locate(*q)?;
                self.emit(&[site.zone], &[*q], 0.0, EventKind::SqGate { gate: g.clone() }, dep);
            }
            Gate::Rxy { q, .. } => {
                let (_, site) = self.locate(*q)?;
                if !self.layout.is_gate_zone(site.zone) {
                    return Err(Error::Schedule(format!(
                        "internal: RXY on qubit {q} outside a gate zone"
                    )));
                }
                let dur = self.timing.sq_pi2_us;
                self.emit(&[site.zone], &[*q], dur, EventKind::SqGate { gate: g.clone() }, dep);
            }
            Gate::Zz { q, q2 } => {
                let (ia, site) = self.locate(*q)?;
                let (ib, _) = self.locate(*q2)?;
                let cr = &self.state.crystals[ia];
                if ia != ib
                    || cr.len() != 4
                    || site.slot != SubSlot::Center
                    || !self.layout.is_gate_zone(site.zone)
                {
                    return Err(Error::Schedule(format!(
                        "internal: ZZ on ({q},{q2}) without a co-trapped pair at a gate center"
                    )));
                }
                let dur = self.timing.tq_gate_us;
                self.emit(
                    &[site.zone],
                    &[*q, *q2],
                    dur,
                    EventKind::TqGate { gate: g.clone() },
                    dep,
                );
            }
            other => {
                return Err(Error::Schedule(format!(
                    "internal: op {other:?} reached gate emission"
                )))
            }
        }
        Ok(())
    }

    fn run_gates(&mut self, qubits: &[usize], ops: &[Gate]) -> Result<()> {
        let pulsed = ops
            .iter()
            .any(|g| matches!(base_gate(g), Gate::Rxy { .. } | Gate::Zz { .. }));
        let mut plan: Vec<TransportOp> = Vec::new();
        if qubits.len() == 2 {
            let (qa, qb) = (qubits[0], qubits[1]);
            if !self.same_crystal(qa, qb)? {
                self.ensure_adjacent(qa, qb)?;
                if !self.same_crystal(qa, qb)? {
                    plan = self.join_plan(qa, qb)?;
                    self.run_plan(&plan)?;
                }
            }
        } else if pulsed && !self.in_gate_zone(qubits[0])? {
            plan = self.gate_zone_plan(qubits[0])?;
            self.run_plan(&plan)?;
        }
        if pulsed {
            let (ci, site) = self.locate(qubits[0])?;
            let crystal_qubits = self.state.crystals[ci].qubits();
            if crystal_qubits.iter().any(|&q| self.dirty[q]) {
                self.cool(3, site)?;
            }
            self.check_heat(site)?;
        }
        for g in ops {
            self.emit_gate(g)?;
        }
        if !plan.is_empty() {
            self.run_plan(&reverse_plan(&plan))?;
        }
        Ok(())
    }

    fn run_measure(&mut self, q: usize, key: &str, terminal: bool) -> Result<()> {
        let plan = if terminal {
            if self.in_gate_zone(q)? {
                Vec::new()
            } else {
                self.gate_zone_plan(q)?
            }
        } else {
            self.isolation_plan(q)?
        };
        self.run_plan(&plan)?;
        let (_, site) = self.locate(q)?;
        let dur = if terminal {
            self.timing.measure_hf_us
        } else {
            self.timing.measure_lc_us
        };
        let start = self.emit(
            &[site.zone],
            &[q],
            dur,
            EventKind::Measure { q, key: key.to_string(), terminal },
            0.0,
        );
        self.key_ready.insert(key.to_string(), start + dur);
        self.state.advance_clock(dur);
        if !plan.is_empty() {
            self.run_plan(&reverse_plan(&plan))?;
        }
        Ok(())
    }

    fn run_reset(&mut self, q: usize) -> Result<()> {
        // Re-pumping one qubit mid-circuit scatters photons just like a
        // measurement, so it takes the same isolation.
        let plan = self.isolation_plan(q)?;
        self.run_plan(&plan)?;
        let (_, site) = self.locate(q)?;
        let dur = self.timing.init_us;
        self.emit(&[site.zone], &[q], dur, EventKind::Init { q }, 0.0);
        self.state.advance_clock(dur);
        if !plan.is_empty() {
            self.run_plan(&reverse_plan(&plan))?;
        }
        Ok(())
    }

    fn run_episode(&mut self, ep: &Episode) -> Result<()> {
        match ep {
            Episode::Gates { qubits, ops } => self.run_gates(qubits, ops),
            Episode::MidMeasure { q, key } => self.run_measure(*q, key, false),
            Episode::TerminalMeasure { q, key } => self.run_measure(*q, key, true),
            Episode::Reset { q } => self.run_reset(*q),
        }
    }

    fn restore_order(&mut self, initial: &[usize]) -> Result<()> {
        let current = self.state.qubit_order_along_trap(self.layout);
        if current == initial {
            return Ok(());
        }
        let rounds = route_permutation(&current, initial)?;
        self.realize_rounds(&rounds)
    }
}

/// Compile a synthesized circuit into a transport schedule.
///
/// Preconditions: the circuit validates, contains native ops only, and
/// fits the mode's qubit count. The compiler applies the policy's
/// assignment (identity by default), walks the circuit episode by
/// episode, and finally sorts the qubit order back so the last
/// arrangement equals the first — ion for ion. Every emitted event has
/// been applied to a live [`MachineState`], so the schedule replays
/// without legality errors by construction.
pub fn compile_schedule(
    c: &Circuit,
    config: &MachineConfig,
    policy: &SchedulePolicy,
) -> Result<TransportSchedule> {
    validate_circuit(c)?;
    config.validate()?;
    require_standard_layout(&config.layout)?;
    if !(policy.heat_threshold.is_finite() && policy.heat_threshold > 0.0) {
        return Err(Error::Schedule("heat threshold must be positive".into()));
    }
    let machine_n = config.mode.n_qubits();
    if c.n_qubits > machine_n {
        return Err(Error::Schedule(format!(
            "circuit has {} qubits but the mode supports {machine_n}",
            c.n_qubits
        )));
    }
    for (i, g) in c.ops.iter().enumerate() {
        if !g.is_native() {
            return Err(Error::Schedule(format!(
                "ops[{i}] is not in the native set; run synthesis first"
            )));
        }
    }
    let map: Vec<usize> = match &policy.assignment {
        Some(m) => m.clone(),
        None => (0..c.n_qubits).collect(),
    };
    let relabeled = relabel_circuit(c, &map, machine_n)?;

    let (_, state) = default_machine(config.mode);
    let n_zones = config.layout.zones.len();
    let mut comp = Compiler {
        layout: &config.layout,
        table: &config.transport,
        timing: &config.timing,
        policy,
        state,
        zone_free: vec![0.0; n_zones],
        qubit_free: vec![0.0; machine_n],
        key_ready: BTreeMap::new(),
        dirty: vec![true; machine_n],
        events: Vec::new(),
    };
    let initial_config = comp.state.configuration(comp.layout);
    let initial_order = comp.state.qubit_order_along_trap(comp.layout);

    for ep in split_episodes(&relabeled) {
        comp.run_episode(&ep)?;
    }
    let final_permutation = comp.state.qubit_order_along_trap(comp.layout);
    comp.restore_order(&initial_order)?;

    if comp.state.configuration(comp.layout) != initial_config {
        return Err(Error::Schedule(
            "internal: end-state restoration failed".into(),
        ));
    }
    comp.state.validate(comp.layout)?;

    let mut events = comp.events;
    events.sort_by(|a, b| a.start_us.partial_cmp(&b.start_us).expect("finite times"));
    Ok(TransportSchedule {
        mode: config.mode,
        n_qubits: machine_n,
        events,
        qubit_to_ion: map,
        final_permutation,
    })
}

/// The compiler's placement logic is written against the standard
/// five-zone chip (load, aux, gate, aux, gate). Custom layouts parse
/// and validate for experimentation, but they are not routable here.
fn require_standard_layout(layout: &TrapLayout) -> Result<()> {
    let standard = TrapLayout::default();
    let same = layout.zones.len() == standard.zones.len()
        && layout
            .zones
            .iter()
            .zip(&standard.zones)
            .all(|(a, b)| a.kind == b.kind);
    if same {
        Ok(())
    } else {
        Err(Error::Schedule(
            "scheduling requires the standard five-zone layout".into(),
        ))
    }
}

// ---------------------------------------------------------------------------
// Replay and logical extraction
// ---------------------------------------------------------------------------

/// Re-execute a schedule's events against a fresh machine, enforcing
/// every placement contract: transport legality, gate-zone residency
/// for pulses, co-trapping for entanglers, stage-3 cooling since the
/// last transport before each entangler, the heat ceiling, and
/// isolation during mid-circuit readout. Returns the final state.
pub fn replay(
    s: &TransportSchedule,
    config: &MachineConfig,
    policy: &SchedulePolicy,
) -> Result<MachineState> {
    require_standard_layout(&config.layout)?;
    let layout = &config.layout;
    let (_, mut state) = default_machine(s.mode);
    let mut dirty = vec![true; s.n_qubits];
    for (i, ev) in s.events.iter().enumerate() {
        let ctx = || format!("events[{i}]");
        match &ev.kind {
            EventKind::Transport { op } => {
                let touched: Vec<usize> = match op {
                    TransportOp::Combine { zone, left, right } => {
                        let mut qs = Vec::new();
                        for slot in [*left, *right] {
                            if let Some(ci) = state.crystal_at(Site::new(*zone, slot)) {
                                qs.extend(state.crystals[ci].qubits());
                            }
                        }
                        qs
                    }
                    TransportOp::IntrazoneShift { from, .. }
                    | TransportOp::InterzoneShift { from, .. } => state
                        .crystal_at(*from)
                        .map(|ci| state.crystals[ci].qubits())
                        .unwrap_or_default(),
                    TransportOp::Split { zone, .. } | TransportOp::Swap { zone } => state
                        .crystal_at(Site::new(*zone, SubSlot::Center))
                        .map(|ci| state.crystals[ci].qubits())
                        .unwrap_or_default(),
                };
                state
                    .apply_transport(layout, &config.transport, *op)
                    .map_err(|e| Error::Schedule(format!("{}: {e}", ctx())))?;
                for q in touched {
                    dirty[q] = true;
                }
            }
            EventKind::Cooling { stage, site } => {
                if *stage == 3 {
                    if let Some(ci) = state.crystal_at(*site) {
                        for q in state.crystals[ci].qubits() {
                            dirty[q] = false;
                        }
                    }
                }
                state
                    .insert_cooling(layout, &config.timing, *stage, *site)
                    .map_err(|e| Error::Schedule(format!("{}: {e}", ctx())))?;
            }
            EventKind::SqGate { gate } => {
                if let Gate::Rxy { q, .. } = base_gate(gate) {
                    let (_, site) = state.locate_qubit(*q).ok_or_else(|| {
                        Error::Schedule(format!("{}: qubit {q} missing", ctx()))
                    })?;
                    if !layout.is_gate_zone(site.zone) {
                        return Err(Error::Schedule(format!(
                            "{}: RXY outside a gate zone",
                            ctx()
                        )));
                    }
                }
                state.advance_clock(ev.dur_us);
            }
            EventKind::TqGate { gate } => {
                let (q, q2) = match base_gate(gate) {
                    Gate::Zz { q, q2 } => (*q, *q2),
                    other => {
                        return Err(Error::Schedule(format!(
                            "{}: unexpected tq payload {other:?}",
                            ctx()
                        )))
                    }
                };
                let (ia, site) = state.locate_qubit(q).ok_or_else(|| {
                    Error::Schedule(format!("{}: qubit {q} missing", ctx()))
                })?;
                let (ib, _) = state.locate_qubit(q2).ok_or_else(|| {
                    Error::Schedule(format!("{}: qubit {q2} missing", ctx()))
                })?;
                let cr = &state.crystals[ia];
                if ia != ib
                    || cr.len() != 4
                    || site.slot != SubSlot::Center
                    || !layout.is_gate_zone(site.zone)
                {
                    return Err(Error::Schedule(format!(
                        "{}: entangler without a co-trapped pair at a gate center",
                        ctx()
                    )));
                }
                if cr.qubits().iter().any(|&qq| dirty[qq]) {
                    return Err(Error::Schedule(format!(
                        "{}: entangler on a crystal with no stage-3 cooling since transport",
                        ctx()
                    )));
                }
                if cr.axial_heat.max(cr.radial_heat) >= policy.heat_threshold {
                    return Err(Error::Schedule(format!(
                        "{}: heat ledger above threshold at the entangler",
                        ctx()
                    )));
                }
                state.advance_clock(ev.dur_us);
            }
            EventKind::Measure { q, terminal, .. } => {
                let (ci, site) = state.locate_qubit(*q).ok_or_else(|| {
                    Error::Schedule(format!("{}: qubit {q} missing", ctx()))
                })?;
                if !layout.is_gate_zone(site.zone) {
                    return Err(Error::Schedule(format!(
                        "{}: readout outside a gate zone",
                        ctx()
                    )));
                }
                if !terminal {
                    let alone = state
                        .crystals
                        .iter()
                        .enumerate()
                        .all(|(j, c)| j == ci || c.site.zone != site.zone);
                    if state.crystals[ci].len() != 2 || !alone {
                        return Err(Error::Schedule(format!(
                            "{}: mid-circuit readout without isolation",
                            ctx()
                        )));
                    }
                }
                state.advance_clock(ev.dur_us);
            }
            EventKind::Init { q } => {
                let (ci, site) = state.locate_qubit(*q).ok_or_else(|| {
                    Error::Schedule(format!("{}: qubit {q} missing", ctx()))
                })?;
                let alone = state
                    .crystals
                    .iter()
                    .enumerate()
                    .all(|(j, c)| j == ci || c.site.zone != site.zone);
                if !layout.is_gate_zone(site.zone) || state.crystals[ci].len() != 2 || !alone {
                    return Err(Error::Schedule(format!(
                        "{}: mid-circuit reset without isolation",
                        ctx()
                    )));
                }
                state.advance_clock(ev.dur_us);
            }
        }
    }
    Ok(state)
}

/// The gate-level circuit a schedule implements, on machine qubit
/// labels: gate, measurement, and init events in schedule order, with
/// transport and cooling stripped. Event order respects every per-qubit
/// and classical dependency, so simulating this circuit reproduces the
/// schedule's logical action.
pub fn logical_circuit(s: &TransportSchedule) -> Circuit {
    let mut c = Circuit::new(s.n_qubits);
    for ev in &s.events {
        match &ev.kind {
            EventKind::SqGate { gate } | EventKind::TqGate { gate } => {
                c.ops.push(gate.clone());
            }
            EventKind::Measure { q, key, .. } => {
                c.ops.push(Gate::Measure { q: *q, key: key.clone() });
            }
            EventKind::Init { q } => {
                c.ops.push(Gate::Reset { q: *q });
            }
            _ => {}
        }
    }
    c
}

// ---------------------------------------------------------------------------
// Time budget
// ---------------------------------------------------------------------------

/// Where the schedule's time goes, split into the five operational
/// categories. `total_us` sums category durations (the serial cost);
/// `wall_us` is the latest event end (the parallel cost — the maximum
/// over zones of the per-zone end time, since every event occupies its
/// zone for its duration). Fractions are of `total_us` and sum to one
/// for any non-empty schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeBudget {
    pub categories: BTreeMap<String, f64>,
    pub fractions: BTreeMap<String, f64>,
    pub total_us: f64,
    pub wall_us: f64,
}

/// Budget category for an event kind: measurement and initialization
/// share a category; everything else maps one-to-one.
pub fn budget_category(kind: &EventKind) -> &'static str {
    match kind {
        EventKind::Transport { .. } => "transport",
        EventKind::Cooling { .. } => "cooling",
        EventKind::SqGate { .. } => "sq_gates",
        EventKind::TqGate { .. } => "tq_gates",
        EventKind::Measure { .. } | EventKind::Init { .. } => "measure_init",
    }
}

const BUDGET_CATEGORIES: [&str; 5] =
    ["cooling", "transport", "tq_gates", "sq_gates", "measure_init"];

/// Tally a schedule's per-category time and its wall clock.
pub fn time_budget(s: &TransportSchedule) -> TimeBudget {
    let mut categories: BTreeMap<String, f64> = BUDGET_CATEGORIES
        .iter()
        .map(|&k| (k.to_string(), 0.0))
        .collect();
    for ev in &s.events {
        *categories
            .get_mut(budget_category(&ev.kind))
            .expect("known category") += ev.dur_us;
    }
    let total_us: f64 = categories.values().sum();
    let fractions = categories
        .iter()
        .map(|(k, &v)| (k.clone(), if total_us > 0.0 { v / total_us } else { 0.0 }))
        .collect();
    TimeBudget {
        categories,
        fractions,
        total_us,
        wall_us: s.wall_time_us(),
    }
}

// ---------------------------------------------------------------------------
// Phase tracking
// ---------------------------------------------------------------------------

fn rxy_phase_mut(g: &mut Gate) -> Option<&mut f64> {
    match g {
        Gate::Rxy { phi, .. } => Some(phi),
        Gate::Cond { apply, .. } => rxy_phase_mut(apply),
        _ => None,
    }
}

/// Walk the events in time order, accruing the physical Stark frame
/// per qubit and rewriting each RXY pulse's phase argument. With
/// `compensate` the software ledger (accumulated by the same rule) is
/// added back, modeling the tracking protocol; without it the pulses
/// see the raw drifted frame, modeling hardware with tracking off.
///
/// Only RXY phases are touched: the entangler and the measurements are
/// diagonal in Z, so a Z-frame rotation commutes straight through them,
/// and software RZ events update the frame for free by construction.
/// Conditioned pulses are compensated as if they always fire — the
/// ledger is compile-time bookkeeping and cannot see the branch.
fn rewrite_phases(
    s: &TransportSchedule,
    offsets: &StarkOffsets,
    compensate: bool,
) -> TransportSchedule {
    let mut physical = vec![0.0f64; s.n_qubits];
    let mut ledger = vec![0.0f64; s.n_qubits];
    let mut out = s.clone();
    for ev in &mut out.events {
        let target = match &mut ev.kind {
            EventKind::SqGate { gate } => rxy_phase_mut(gate),
            _ => None,
        };
        if let Some(phi) = target {
            let q = ev.qubits[0];
            let mut adjusted = *phi - physical[q];
            if compensate {
                adjusted += ledger[q];
            }
            *phi = adjusted;
        }
        let off = offsets.for_event(&ev.kind, ev.dur_us);
        if off != 0.0 {
            for &q in &ev.qubits {
                physical[q] += off;
                ledger[q] += off;
            }
        }
    }
    out
}

/// Apply the phase-tracking protocol: each qubit's frame accumulates
/// the configured offset per executed event, and every RXY phase is
/// adjusted by the tracked frame so the logical unitary is independent
/// of the offsets. With zero offsets the schedule is unchanged.
pub fn track_phases(s: &TransportSchedule, offsets: &StarkOffsets) -> TransportSchedule {
    rewrite_phases(s, offsets, true)
}

/// Model the same Stark drift with tracking disabled: pulses fire at
/// their nominal phases while the qubit frames drift away, so the
/// logical action changes. Useful as the control arm when checking
/// that tracking matters.
pub fn apply_stark_drift(s: &TransportSchedule, offsets: &StarkOffsets) -> TransportSchedule {
    rewrite_phases(s, offsets, false)
}

// ---------------------------------------------------------------------------
// JSON export
// ---------------------------------------------------------------------------

fn operands_json(kind: &EventKind, layout: &TrapLayout) -> Value {
    match kind {
        EventKind::Transport { op } => {
            serde_json::to_value(op).expect("transport ops serialize")
        }
        EventKind::Cooling { stage, site } => json!({
            "stage": stage,
            "site": layout.site_name(*site),
        }),
        EventKind::SqGate { gate } | EventKind::TqGate { gate } => json!({
            "gate": gate_to_json(gate),
        }),
        EventKind::Measure { q, key, terminal } => json!({
            "q": q,
            "key": key,
            "terminal": terminal,
        }),
        EventKind::Init { q } => json!({ "q": q }),
    }
}

/// Export a schedule as a JSON event list for Gantt-style plotting.
/// Every event carries `start_us`, `dur_us`, `kind`, the zone name,
/// the qubits involved, and kind-specific operands. Serialization is
/// deterministic (keys sort), so identical schedules export
/// byte-identically.
pub fn schedule_to_json(s: &TransportSchedule, layout: &TrapLayout) -> String {
    let events: Vec<Value> = s
        .events
        .iter()
        .map(|e| {
            json!({
                "start_us": e.start_us,
                "dur_us": e.dur_us,
                "kind": kind_name(&e.kind),
                "zone": layout.zones[e.zone].name,
                "qubits": e.qubits,
                "operands": operands_json(&e.kind, layout),
            })
        })
        .collect();
    let root = json!({
        "mode": match s.mode { MachineMode::N4 => "n4", MachineMode::N6 => "n6" },
        "n_qubits": s.n_qubits,
        "qubit_to_ion": s.qubit_to_ion,
        "final_permutation": s.final_permutation,
        "events": events,
    });
    serde_json::to_string_pretty(&root).expect("JSON serialization cannot fail")
}
