//! Gate-level circuit IR with JSON (de)serialization and validation.
//!
//! The op set mirrors what the machine natively runs — software `RZ`,
//! equatorial rotations `RXY`, the fixed entangler `ZZ`, measurement,
//! reset, and classically conditioned gates — plus opaque `U2`/`U4`
//! unitary boxes that the synthesis pass lowers to native gates.
//!
//! The JSON format is strict: unknown fields are rejected (catching typos
//! like `"thetaa"` early), angles are radians, and matrices are row-major
//! lists of `[re, im]` pairs.

use crate::math::{is_unitary, CMat, C64};
use crate::{Error, Result};
use serde_json::{json, Map, Value};
use std::collections::BTreeMap;

/// Maximum qubit count accepted by the IR (the exact simulator enforces a
/// tighter limit of its own).
pub const MAX_QUBITS: usize = 16;

/// One circuit operation.
#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    /// Software Z rotation by `theta` (phase-frame update; zero duration).
    Rz { q: usize, theta: f64 },
    /// Rotation by `theta` about the equatorial axis at angle `phi`.
    Rxy { q: usize, theta: f64, phi: f64 },
    /// The native entangler `exp(-i pi/4 Z (x) Z)` on `(q, q2)`.
    Zz { q: usize, q2: usize },
    /// Z-basis measurement of `q`, recorded under `key`.
    Measure { q: usize, key: String },
    /// Reset `q` to |0>.
    Reset { q: usize },
    /// Opaque single-qubit unitary (lowered by synthesis).
    U2 { q: usize, matrix: CMat },
    /// Opaque two-qubit unitary on `(q, q2)` (lowered by synthesis).
    U4 { q: usize, q2: usize, matrix: CMat },
    /// Apply `apply` iff the bit recorded under `on` equals `value`.
    Cond { on: String, value: u8, apply: Box<Gate> },
}

impl Gate {
    /// Qubits touched by this op (conditioned ops report their target's).
    pub fn qubits(&self) -> Vec<usize> {
        match self {
            Gate::Rz { q, .. }
            | Gate::Rxy { q, .. }
            | Gate::Measure { q, .. }
            | Gate::Reset { q }
            | Gate::U2 { q, .. } => vec![*q],
            Gate::Zz { q, q2 } | Gate::U4 { q, q2, .. } => vec![*q, *q2],
            Gate::Cond { apply, .. } => apply.qubits(),
        }
    }

    /// `true` for ops in the machine-native set: `RZ`, `RXY` with
    /// `theta` in {pi/2, pi}, `ZZ`, `MEASURE`, `RESET`, and conditioned
    /// native unitaries.
    pub fn is_native(&self) -> bool {
        match self {
            Gate::Rz { .. } | Gate::Zz { .. } | Gate::Measure { .. } | Gate::Reset { .. } => true,
            Gate::Rxy { theta, .. } => {
                let t = theta.abs();
                (t - std::f64::consts::FRAC_PI_2).abs() < 1e-9
                    || (t - std::f64::consts::PI).abs() < 1e-9
            }
            Gate::U2 { .. } | Gate::U4 { .. } => false,
            Gate::Cond { apply, .. } => match apply.as_ref() {
                Gate::Rz { .. } | Gate::Rxy { .. } | Gate::Zz { .. } => apply.is_native(),
                _ => false,
            },
        }
    }
}

/// A gate-level circuit: a qubit count, an ordered op list, and free-form
/// string metadata.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Circuit {
    pub n_qubits: usize,
    pub ops: Vec<Gate>,
    pub metadata: BTreeMap<String, String>,
}

impl Circuit {
    /// Empty circuit on `n_qubits`.
    pub fn new(n_qubits: usize) -> Self {
        Circuit {
            n_qubits,
            ops: Vec::new(),
            metadata: BTreeMap::new(),
        }
    }

    /// Append a software Z rotation.
    pub fn rz(&mut self, q: usize, theta: f64) -> &mut Self {
        self.ops.push(Gate::Rz { q, theta });
        self
    }

    /// Append an equatorial rotation.
    pub fn rxy(&mut self, q: usize, theta: f64, phi: f64) -> &mut Self {
        self.ops.push(Gate::Rxy { q, theta, phi });
        self
    }

    /// Append the native entangler on `(q, q2)`.
    pub fn zz(&mut self, q: usize, q2: usize) -> &mut Self {
        self.ops.push(Gate::Zz { q, q2 });
        self
    }

    /// Append a Z-basis measurement recorded under `key`.
    pub fn measure(&mut self, q: usize, key: &str) -> &mut Self {
        self.ops.push(Gate::Measure { q, key: key.to_string() });
        self
    }

    /// Append a reset to |0>.
    pub fn reset(&mut self, q: usize) -> &mut Self {
        self.ops.push(Gate::Reset { q });
        self
    }

    /// Append an opaque single-qubit unitary.
    pub fn u2(&mut self, q: usize, matrix: CMat) -> &mut Self {
        self.ops.push(Gate::U2 { q, matrix });
        self
    }

    /// Append an opaque two-qubit unitary.
    pub fn u4(&mut self, q: usize, q2: usize, matrix: CMat) -> &mut Self {
        self.ops.push(Gate::U4 { q, q2, matrix });
        self
    }

    /// Append a conditioned gate.
    pub fn cond(&mut self, on: &str, value: u8, apply: Gate) -> &mut Self {
        self.ops.push(Gate::Cond {
            on: on.to_string(),
            value,
            apply: Box::new(apply),
        });
        self
    }

    /// Number of `ZZ` ops (conditioned ones included).
    pub fn zz_count(&self) -> usize {
        self.ops
            .iter()
            .map(|op| match op {
                Gate::Zz { .. } => 1,
                Gate::Cond { apply, .. } => usize::from(matches!(apply.as_ref(), Gate::Zz { .. })),
                _ => 0,
            })
            .sum()
    }

    /// Measurement keys in op order.
    pub fn measure_keys(&self) -> Vec<String> {
        self.ops
            .iter()
            .filter_map(|op| match op {
                Gate::Measure { key, .. } => Some(key.clone()),
                _ => None,
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// JSON parsing
// ---------------------------------------------------------------------------

fn as_object<'v>(v: &'v Value, what: &str) -> Result<&'v Map<String, Value>> {
    v.as_object()
        .ok_or_else(|| Error::Parse(format!("{what}: expected a JSON object")))
}

fn check_fields(obj: &Map<String, Value>, allowed: &[&str], ctx: &str) -> Result<()> {
    for key in obj.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(Error::Parse(format!("{ctx}: unknown field '{key}'")));
        }
    }
    Ok(())
}

fn get_usize(obj: &Map<String, Value>, field: &str, ctx: &str) -> Result<usize> {
    let v = obj
        .get(field)
        .ok_or_else(|| Error::Parse(format!("{ctx}: missing field '{field}'")))?;
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| Error::Parse(format!("{ctx}: field '{field}' must be a non-negative integer")))
}

fn get_f64(obj: &Map<String, Value>, field: &str, ctx: &str) -> Result<f64> {
    let v = obj
        .get(field)
        .ok_or_else(|| Error::Parse(format!("{ctx}: missing field '{field}'")))?;
    let x = v
        .as_f64()
        .ok_or_else(|| Error::Parse(format!("{ctx}: field '{field}' must be a number")))?;
    if !x.is_finite() {
        return Err(Error::Parse(format!("{ctx}: field '{field}' must be finite")));
    }
    Ok(x)
}

fn get_str<'o>(obj: &'o Map<String, Value>, field: &str, ctx: &str) -> Result<&'o str> {
    obj.get(field)
        .ok_or_else(|| Error::Parse(format!("{ctx}: missing field '{field}'")))?
        .as_str()
        .ok_or_else(|| Error::Parse(format!("{ctx}: field '{field}' must be a string")))
}

fn parse_matrix(obj: &Map<String, Value>, dim: usize, ctx: &str) -> Result<CMat> {
    let v = obj
        .get("matrix")
        .ok_or_else(|| Error::Parse(format!("{ctx}: missing field 'matrix'")))?;
    let rows = v
        .as_array()
        .ok_or_else(|| Error::Parse(format!("{ctx}: 'matrix' must be an array")))?;
    let want = dim * dim;
    if rows.len() != want {
        return Err(Error::Parse(format!(
            "{ctx}: 'matrix' must have {want} [re, im] entries (row-major), got {}",
            rows.len()
        )));
    }
    let mut flat = Vec::with_capacity(want);
    for (k, entry) in rows.iter().enumerate() {
        let pair = entry
            .as_array()
            .ok_or_else(|| Error::Parse(format!("{ctx}: matrix entry {k} must be [re, im]")))?;
        if pair.len() != 2 {
            return Err(Error::Parse(format!("{ctx}: matrix entry {k} must be [re, im]")));
        }
        let re = pair[0]
            .as_f64()
            .ok_or_else(|| Error::Parse(format!("{ctx}: matrix entry {k}: re must be a number")))?;
        let im = pair[1]
            .as_f64()
            .ok_or_else(|| Error::Parse(format!("{ctx}: matrix entry {k}: im must be a number")))?;
        if !re.is_finite() || !im.is_finite() {
            return Err(Error::Parse(format!("{ctx}: matrix entry {k} must be finite")));
        }
        flat.push(C64::new(re, im));
    }
    CMat::from_shape_vec((dim, dim), flat)
        .map_err(|e| Error::Parse(format!("{ctx}: matrix shape error: {e}")))
}

fn parse_gate(v: &Value, ctx: &str) -> Result<Gate> {
    let obj = as_object(v, ctx)?;
    let gate = get_str(obj, "gate", ctx)?;
    match gate {
        "rz" => {
            check_fields(obj, &["gate", "q", "theta"], ctx)?;
            Ok(Gate::Rz {
                q: get_usize(obj, "q", ctx)?,
                theta: get_f64(obj, "theta", ctx)?,
            })
        }
        "rxy" => {
            check_fields(obj, &["gate", "q", "theta", "phi"], ctx)?;
            Ok(Gate::Rxy {
                q: get_usize(obj, "q", ctx)?,
                theta: get_f64(obj, "theta", ctx)?,
                phi: get_f64(obj, "phi", ctx)?,
            })
        }
        "zz" => {
            check_fields(obj, &["gate", "q", "q2"], ctx)?;
            Ok(Gate::Zz {
                q: get_usize(obj, "q", ctx)?,
                q2: get_usize(obj, "q2", ctx)?,
            })
        }
        "measure" => {
            check_fields(obj, &["gate", "q", "key"], ctx)?;
            Ok(Gate::Measure {
                q: get_usize(obj, "q", ctx)?,
                key: get_str(obj, "key", ctx)?.to_string(),
            })
        }
        "reset" => {
            check_fields(obj, &["gate", "q"], ctx)?;
            Ok(Gate::Reset { q: get_usize(obj, "q", ctx)? })
        }
        "u2" => {
            check_fields(obj, &["gate", "q", "matrix"], ctx)?;
            Ok(Gate::U2 {
                q: get_usize(obj, "q", ctx)?,
                matrix: parse_matrix(obj, 2, ctx)?,
            })
        }
        "u4" => {
            check_fields(obj, &["gate", "q", "q2", "matrix"], ctx)?;
            Ok(Gate::U4 {
                q: get_usize(obj, "q", ctx)?,
                q2: get_usize(obj, "q2", ctx)?,
                matrix: parse_matrix(obj, 4, ctx)?,
            })
        }
        "cond" => {
            check_fields(obj, &["gate", "on", "value", "apply"], ctx)?;
            let value = get_usize(obj, "value", ctx)?;
            if value > 1 {
                return Err(Error::Parse(format!("{ctx}: 'value' must be 0 or 1")));
            }
            let apply_v = obj
                .get("apply")
                .ok_or_else(|| Error::Parse(format!("{ctx}: missing field 'apply'")))?;
            let inner = parse_gate(apply_v, &format!("{ctx}.apply"))?;
            Ok(Gate::Cond {
                on: get_str(obj, "on", ctx)?.to_string(),
                value: value as u8,
                apply: Box::new(inner),
            })
        }
        other => Err(Error::Parse(format!("{ctx}: unknown gate '{other}'"))),
    }
}

/// Parse a circuit from its JSON text. Rejects unknown fields and reports
/// the op index of the first problem.
pub fn parse_circuit(text: &str) -> Result<Circuit> {
    let v: Value =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("invalid JSON: {e}")))?;
    let obj = as_object(&v, "circuit")?;
    check_fields(obj, &["n_qubits", "ops", "metadata"], "circuit")?;
    let n_qubits = get_usize(obj, "n_qubits", "circuit")?;
    let ops_v = obj
        .get("ops")
        .ok_or_else(|| Error::Parse("circuit: missing field 'ops'".into()))?
        .as_array()
        .ok_or_else(|| Error::Parse("circuit: 'ops' must be an array".into()))?;
    let mut ops = Vec::with_capacity(ops_v.len());
    for (i, op_v) in ops_v.iter().enumerate() {
        ops.push(parse_gate(op_v, &format!("ops[{i}]"))?);
    }
    let mut metadata = BTreeMap::new();
    if let Some(meta_v) = obj.get("metadata") {
        let meta = as_object(meta_v, "circuit.metadata")?;
        for (k, val) in meta {
            let s = val.as_str().ok_or_else(|| {
                Error::Parse(format!("circuit.metadata['{k}'] must be a string"))
            })?;
            metadata.insert(k.clone(), s.to_string());
        }
    }
    Ok(Circuit { n_qubits, ops, metadata })
}

// ---------------------------------------------------------------------------
// JSON serialization
// ---------------------------------------------------------------------------

fn matrix_to_json(m: &CMat) -> Value {
    Value::Array(
        m.iter()
            .map(|x| json!([x.re, x.im]))
            .collect::<Vec<Value>>(),
    )
}

pub(crate) fn gate_to_json(g: &Gate) -> Value {
    match g {
        Gate::Rz { q, theta } => json!({"gate": "rz", "q": q, "theta": theta}),
        Gate::Rxy { q, theta, phi } => {
            json!({"gate": "rxy", "q": q, "theta": theta, "phi": phi})
        }
        Gate::Zz { q, q2 } => json!({"gate": "zz", "q": q, "q2": q2}),
        Gate::Measure { q, key } => json!({"gate": "measure", "q": q, "key": key}),
        Gate::Reset { q } => json!({"gate": "reset", "q": q}),
        Gate::U2 { q, matrix } => json!({"gate": "u2", "q": q, "matrix": matrix_to_json(matrix)}),
        Gate::U4 { q, q2, matrix } => {
            json!({"gate": "u4", "q": q, "q2": q2, "matrix": matrix_to_json(matrix)})
        }
        Gate::Cond { on, value, apply } => {
            json!({"gate": "cond", "on": on, "value": value, "apply": gate_to_json(apply)})
        }
    }
}

/// Serialize a circuit to JSON text (round-trips through [`parse_circuit`]).
pub fn serialize_circuit(c: &Circuit) -> String {
    let mut root = Map::new();
    root.insert("n_qubits".into(), json!(c.n_qubits));
    root.insert(
        "ops".into(),
        Value::Array(c.ops.iter().map(gate_to_json).collect()),
    );
    if !c.metadata.is_empty() {
        root.insert(
            "metadata".into(),
            Value::Object(c.metadata.iter().map(|(k, v)| (k.clone(), json!(v))).collect()),
        );
    }
    serde_json::to_string_pretty(&Value::Object(root)).expect("JSON serialization cannot fail")
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// Tolerance for unitarity of opaque `U2`/`U4` boxes.
pub const UNITARITY_TOL: f64 = 1e-9;

fn validate_gate(
    g: &Gate,
    n: usize,
    seen_keys: &mut Vec<String>,
    idx: usize,
    inside_cond: bool,
) -> Result<()> {
    let ctx = format!("ops[{idx}]");
    let check_q = |q: usize| -> Result<()> {
        if q >= n {
            Err(Error::Validate(format!(
                "{ctx}: qubit {q} out of range for n_qubits={n}"
            )))
        } else {
            Ok(())
        }
    };
    match g {
        Gate::Rz { q, theta } => {
            check_q(*q)?;
            if !theta.is_finite() {
                return Err(Error::Validate(format!("{ctx}: non-finite angle")));
            }
        }
        Gate::Rxy { q, theta, phi } => {
            check_q(*q)?;
            if !theta.is_finite() || !phi.is_finite() {
                return Err(Error::Validate(format!("{ctx}: non-finite angle")));
            }
        }
        Gate::Zz { q, q2 } => {
            check_q(*q)?;
            check_q(*q2)?;
            if q == q2 {
                return Err(Error::Validate(format!("{ctx}: zz requires distinct qubits")));
            }
        }
        Gate::Measure { q, key } => {
            check_q(*q)?;
            if inside_cond {
                return Err(Error::Validate(format!(
                    "{ctx}: measure cannot be conditioned"
                )));
            }
            if key.is_empty() {
                return Err(Error::Validate(format!("{ctx}: empty measurement key")));
            }
            if seen_keys.iter().any(|k| k == key) {
                return Err(Error::Validate(format!(
                    "{ctx}: duplicate measurement key '{key}'"
                )));
            }
            seen_keys.push(key.clone());
        }
        Gate::Reset { q } => {
            check_q(*q)?;
            if inside_cond {
                return Err(Error::Validate(format!("{ctx}: reset cannot be conditioned")));
            }
        }
        Gate::U2 { q, matrix } => {
            check_q(*q)?;
            if !is_unitary(matrix, UNITARITY_TOL) {
                return Err(Error::Validate(format!("{ctx}: u2 matrix is not unitary")));
            }
        }
        Gate::U4 { q, q2, matrix } => {
            check_q(*q)?;
            check_q(*q2)?;
            if q == q2 {
                return Err(Error::Validate(format!("{ctx}: u4 requires distinct qubits")));
            }
            if !is_unitary(matrix, UNITARITY_TOL) {
                return Err(Error::Validate(format!("{ctx}: u4 matrix is not unitary")));
            }
        }
        Gate::Cond { on, apply, .. } => {
            if inside_cond {
                return Err(Error::Validate(format!("{ctx}: nested cond is not allowed")));
            }
            if !seen_keys.iter().any(|k| k == on) {
                return Err(Error::Validate(format!(
                    "{ctx}: cond references undefined key '{on}'"
                )));
            }
            validate_gate(apply, n, seen_keys, idx, true)?;
        }
    }
    Ok(())
}

/// Validate a circuit: qubit indices in range, distinct pair operands,
/// unitary opaque boxes, unique measurement keys, conditions referencing
/// previously recorded keys, and conditioned ops restricted to unitaries.
pub fn validate_circuit(c: &Circuit) -> Result<()> {
    if c.n_qubits == 0 {
        return Err(Error::Validate("circuit must have at least one qubit".into()));
    }
    if c.n_qubits > MAX_QUBITS {
        return Err(Error::Validate(format!(
            "n_qubits={} exceeds the supported maximum {MAX_QUBITS}",
            c.n_qubits
        )));
    }
    let mut seen_keys = Vec::new();
    for (idx, g) in c.ops.iter().enumerate() {
        validate_gate(g, c.n_qubits, &mut seen_keys, idx, false)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{c, eye, rxy};
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn bell_pair() -> Circuit {
        let mut c = Circuit::new(2);
        c.rxy(0, FRAC_PI_2, 0.0)
            .zz(0, 1)
            .rxy(1, FRAC_PI_2, FRAC_PI_2)
            .measure(0, "m0")
            .measure(1, "m1");
        c
    }

    #[test]
    fn parse_minimal_circuit() {
        let c = parse_circuit(r#"{"n_qubits": 1, "ops": []}"#).unwrap();
        assert_eq!(c.n_qubits, 1);
        assert!(c.ops.is_empty());
    }

    #[test]
    fn parse_gates_and_angles() {
        let text = r#"{
            "n_qubits": 2,
            "ops": [
                {"gate": "rxy", "q": 0, "theta": 1.5707963267948966, "phi": 0.0},
                {"gate": "zz", "q": 0, "q2": 1},
                {"gate": "measure", "q": 0, "key": "m0"},
                {"gate": "cond", "on": "m0", "value": 1,
                 "apply": {"gate": "rxy", "q": 1, "theta": 3.141592653589793, "phi": 0.0}}
            ]
        }"#;
        let c = parse_circuit(text).unwrap();
        assert_eq!(c.ops.len(), 4);
        validate_circuit(&c).unwrap();
    }

    #[test]
    fn unknown_field_is_rejected_with_op_index() {
        let text = r#"{"n_qubits": 1, "ops": [{"gate": "rz", "q": 0, "thetaa": 1.0}]}"#;
        let err = parse_circuit(text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("ops[0]"), "{msg}");
        assert!(msg.contains("thetaa"), "{msg}");
    }

    #[test]
    fn unknown_top_level_field_is_rejected() {
        let err = parse_circuit(r#"{"n_qubits": 1, "ops": [], "opss": []}"#).unwrap_err();
        assert!(err.to_string().contains("opss"));
    }

    #[test]
    fn unknown_gate_name_is_rejected() {
        let err =
            parse_circuit(r#"{"n_qubits": 1, "ops": [{"gate": "cnot", "q": 0}]}"#).unwrap_err();
        assert!(err.to_string().contains("cnot"));
    }

    #[test]
    fn cond_undefined_key_fails_validation() {
        let mut c = Circuit::new(2);
        c.cond("never", 1, Gate::Rxy { q: 0, theta: PI, phi: 0.0 });
        let err = validate_circuit(&c).unwrap_err();
        assert!(err.to_string().contains("undefined key"));
    }

    #[test]
    fn qubit_out_of_range_fails_validation() {
        let mut c = Circuit::new(2);
        c.zz(0, 2);
        assert!(validate_circuit(&c).is_err());
    }

    #[test]
    fn non_unitary_matrix_fails_validation() {
        let mut m = eye(2);
        m[(0, 0)] = c(2.0);
        let mut circ = Circuit::new(1);
        circ.u2(0, m);
        let err = validate_circuit(&circ).unwrap_err();
        assert!(err.to_string().contains("not unitary"));
    }

    #[test]
    fn duplicate_measure_key_fails_validation() {
        let mut c = Circuit::new(1);
        c.measure(0, "m").reset(0).measure(0, "m");
        assert!(validate_circuit(&c).is_err());
    }

    #[test]
    fn bell_circuit_validates_and_round_trips() {
        let c = bell_pair();
        validate_circuit(&c).unwrap();
        let text = serialize_circuit(&c);
        let back = parse_circuit(&text).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn matrix_round_trip_is_exact() {
        let mut c = Circuit::new(2);
        c.u2(0, rxy(0.123456789, -2.59731));
        c.u4(0, 1, crate::math::u_zz());
        let back = parse_circuit(&serialize_circuit(&c)).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn native_predicate() {
        assert!(Gate::Rxy { q: 0, theta: FRAC_PI_2, phi: 0.3 }.is_native());
        assert!(Gate::Rxy { q: 0, theta: PI, phi: 0.3 }.is_native());
        assert!(!Gate::Rxy { q: 0, theta: 0.7, phi: 0.3 }.is_native());
        assert!(!Gate::U2 { q: 0, matrix: eye(2) }.is_native());
        assert!(Gate::Zz { q: 0, q2: 1 }.is_native());
    }

    proptest! {
        #[test]
        fn random_native_circuits_round_trip(
            n in 1usize..5,
            seed in 0u64..500,
        ) {
            use rand::prelude::*;
            let mut rng = crate::rng::rng_for(seed, "roundtrip", 0);
            let mut c = Circuit::new(n);
            let n_ops = rng.random_range(0..20);
            for i in 0..n_ops {
                let q = rng.random_range(0..n);
                match rng.random_range(0..5) {
                    0 => { c.rz(q, rng.random::<f64>() * 7.0 - 3.5); }
                    1 => { c.rxy(q, FRAC_PI_2, rng.random::<f64>() * 7.0); }
                    2 if n > 1 => {
                        let mut q2 = rng.random_range(0..n);
                        while q2 == q { q2 = rng.random_range(0..n); }
                        c.zz(q, q2);
                    }
                    3 => { c.measure(q, &format!("k{i}")); }
                    _ => { c.reset(q); }
                }
            }
            c.metadata.insert("purpose".into(), "round-trip".into());
            let back = parse_circuit(&serialize_circuit(&c)).unwrap();
            prop_assert_eq!(c, back);
        }
    }
}
