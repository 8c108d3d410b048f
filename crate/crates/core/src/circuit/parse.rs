//! Text and JSON circuit readers.
//!
//! Text format, one gate per line:
//!
//! ```text
//! # comment
//! qubits 2
//! u3 q0 1.5707963267948966,0,3.141592653589793
//! rz q1 pi/2
//! ecr q0 q1
//! measure q0
//! ```
//!
//! The optional `qubits N` line fixes the register width; otherwise it is
//! one past the highest qubit used. Angles are radians; `pi`, `-pi/2`, `3*pi/4` style literals are accepted.

use std::f64::consts::PI;

use super::{validate, Circuit, CircuitError, GateKind, GateRecord};

/// Parses either form; input whose first non-blank character is `{` or `[` is
/// read as JSON.
pub fn parse_circuit(text: &str) -> Result<Circuit, CircuitError> {
    match text.trim_start().chars().next() {
        Some('{') | Some('[') => parse_circuit_json(text),
        _ => parse_circuit_text(text),
    }
}

pub fn parse_circuit_text(text: &str) -> Result<Circuit, CircuitError> {
    let mut parsed: Vec<(usize, GateKind, Vec<usize>, Vec<f64>)> = Vec::new();
    let mut declared: Option<usize> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let kind_tok = tokens.next().expect("non-empty line");
        if kind_tok == "qubits" {
            let n = tokens.next().and_then(|t| t.parse::<usize>().ok());
            match (n, tokens.next(), declared) {
                (Some(n), None, None) => declared = Some(n),
                (_, _, Some(_)) => {
                    return Err(CircuitError::Syntax {
                        line: line_no,
                        message: "width declared twice".into(),
                    })
                }
                _ => {
                    return Err(CircuitError::Syntax {
                        line: line_no,
                        message: "expected `qubits N`".into(),
                    })
                }
            }
            continue;
        }
        let kind = GateKind::from_name(kind_tok).ok_or_else(|| CircuitError::UnknownGate {
            line: line_no,
            kind: kind_tok.to_string(),
        })?;

        let mut qubits = Vec::new();
        let mut angle_text = String::new();
        for tok in tokens {
            if angle_text.is_empty() {
                if let Some(q) = qubit_token(tok, line_no)? {
                    qubits.push(q);
                    continue;
                }
            }
            angle_text.push_str(tok);
        }
        let angles = if angle_text.is_empty() {
            Vec::new()
        } else {
            angle_text
                .split(',')
                .map(|a| {
                    parse_angle(a).ok_or_else(|| CircuitError::Syntax {
                        line: line_no,
                        message: format!("cannot parse angle `{a}`"),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?
        };
        if qubits.is_empty() {
            return Err(CircuitError::Syntax {
                line: line_no,
                message: format!("{kind} has no qubit operands"),
            });
        }
        parsed.push((line_no, kind, qubits, angles));
    }

    let used = parsed
        .iter()
        .flat_map(|(_, _, qs, _)| qs.iter())
        .map(|q| q + 1)
        .max()
        .unwrap_or(0);
    let mut circuit = Circuit::new(declared.unwrap_or(used));
    for (line, kind, qubits, angles) in parsed {
        circuit.push(kind, &qubits, &angles).map_err(|e| match e {
            CircuitError::InvalidGate(message) => CircuitError::Syntax { line, message },
            other => other,
        })?;
    }
    Ok(circuit)
}

fn qubit_token(tok: &str, line: usize) -> Result<Option<usize>, CircuitError> {
    let Some(rest) = tok.strip_prefix('q').or_else(|| tok.strip_prefix('Q')) else {
        return Ok(None);
    };
    let rest = rest.trim_end_matches(',');
    match rest.parse::<i64>() {
        Ok(i) if i < 0 => Err(CircuitError::NegativeQubit { line, index: i }),
        Ok(i) => Ok(Some(i as usize)),
        Err(_) => Err(CircuitError::Syntax {
            line,
            message: format!("bad qubit operand `{tok}`"),
        }),
    }
}

/// Accepts a float literal or `[-][k*]pi[/m]`.
fn parse_angle(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Ok(v) = s.parse::<f64>() {
        return Some(v);
    }
    let (sign, body) = match s.strip_prefix('-') {
        Some(b) => (-1.0, b),
        None => (1.0, s.strip_prefix('+').unwrap_or(s)),
    };
    let (num, den) = match body.split_once('/') {
        Some((n, d)) => (n, d.trim().parse::<f64>().ok()?),
        None => (body, 1.0),
    };
    let factor = match num.trim().split_once('*') {
        Some((k, p)) if p.trim() == "pi" => k.trim().parse::<f64>().ok()?,
        None if num.trim() == "pi" => 1.0,
        _ => return None,
    };
    Some(sign * factor * PI / den)
}

#[derive(serde::Deserialize)]
#[serde(untagged)]
enum JsonCircuit {
    Full {
        width: Option<usize>,
        gates: Vec<GateRecord>,
    },
    Bare(Vec<GateRecord>),
}

pub fn parse_circuit_json(text: &str) -> Result<Circuit, CircuitError> {
    let (width, records) = match serde_json::from_str::<JsonCircuit>(text)? {
        JsonCircuit::Full { width, gates } => (width, gates),
        JsonCircuit::Bare(gates) => (None, gates),
    };
    let inferred = records
        .iter()
        .flat_map(|r| r.qubits.iter())
        .map(|q| q + 1)
        .max()
        .unwrap_or(0);
    let width = width.unwrap_or(inferred).max(inferred);
    let mut circuit = Circuit::new(width);
    for (i, r) in records.into_iter().enumerate() {
        validate(r.kind, &r.qubits, &r.angles, width).map_err(|e| match e {
            CircuitError::InvalidGate(message) => CircuitError::Syntax {
                line: i + 1,
                message,
            },
            other => other,
        })?;
        circuit.push(r.kind, &r.qubits, &r.angles)?;
    }
    Ok(circuit)
}

impl std::str::FromStr for Circuit {
    type Err = CircuitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_circuit(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn two_line_program() {
        let c = parse_circuit("sx q0\necr q0 q1").unwrap();
        assert_eq!(c.width, 2);
        assert_eq!(c.len(), 2);
        assert_eq!(c.gates[1].kind, GateKind::Ecr);
        assert_eq!(c.gates[1].qubits, vec![0, 1]);
    }

    #[test]
    fn empty_program() {
        let c = parse_circuit("").unwrap();
        assert_eq!(c.width, 0);
        assert!(c.is_empty());
        let c = parse_circuit("# only a comment\n\n").unwrap();
        assert!(c.is_empty());
    }

    #[test]
    fn angles_and_comments() {
        let c = parse_circuit("u3 q2 pi/2, -pi/2, 3*pi/4 # trailing\nrz q0 0.25").unwrap();
        assert_eq!(c.width, 3);
        assert_eq!(c.gates[0].angles[0], FRAC_PI_2);
        assert_eq!(c.gates[0].angles[1], -FRAC_PI_2);
        assert!((c.gates[0].angles[2] - 0.75 * PI).abs() < 1e-15);
        assert_eq!(c.gates[1].angles, vec![0.25]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        match parse_circuit("sx q0\nfoo q1") {
            Err(CircuitError::UnknownGate { line: 2, kind }) => assert_eq!(kind, "foo"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_circuit("sx q-1"),
            Err(CircuitError::NegativeQubit { line: 1, index: -1 })
        ));
        assert!(matches!(
            parse_circuit("\n\nrz q0"),
            Err(CircuitError::Syntax { line: 3, .. })
        ));
        assert!(matches!(
            parse_circuit("rz q0 abc"),
            Err(CircuitError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            parse_circuit("ecr q0 q0"),
            Err(CircuitError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            parse_circuit("sx"),
            Err(CircuitError::Syntax { line: 1, .. })
        ));
    }

    #[test]
    fn json_forms() {
        let c = parse_circuit(
            r#"{"gates":[{"kind":"sx","qubits":[0]},{"kind":"rz","qubits":[1],"angles":[0.5]}]}"#,
        )
        .unwrap();
        assert_eq!(c.width, 2);
        assert_eq!(c.gates[1].angles, vec![0.5]);
        let bare = parse_circuit(r#"[{"kind":"ecr","qubits":[1,0]}]"#).unwrap();
        assert_eq!(bare.width, 2);
        let back = parse_circuit(&c.to_json().to_string()).unwrap();
        assert_eq!(back, c);
    }
}
