use std::collections::BTreeMap;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::matrix::{CMatrix, Tolerance, C64};

/// Named unitaries available to `x *= G(...)`.
#[derive(Debug, Clone)]
pub struct GateTable {
    gates: BTreeMap<String, CMatrix>,
}

#[derive(Deserialize)]
struct GateSpec {
    name: String,
    matrix: CMatrix,
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn phase(z: C64) -> CMatrix {
    CMatrix::from_fn(2, 2, |i, j| match (i, j) {
        (0, 0) => c(1.0, 0.0),
        (1, 1) => z,
        _ => c(0.0, 0.0),
    })
}

fn real(rows: &[&[f64]]) -> CMatrix {
    let n = rows.len();
    CMatrix::from_fn(n, n, |i, j| c(rows[i][j], 0.0))
}

impl Default for GateTable {
    fn default() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut t = GateTable {
            gates: BTreeMap::new(),
        };
        let mut put = |name: &str, m: CMatrix| {
            t.gates.insert(name.to_string(), m);
        };
        put("X", real(&[&[0.0, 1.0], &[1.0, 0.0]]));
        put(
            "Y",
            CMatrix::from_fn(2, 2, |i, j| match (i, j) {
                (0, 1) => c(0.0, -1.0),
                (1, 0) => c(0.0, 1.0),
                _ => c(0.0, 0.0),
            }),
        );
        put("Z", real(&[&[1.0, 0.0], &[0.0, -1.0]]));
        put("H", real(&[&[h, h], &[h, -h]]));
        put("S", phase(c(0.0, 1.0)));
        put("T", phase(c(h, h)));
        put(
            "CNOT",
            real(&[
                &[1.0, 0.0, 0.0, 0.0],
                &[0.0, 1.0, 0.0, 0.0],
                &[0.0, 0.0, 0.0, 1.0],
                &[0.0, 0.0, 1.0, 0.0],
            ]),
        );
        put(
            "SWAP",
            real(&[
                &[1.0, 0.0, 0.0, 0.0],
                &[0.0, 0.0, 1.0, 0.0],
                &[0.0, 1.0, 0.0, 0.0],
                &[0.0, 0.0, 0.0, 1.0],
            ]),
        );
        put("CZ", CMatrix::diag(&[1.0, 1.0, 1.0, -1.0]));
        t
    }
}

impl GateTable {
    pub fn get(&self, name: &str) -> Option<&CMatrix> {
        self.gates.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.gates.keys().map(String::as_str)
    }

    /// Number of qbits a gate acts on.
    pub fn arity(&self, name: &str) -> Option<usize> {
        self.get(name).map(|m| m.rows().trailing_zeros() as usize)
    }

    /// Adds or replaces a gate after checking it is a `2^k × 2^k` unitary.
    pub fn register(&mut self, name: &str, m: CMatrix, tol: &Tolerance) -> Result<()> {
        let n = m.rows();
        if n != m.cols() {
            return Err(Error::NotSquare {
                rows: n,
                cols: m.cols(),
            });
        }
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::Invalid(format!("gate `{name}` has dimension {n}, not a power of two")));
        }
        let residual = (&(&m.adjoint() * &m) - &CMatrix::identity(n)).max_abs();
        if residual > tol.eps_eq {
            return Err(Error::NotUnitary { residual });
        }
        self.gates.insert(name.to_string(), m);
        Ok(())
    }

    /// Registers gates from a JSON list of `{"name": .., "matrix": [[[re, im], ..], ..]}`.
    pub fn register_json(&mut self, json: &str, tol: &Tolerance) -> Result<Vec<String>> {
        let specs: Vec<GateSpec> =
            serde_json::from_str(json).map_err(|e| Error::Invalid(format!("gate file: {e}")))?;
        let mut names = Vec::new();
        for g in specs {
            self.register(&g.name, g.matrix, tol)?;
            names.push(g.name);
        }
        Ok(names)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_are_unitary() {
        let t = GateTable::default();
        let tol = Tolerance::uniform(1e-12);
        let mut again = GateTable::default();
        for name in t.names() {
            again.register(name, t.get(name).unwrap().clone(), &tol).unwrap();
        }
        assert_eq!(t.arity("H"), Some(1));
        assert_eq!(t.arity("CNOT"), Some(2));
        assert_eq!(t.names().count(), 9);
    }

    #[test]
    fn registration_validates() {
        let tol = Tolerance::default();
        let mut t = GateTable::default();
        let names = t
            .register_json(r#"[{"name": "NOT", "matrix": [[[0,0],[1,0]],[[1,0],[0,0]]]}]"#, &tol)
            .unwrap();
        assert_eq!(names, ["NOT"]);
        assert_eq!(t.get("NOT"), t.get("X"));
        let bad = r#"[{"name": "B", "matrix": [[[1,0],[1,0]],[[0,0],[1,0]]]}]"#;
        assert!(matches!(t.register_json(bad, &tol), Err(Error::NotUnitary { .. })));
        assert!(t.register("I3", CMatrix::identity(3), &tol).is_err());
        assert!(t.register_json("not json", &tol).is_err());
    }
}
