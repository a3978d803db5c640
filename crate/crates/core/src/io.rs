//! JSON instance files.
//!
//! Rationals are written as `"num/den"` strings. Matrices are lists of rows;
//! a decomposition part is an `n x d` matrix whose columns span the part.

use serde::{Deserialize, Serialize};

use crate::dp::{CostFunction, CostPolicy, DpInstance, Horizon, InstanceOptions, SizeGuard, VectorSpace};
use crate::error::{Error, Result};
use crate::field::PrimeField;
use crate::invariant::{primary_decomposition, verify_decomposition};
use crate::lqr::RealMatrix;
use crate::matrix::MatrixFp;
use crate::scalar::{format_rational, parse_rational, Rational};
use crate::subspace::{DirectSumDecomposition, Subspace};

pub const SCHEMA_VERSION: u32 = 1;

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

fn is_strict(p: &CostPolicy) -> bool {
    *p == CostPolicy::Strict
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub prime: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dims {
    pub n: usize,
    pub m: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostSpec {
    /// `p^n` values indexed by state.
    Table(Vec<String>),
    /// Per-part tables indexed by the coordinates with respect to the
    /// columns given for that part.
    Separable(Vec<Vec<String>>),
    /// `g(x) = Σ w_i [ρ_i x ≠ 0]`.
    Indicator(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HorizonSpec {
    Finite(usize),
    Discounted { alpha: String },
}

impl HorizonSpec {
    pub fn to_horizon(&self) -> Result<Horizon<Rational>> {
        match self {
            Self::Finite(t) => Horizon::finite(*t),
            Self::Discounted { alpha } => Horizon::discounted(
                parse_rational(alpha).map_err(|e| at("horizon.discounted.alpha", e))?,
            ),
        }
    }
}

/// On-disk form of a DP instance over GF(p).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    #[serde(default = "schema_version")]
    pub version: u32,
    pub field: FieldSpec,
    pub dims: Dims,
    #[serde(rename = "A")]
    pub a: Vec<Vec<i64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<i64>>,
    pub cost: CostSpec,
    #[serde(default, skip_serializing_if = "is_strict")]
    pub cost_policy: CostPolicy,
    pub horizon: HorizonSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decomposition: Option<Vec<Vec<Vec<i64>>>>,
}

/// Parsed instance together with its decomposition, when one is given or
/// needed by the cost.
#[derive(Debug, Clone)]
pub struct LoadedInstance {
    pub instance: DpInstance<Rational>,
    pub decomposition: Option<DirectSumDecomposition>,
}

impl LoadedInstance {
    /// The given decomposition, else the primary decomposition of `A`.
    pub fn decomposition_or_primary(&self) -> Result<DirectSumDecomposition> {
        match &self.decomposition {
            Some(d) => Ok(d.clone()),
            None => primary_decomposition(self.instance.a()),
        }
    }
}

fn at(path: &str, e: Error) -> Error {
    Error::InvalidInput(format!("{path}: {e}"))
}

fn invalid(path: &str, msg: impl std::fmt::Display) -> Error {
    Error::InvalidInput(format!("{path}: {msg}"))
}

fn check_shape(path: &str, rows: &[Vec<i64>], r: usize, c: usize) -> Result<()> {
    if rows.len() != r {
        return Err(invalid(path, format!("expected {r} rows, found {}", rows.len())));
    }
    if let Some(i) = rows.iter().position(|row| row.len() != c) {
        return Err(invalid(
            &format!("{path}[{i}]"),
            format!("expected {c} entries, found {}", rows[i].len()),
        ));
    }
    Ok(())
}

fn parse_list(path: &str, values: &[String]) -> Result<Vec<Rational>> {
    values
        .iter()
        .enumerate()
        .map(|(k, s)| parse_rational(s).map_err(|e| at(&format!("{path}[{k}]"), e)))
        .collect()
}

fn to_strings(values: &[Rational]) -> Vec<String> {
    values.iter().map(format_rational).collect()
}

fn matrix_rows(m: &MatrixFp) -> Vec<Vec<i64>> {
    m.to_rows()
        .into_iter()
        .map(|r| r.into_iter().map(i64::from).collect())
        .collect()
}

impl InstanceFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("instance file: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance files serialize")
    }

    /// Builds the instance. Matrix entries are reduced mod `p`; a given
    /// decomposition is checked for directness and invariance.
    pub fn load(&self, guard: SizeGuard) -> Result<LoadedInstance> {
        if self.version != SCHEMA_VERSION {
            return Err(invalid(
                "version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.version),
            ));
        }
        let field = PrimeField::new(self.field.prime).map_err(|e| at("field.prime", e))?;
        let (n, m) = (self.dims.n, self.dims.m);
        if n == 0 {
            return Err(invalid("dims.n", "state dimension must be positive"));
        }
        check_shape("A", &self.a, n, n)?;
        check_shape("B", &self.b, n, m)?;
        let a = MatrixFp::from_rows(field, &self.a).map_err(|e| at("A", e))?;
        let b = if m == 0 {
            MatrixFp::zeros(field, n, 0)
        } else {
            MatrixFp::from_rows(field, &self.b).map_err(|e| at("B", e))?
        };
        let horizon = self.horizon.to_horizon()?;

        let given = match &self.decomposition {
            None => None,
            Some(parts) => Some(self.load_parts(field, &a, parts)?),
        };
        let needs_parts = !matches!(self.cost, CostSpec::Table(_));
        let decomposition = match (given, needs_parts) {
            (Some((d, _)), _) => Some(d),
            (None, true) => Some(primary_decomposition(&a).map_err(|e| at("decomposition", e))?),
            (None, false) => None,
        };

        let policy = self.cost_policy;
        let cost = match &self.cost {
            CostSpec::Table(values) => {
                let want = VectorSpace::new(field, n).size();
                if values.len() != want {
                    return Err(invalid(
                        "cost.table",
                        format!("expected {want} entries, found {}", values.len()),
                    ));
                }
                CostFunction::with_policy(parse_list("cost.table", values)?, policy)
            }
            CostSpec::Indicator(weights) => {
                let d = decomposition.as_ref().expect("decomposition present");
                CostFunction::indicator(d, &parse_list("cost.indicator", weights)?, policy)
            }
            CostSpec::Separable(tables) => {
                let Some(raw_parts) = &self.decomposition else {
                    return Err(invalid("cost.separable", "a separable cost requires a decomposition"));
                };
                let d = decomposition.as_ref().expect("decomposition present");
                if tables.len() != d.len() {
                    return Err(invalid(
                        "cost.separable",
                        format!("{} part tables for {} parts", tables.len(), d.len()),
                    ));
                }
                let mut canonical = Vec::with_capacity(d.len());
                for (i, values) in tables.iter().enumerate() {
                    let path = format!("cost.separable[{i}]");
                    let values = parse_list(&path, values)?;
                    let space = VectorSpace::new(field, d.part_dim(i));
                    if values.len() != space.size() {
                        return Err(invalid(
                            &path,
                            format!("expected {} entries, found {}", space.size(), values.len()),
                        ));
                    }
                    let columns = MatrixFp::from_rows(field, &raw_parts[i]).expect("checked above");
                    let mut table = vec![Rational::default(); space.size()];
                    for (k, v) in values.into_iter().enumerate() {
                        let x = columns.mul_vec(&space.vector(k));
                        table[space.index(&d.coordinates(i, &x))] = v;
                    }
                    canonical.push(table);
                }
                CostFunction::separable(d, canonical, policy)
            }
        }
        .map_err(|e| at("cost", e))?;

        let options = InstanceOptions {
            guard,
            require_injective: true,
        };
        let instance = DpInstance::with_options(a, b, cost, horizon, options)?;
        Ok(LoadedInstance {
            instance,
            decomposition,
        })
    }

    fn load_parts(
        &self,
        field: PrimeField,
        a: &MatrixFp,
        parts: &[Vec<Vec<i64>>],
    ) -> Result<(DirectSumDecomposition, Vec<MatrixFp>)> {
        let n = self.dims.n;
        let mut mats = Vec::with_capacity(parts.len());
        let mut spaces = Vec::with_capacity(parts.len());
        for (i, rows) in parts.iter().enumerate() {
            let path = format!("decomposition[{i}]");
            let d = rows.first().map_or(0, Vec::len);
            check_shape(&path, rows, n, d)?;
            let m = MatrixFp::from_rows(field, rows).map_err(|e| at(&path, e))?;
            if m.rank() != d {
                return Err(invalid(&path, "basis columns are linearly dependent"));
            }
            spaces.push(Subspace::column_space(&m));
            mats.push(m);
        }
        let d = verify_decomposition(a, spaces).map_err(|e| at("decomposition", e))?;
        Ok((d, mats))
    }

    /// File for an instance; the cost is written per part when it carries
    /// part tables and a decomposition is given.
    pub fn from_instance(inst: &DpInstance<Rational>, decomposition: Option<&DirectSumDecomposition>) -> Self {
        let field = inst.field();
        let n = inst.state_dim();
        let parts = decomposition.map(|d| {
            d.parts()
                .iter()
                .map(|s| matrix_rows(s.basis()))
                .collect::<Vec<_>>()
        });
        let cost = match (inst.cost().separable_parts(), decomposition) {
            (Some(tables), Some(_)) => CostSpec::Separable(tables.iter().map(|t| to_strings(t)).collect()),
            _ => CostSpec::Table(to_strings(inst.cost().table())),
        };
        let horizon = match inst.horizon() {
            Horizon::Finite(t) => HorizonSpec::Finite(*t),
            Horizon::Discounted(alpha) => HorizonSpec::Discounted {
                alpha: format_rational(alpha),
            },
        };
        Self {
            version: SCHEMA_VERSION,
            field: FieldSpec {
                prime: u64::from(field.modulus()),
            },
            dims: Dims {
                n,
                m: inst.input_dim(),
            },
            a: matrix_rows(inst.a()),
            b: matrix_rows(inst.b()),
            cost,
            cost_policy: inst.cost().policy(),
            horizon,
            decomposition: parts,
        }
    }

    /// Canonical form: entries reduced mod `p`, rationals in lowest terms.
    pub fn normalized(&self) -> Result<Self> {
        let p = i64::try_from(self.field.prime).map_err(|_| invalid("field.prime", "too large"))?;
        let reduce = |rows: &[Vec<i64>]| -> Vec<Vec<i64>> {
            rows.iter()
                .map(|r| r.iter().map(|v| v.rem_euclid(p)).collect())
                .collect()
        };
        let norm = |path: &str, values: &[String]| -> Result<Vec<String>> {
            Ok(to_strings(&parse_list(path, values)?))
        };
        let cost = match &self.cost {
            CostSpec::Table(v) => CostSpec::Table(norm("cost.table", v)?),
            CostSpec::Indicator(v) => CostSpec::Indicator(norm("cost.indicator", v)?),
            CostSpec::Separable(parts) => CostSpec::Separable(
                parts
                    .iter()
                    .enumerate()
                    .map(|(i, v)| norm(&format!("cost.separable[{i}]"), v))
                    .collect::<Result<_>>()?,
            ),
        };
        let horizon = match &self.horizon {
            HorizonSpec::Finite(t) => HorizonSpec::Finite(*t),
            HorizonSpec::Discounted { alpha } => HorizonSpec::Discounted {
                alpha: format_rational(
                    &parse_rational(alpha).map_err(|e| at("horizon.discounted.alpha", e))?,
                ),
            },
        };
        Ok(Self {
            version: self.version,
            field: self.field.clone(),
            dims: self.dims.clone(),
            a: reduce(&self.a),
            b: reduce(&self.b),
            cost,
            cost_policy: self.cost_policy,
            horizon,
            decomposition: self
                .decomposition
                .as_ref()
                .map(|parts| parts.iter().map(|m| reduce(m)).collect()),
        })
    }
}

/// Real-field LQR instance file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LqrFile {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    #[serde(rename = "T")]
    pub horizon: usize,
    /// Basis columns of each invariant subspace, as `n x d_i` matrices.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parts: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
}

/// Matrices of an [`LqrFile`].
#[derive(Debug, Clone, PartialEq)]
pub struct LqrProblem {
    pub a: RealMatrix<f64>,
    pub b: RealMatrix<f64>,
    pub p: RealMatrix<f64>,
    pub horizon: usize,
    pub parts: Vec<RealMatrix<f64>>,
}

fn real_matrix(path: &str, rows: &[Vec<f64>], r: usize) -> Result<RealMatrix<f64>> {
    if rows.len() != r {
        return Err(invalid(path, format!("expected {r} rows, found {}", rows.len())));
    }
    RealMatrix::from_rows(rows).map_err(|e| at(path, e))
}

impl LqrFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("lqr file: {e}")))
    }

    pub fn load(&self) -> Result<LqrProblem> {
        let n = self.a.len();
        let a = real_matrix("A", &self.a, n)?;
        if a.cols() != n {
            return Err(invalid("A", "must be square"));
        }
        let b = real_matrix("B", &self.b, n)?;
        let p = real_matrix("P", &self.p, n)?;
        let parts = self
            .parts
            .iter()
            .enumerate()
            .map(|(i, rows)| real_matrix(&format!("parts[{i}]"), rows, n))
            .collect::<Result<_>>()?;
        if let Some(x0) = &self.x0 {
            if x0.len() != n {
                return Err(invalid("x0", format!("expected {n} entries, found {}", x0.len())));
            }
        }
        Ok(LqrProblem {
            a,
            b,
            p,
            horizon: self.horizon,
            parts,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rational;

    const EXAMPLE2: &str = r#"{
        "field": {"prime": 3},
        "dims": {"n": 3, "m": 2},
        "A": [[1, 1, 0], [0, 2, 0], [0, 0, 1]],
        "B": [[1, 0], [1, 1], [0, 1]],
        "cost": {"separable": [["0", "0", "0"], ["0", "1", "1"], ["0", "0", "0"]]},
        "cost_policy": "semidefinite",
        "horizon": {"finite": 1},
        "decomposition": [[[1], [0], [0]], [[1], [1], [0]], [[0], [0], [1]]]
    }"#;

    #[test]
    fn loads_example2() {
        let file = InstanceFile::from_json(EXAMPLE2).unwrap();
        let loaded = file.load(SizeGuard::DESK).unwrap();
        let inst = &loaded.instance;
        assert_eq!(inst.states().size(), 27);
        let d = loaded.decomposition.unwrap();
        // g depends only on the second coordinate, which is the X_2 coordinate.
        for x in 0..27 {
            let v = inst.states().vector(x);
            assert_eq!(inst.cost().table()[x], rational(i64::from(v[1] != 0), 1));
        }
        assert_eq!(d.len(), 3);
    }

    #[test]
    fn separable_tables_follow_given_columns() {
        // Part 0 is spanned by the column 2*e_1; coordinate 1 means 2*e_1.
        let text = r#"{
            "field": {"prime": 3}, "dims": {"n": 2, "m": 1},
            "A": [[1, 0], [0, 2]], "B": [[1], [1]],
            "cost": {"separable": [["0", "5", "7"], ["0", "1", "1"]]},
            "horizon": {"finite": 1},
            "decomposition": [[[2], [0]], [[0], [1]]]
        }"#;
        let loaded = InstanceFile::from_json(text).unwrap().load(SizeGuard::DESK).unwrap();
        let g = loaded.instance.cost();
        let states = loaded.instance.states();
        assert_eq!(g.table()[states.index(&[2, 0])], rational(5, 1));
        assert_eq!(g.table()[states.index(&[1, 0])], rational(7, 1));
    }

    #[test]
    fn round_trip_is_idempotent() {
        let file = InstanceFile::from_json(EXAMPLE2).unwrap();
        let once = file.normalized().unwrap().to_json();
        let twice = InstanceFile::from_json(&once).unwrap().normalized().unwrap().to_json();
        assert_eq!(once, twice);

        let loaded = file.load(SizeGuard::DESK).unwrap();
        let out = InstanceFile::from_instance(&loaded.instance, loaded.decomposition.as_ref());
        let again = InstanceFile::from_json(&out.to_json()).unwrap().load(SizeGuard::DESK).unwrap();
        assert_eq!(again.instance, loaded.instance);
    }

    #[test]
    fn diagnostics_name_the_field() {
        let bad = EXAMPLE2.replace(r#"[0, 2, 0]"#, r#"[0, 2]"#);
        let e = InstanceFile::from_json(&bad).unwrap().load(SizeGuard::DESK).unwrap_err();
        assert!(e.to_string().contains("A[1]"), "{e}");

        let bad = EXAMPLE2.replace(r#"["0", "1", "1"]"#, r#"["0", "x", "1"]"#);
        let e = InstanceFile::from_json(&bad).unwrap().load(SizeGuard::DESK).unwrap_err();
        assert!(e.to_string().contains("cost.separable[1][1]"), "{e}");

        let e = InstanceFile::from_json("{\n  \"field\": 3\n}").unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");

        let table: Vec<String> = vec!["1".into(); 27];
        let mut file = InstanceFile::from_json(EXAMPLE2).unwrap();
        file.cost = CostSpec::Table(table);
        let e = file.load(SizeGuard::DESK).unwrap_err();
        assert!(e.to_string().contains("vanish at the origin"), "{e}");
    }

    #[test]
    fn rejects_non_invariant_part() {
        let bad = EXAMPLE2.replace("[[1], [1], [0]]", "[[0], [1], [0]]");
        let e = InstanceFile::from_json(&bad).unwrap().load(SizeGuard::DESK).unwrap_err();
        assert!(e.to_string().contains("decomposition"), "{e}");
    }

    #[test]
    fn indicator_uses_primary_decomposition_when_absent() {
        let text = r#"{
            "field": {"prime": 3}, "dims": {"n": 2, "m": 1},
            "A": [[1, 0], [0, 2]], "B": [[1], [0]],
            "cost": {"indicator": ["1", "2"]},
            "horizon": {"discounted": {"alpha": "2/4"}}
        }"#;
        let file = InstanceFile::from_json(text).unwrap();
        let loaded = file.load(SizeGuard::DESK).unwrap();
        assert_eq!(loaded.decomposition.unwrap().len(), 2);
        assert_eq!(loaded.instance.horizon(), &Horizon::Discounted(rational(1, 2)));
        assert!(file.normalized().unwrap().to_json().contains("\"1/2\""));
    }

    #[test]
    fn lqr_file_loads() {
        let text = r#"{"A": [[1, 0], [0, 2]], "B": [[1], [0]], "P": [[1, 0], [0, 1]], "T": 3,
                       "parts": [[[1], [0]], [[0], [1]]]}"#;
        let prob = LqrFile::from_json(text).unwrap().load().unwrap();
        assert_eq!(prob.parts.len(), 2);
        assert_eq!(prob.horizon, 3);
    }
}
