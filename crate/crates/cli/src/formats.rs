//! File formats: model CSV, constraint JSON, design documents.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ::aqua::{ConstraintSet, DesignProblem, Sense};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const SCHEMA: &str = "aqua/1";

/// Sidecar for models that list only coordinates.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormulaFile {
    /// `+`-separated terms among `intercept`, `linear`, `pairwise`, `squares`.
    pub formula: String,
}

pub fn formula_path(model: &Path) -> PathBuf {
    let stem = model.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
    model.with_file_name(format!("{stem}.formula.json"))
}

/// Expands coordinates into regressors.
pub fn expand_formula(formula: &str, x: &[f64]) -> CliResult<Vec<f64>> {
    let mut f = Vec::new();
    for term in formula.split('+').map(str::trim).filter(|t| !t.is_empty()) {
        match term {
            "intercept" => f.push(1.0),
            "linear" => f.extend_from_slice(x),
            "pairwise" => {
                for i in 0..x.len() {
                    for j in i + 1..x.len() {
                        f.push(x[i] * x[j]);
                    }
                }
            }
            "squares" => f.extend(x.iter().map(|v| v * v)),
            other => return Err(CliError::Parse(format!("unknown formula term '{other}'"))),
        }
    }
    if f.is_empty() {
        return Err(CliError::Parse("formula has no terms".into()));
    }
    Ok(f)
}

fn parse_num(s: &str, line: usize, col: &str) -> CliResult<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| CliError::Parse(format!("line {line}, column {col}: '{s}' is not a number")))?;
    if !v.is_finite() {
        return Err(CliError::Parse(format!("line {line}, column {col}: value must be finite")));
    }
    Ok(v)
}

pub fn read_model(path: &Path) -> CliResult<DesignProblem<f64>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    let header = rdr.headers().map_err(|e| CliError::Parse(e.to_string()))?.clone();
    let mut xcols = Vec::new();
    let mut fcols = Vec::new();
    let mut label_col = None;
    for (i, h) in header.iter().enumerate() {
        if h.starts_with("x_") {
            xcols.push(i);
        } else if h.starts_with("f_") {
            fcols.push(i);
        } else if h == "label" {
            label_col = Some(i);
        } else {
            return Err(CliError::Parse(format!("unknown model column '{h}'")));
        }
    }
    let formula = if fcols.is_empty() {
        if xcols.is_empty() {
            return Err(CliError::Parse("model has neither x_ nor f_ columns".into()));
        }
        let side = formula_path(path);
        let text = std::fs::read_to_string(&side)
            .map_err(|e| CliError::Parse(format!("model has only x_ columns and {}: {e}", side.display())))?;
        let ff: FormulaFile = serde_json::from_str(&text).map_err(|e| CliError::Parse(e.to_string()))?;
        Some(ff.formula)
    } else {
        None
    };
    let mut rows = Vec::new();
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Parse(e.to_string()))?;
        let line = r + 2;
        let x = xcols
            .iter()
            .map(|&c| parse_num(&rec[c], line, &header[c]))
            .collect::<CliResult<Vec<_>>>()?;
        let f = match &formula {
            Some(form) => expand_formula(form, &x)?,
            None => fcols
                .iter()
                .map(|&c| parse_num(&rec[c], line, &header[c]))
                .collect::<CliResult<Vec<_>>>()?,
        };
        rows.push(f);
        points.push(x);
        if let Some(c) = label_col {
            labels.push(rec[c].to_string());
        }
    }
    if rows.is_empty() {
        return Err(CliError::Parse("model has no design points".into()));
    }
    let mut problem = DesignProblem::from_rows(&rows)?;
    if !xcols.is_empty() {
        problem = problem.with_points(points)?;
    }
    if label_col.is_some() {
        problem = problem.with_labels(labels)?;
    }
    Ok(problem)
}

pub fn write_model(path: &Path, problem: &DesignProblem<f64>) -> CliResult<()> {
    let f = problem
        .regressors()
        .ok_or_else(|| CliError::Parse("only single-response models can be written as CSV".into()))?;
    let points = problem.points();
    let labels = problem.labels();
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Parse(e.to_string()))?;
    let mut header = Vec::new();
    if labels.is_some() {
        header.push("label".to_string());
    }
    if let Some(p) = points {
        header.extend((1..=p[0].len()).map(|j| format!("x_{j}")));
    }
    header.extend((1..=f.ncols()).map(|j| format!("f_{j}")));
    w.write_record(&header).map_err(|e| CliError::Parse(e.to_string()))?;
    for i in 0..f.nrows() {
        let mut rec = Vec::with_capacity(header.len());
        if let Some(l) = labels {
            rec.push(l[i].clone());
        }
        if let Some(p) = points {
            rec.extend(p[i].iter().map(|v| v.to_string()));
        }
        rec.extend((0..f.ncols()).map(|j| f[(i, j)].to_string()));
        w.write_record(&rec).map_err(|e| CliError::Parse(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SenseSpec {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sparse: Option<Vec<(usize, f64)>>,
    pub sense: SenseSpec,
    pub rhs: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Integrality {
    All(bool),
    Each(Vec<bool>),
}

/// Constraint file. Bounds are `[lower, upper]` pairs, `null` meaning no upper bound.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintFile {
    pub schema: String,
    pub n: usize,
    #[serde(default)]
    pub rows: Vec<RowSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Vec<(f64, Option<f64>)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrality: Option<Integrality>,
    /// Index sets whose weights must be equal.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub orbits: Vec<Vec<usize>>,
}

impl ConstraintFile {
    pub fn to_constraints(&self) -> CliResult<ConstraintSet<f64>> {
        if self.schema != SCHEMA {
            return Err(CliError::Parse(format!("unsupported schema '{}'", self.schema)));
        }
        let n = self.n;
        let mut cs = ConstraintSet::new(n);
        for (r, row) in self.rows.iter().enumerate() {
            let coeffs: Vec<(usize, f64)> = match (&row.coeffs, &row.sparse) {
                (Some(d), None) => {
                    if d.len() != n {
                        return Err(CliError::Parse(format!("row {r} has {} coefficients, expected {n}", d.len())));
                    }
                    d.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, &v)| (j, v)).collect()
                }
                (None, Some(s)) => s.clone(),
                _ => return Err(CliError::Parse(format!("row {r} needs exactly one of 'coeffs' or 'sparse'"))),
            };
            match row.sense {
                SenseSpec::Le => cs.add_row(coeffs, Sense::Le, row.rhs)?,
                SenseSpec::Eq => cs.add_row(coeffs, Sense::Eq, row.rhs)?,
                SenseSpec::Ge => cs.add_ge_row(coeffs, row.rhs)?,
            }
        }
        if let Some(b) = &self.bounds {
            if b.len() != n {
                return Err(CliError::Parse(format!("{} bounds given, expected {n}", b.len())));
            }
            for (i, &(lo, hi)) in b.iter().enumerate() {
                cs.set_bounds(i, lo, hi.unwrap_or(f64::INFINITY))?;
            }
        }
        match &self.integrality {
            None => {}
            Some(Integrality::All(v)) => cs.set_all_integer(*v),
            Some(Integrality::Each(v)) => {
                if v.len() != n {
                    return Err(CliError::Parse(format!("{} integrality flags given, expected {n}", v.len())));
                }
                for (i, &f) in v.iter().enumerate() {
                    cs.set_integer(i, f)?;
                }
            }
        }
        if !self.orbits.is_empty() {
            cs = cs.add_symmetry_orbits(&self.orbits)?;
        }
        Ok(cs)
    }

    pub fn from_constraints(cs: &ConstraintSet<f64>) -> Self {
        let rows = cs
            .rows()
            .iter()
            .map(|r| RowSpec {
                coeffs: None,
                sparse: Some(r.coeffs.clone()),
                sense: match r.sense {
                    Sense::Le => SenseSpec::Le,
                    Sense::Eq => SenseSpec::Eq,
                },
                rhs: r.rhs,
            })
            .collect();
        let default_bounds = cs.lower().iter().all(|&l| l == 0.0) && cs.upper().iter().all(|u| u.is_infinite());
        let bounds = (!default_bounds).then(|| {
            cs.lower()
                .iter()
                .zip(cs.upper())
                .map(|(&l, &u)| (l, u.is_finite().then_some(u)))
                .collect()
        });
        let integrality = if cs.integer().iter().all(|&b| b) {
            None
        } else if cs.integer().iter().all(|&b| !b) {
            Some(Integrality::All(false))
        } else {
            Some(Integrality::Each(cs.integer().to_vec()))
        };
        Self {
            schema: SCHEMA.into(),
            n: cs.n(),
            rows,
            bounds,
            integrality,
            orbits: Vec::new(),
        }
    }
}

pub fn read_constraints(path: &Path) -> CliResult<ConstraintSet<f64>> {
    let text = std::fs::read_to_string(path)?;
    let file: ConstraintFile =
        serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    file.to_constraints()
}

pub fn write_constraints(path: &Path, cs: &ConstraintSet<f64>) -> CliResult<()> {
    let text = serde_json::to_string_pretty(&ConstraintFile::from_constraints(cs))?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Output of every solving command.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignDocument {
    pub schema: String,
    pub command: String,
    pub criterion: String,
    pub weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    #[serde(default)]
    pub criterion_value: Option<f64>,
    /// Efficiency against the reference matrix, a lower bound versus the best exact design.
    #[serde(default)]
    pub efficiency_bound: Option<f64>,
    #[serde(default)]
    pub report: BTreeMap<String, serde_json::Value>,
}

impl DesignDocument {
    pub fn new(command: &str, criterion: String, weights: Vec<f64>) -> Self {
        Self {
            schema: SCHEMA.into(),
            command: command.into(),
            criterion,
            weights,
            labels: None,
            criterion_value: None,
            efficiency_bound: None,
            report: BTreeMap::new(),
        }
    }

    pub fn with_report(mut self, key: &str, value: impl Serialize) -> Self {
        let v = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.report.insert(key.into(), v);
        self
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)?;
        let doc: Self = serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
        if doc.schema != SCHEMA {
            return Err(CliError::Parse(format!("unsupported schema '{}'", doc.schema)));
        }
        Ok(doc)
    }
}

/// Writes the support of `weights` with its coordinates and labels.
pub fn write_selected_csv(path: &Path, problem: &DesignProblem<f64>, weights: &[f64]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Parse(e.to_string()))?;
    let dim = problem.points().map_or(0, |p| p[0].len());
    let mut header = vec!["index".to_string(), "label".to_string(), "weight".to_string()];
    header.extend((1..=dim).map(|j| format!("x_{j}")));
    w.write_record(&header).map_err(|e| CliError::Parse(e.to_string()))?;
    for (i, &v) in weights.iter().enumerate().filter(|(_, v)| **v > 0.0) {
        let mut rec = vec![
            i.to_string(),
            problem.labels().map_or(String::new(), |l| l[i].clone()),
            v.to_string(),
        ];
        if let Some(p) = problem.points() {
            rec.extend(p[i].iter().map(|x| x.to_string()));
        }
        w.write_record(&rec).map_err(|e| CliError::Parse(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Matrix file: `{"matrix": [[...], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixFile {
    pub matrix: Vec<Vec<f64>>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formula_terms() {
        let f = expand_formula("intercept + linear + pairwise + squares", &[2.0, 3.0]).unwrap();
        assert_eq!(f, vec![1.0, 2.0, 3.0, 6.0, 4.0, 9.0]);
        assert!(expand_formula("cubes", &[1.0]).is_err());
    }

    #[test]
    fn ge_rows_are_negated() {
        let file: ConstraintFile = serde_json::from_str(
            r#"{"schema":"aqua/1","n":2,"rows":[{"coeffs":[1,2],"sense":"ge","rhs":3}]}"#,
        )
        .unwrap();
        let cs = file.to_constraints().unwrap();
        assert_eq!(cs.rows()[0].coeffs, vec![(0, -1.0), (1, -2.0)]);
        assert_eq!(cs.rows()[0].rhs, -3.0);
        assert_eq!(cs.rows()[0].sense, Sense::Le);
    }

    #[test]
    fn unknown_keys_rejected() {
        let r: Result<ConstraintFile, _> = serde_json::from_str(r#"{"schema":"aqua/1","n":2,"rows":[],"extra":1}"#);
        assert!(r.is_err());
        let r: Result<ConstraintFile, _> =
            serde_json::from_str(r#"{"schema":"aqua/1","n":2,"rows":[{"coeffs":[1,1],"sense":"le","rhs":1,"x":0}]}"#);
        assert!(r.is_err());
    }
}
