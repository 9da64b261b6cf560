//! Text formats for functions, spectra, heat-kernel samples and cohomology data.
//!
//! Every artifact starts with a header identifying the run. CSV files carry it as `#` comment
//! lines, JSON files as a `header` object. Floats are written with `{:.16e}` so output is
//! byte-identical across runs.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::bratteli::PathTree;
use crate::error::{Error, Result};
use crate::functions::LCFunction;
use crate::spectral::{Scalar, SpectrumTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub config_sha256: String,
    pub lambda: f64,
    pub d_psi: f64,
    pub gamma: f64,
    pub level: usize,
}

impl Header {
    pub fn comment_lines(&self) -> String {
        format!(
            "# config_sha256={}\n# lambda={:.16e}\n# d_psi={:.16e}\n# gamma={:.16e}\n# level={}\n",
            self.config_sha256, self.lambda, self.d_psi, self.gamma, self.level
        )
    }
}

/// A function as `[path, value]` pairs in tree order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionFile {
    pub level: usize,
    pub values: Vec<(String, f64)>,
}

pub fn function_to_file(tree: &PathTree, f: &LCFunction) -> FunctionFile {
    FunctionFile {
        level: f.level,
        values: f.values.iter().enumerate().map(|(i, v)| (tree.path(f.level, i).to_string(), *v)).collect(),
    }
}

/// Reads a function back; every path of the level must appear exactly once.
pub fn function_from_file(tree: &PathTree, file: &FunctionFile) -> Result<LCFunction> {
    if file.level > tree.depth() {
        return Err(Error::LevelExceedsTable { function_level: file.level, table_level: tree.depth() });
    }
    let n = tree.len(file.level);
    let mut values = vec![None; n];
    for (p, v) in &file.values {
        let path = p.parse()?;
        let i = tree.index_of(&path).filter(|_| path.len() == file.level).ok_or_else(|| Error::InvalidPath(p.clone()))?;
        if values[i].replace(*v).is_some() {
            return Err(Error::InvalidPath(format!("{p} listed twice")));
        }
    }
    let values = values
        .into_iter()
        .enumerate()
        .map(|(i, v)| v.ok_or_else(|| Error::InvalidPath(format!("{} missing", tree.path(file.level, i)))))
        .collect::<Result<Vec<_>>>()?;
    Ok(LCFunction::new(file.level, values))
}

/// `level,generator,eigenvalue,multiplicity` rows after the header. Paths contain commas and
/// are quoted.
pub fn spectrum_csv<S: Scalar>(header: &Header, table: &SpectrumTable<S>) -> String {
    let mut out = header.comment_lines();
    let _ = writeln!(out, "# threshold={}", table.threshold.render());
    out.push_str("level,generator,eigenvalue,multiplicity\n");
    for e in &table.entries {
        let _ = writeln!(out, "{},\"{}\",{},{}", e.level, e.generator, e.eigenvalue.render(), e.multiplicity);
    }
    out
}

/// One heat-kernel sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeatRow {
    pub x: String,
    pub y: String,
    pub t: f64,
    pub value: f64,
    pub tail_bound: f64,
    pub profile: f64,
}

pub fn heat_csv(header: &Header, rows: &[HeatRow]) -> String {
    let mut out = header.comment_lines();
    out.push_str("x,y,t,value,tail_bound,profile\n");
    for r in rows {
        let _ = writeln!(out, "\"{}\",\"{}\",{:.16e},{:.16e},{:.16e},{:.16e}", r.x, r.y, r.t, r.value, r.tail_bound, r.profile);
    }
    out
}

/// JSON document with a header and an arbitrary body.
pub fn json_with_header<T: Serialize>(header: &Header, body: &T) -> Result<String> {
    #[derive(Serialize)]
    struct Doc<'a, T> {
        header: &'a Header,
        #[serde(flatten)]
        body: &'a T,
    }
    serde_json::to_string_pretty(&Doc { header, body }).map_err(|e| Error::DimensionMismatch(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bratteli::{DiagramData, DEFAULT_PATH_CAP};

    #[test]
    fn function_round_trip() {
        let d = DiagramData::new(vec![vec![1, 1], vec![1, 0]]).unwrap();
        let tree = PathTree::build(&d, 3, DEFAULT_PATH_CAP).unwrap();
        let f = LCFunction::from_fn(&tree, 3, |i| i as f64 * 0.5 - 1.0);
        let file = function_to_file(&tree, &f);
        let text = serde_json::to_string(&file).unwrap();
        let back: FunctionFile = serde_json::from_str(&text).unwrap();
        assert_eq!(function_from_file(&tree, &back).unwrap(), f);
    }

    #[test]
    fn missing_path_is_reported() {
        let d = DiagramData::new(vec![vec![2]]).unwrap();
        let tree = PathTree::build(&d, 2, DEFAULT_PATH_CAP).unwrap();
        let f = LCFunction::from_fn(&tree, 2, |i| i as f64);
        let mut file = function_to_file(&tree, &f);
        file.values.pop();
        assert!(matches!(function_from_file(&tree, &file), Err(Error::InvalidPath(_))));
    }
}
