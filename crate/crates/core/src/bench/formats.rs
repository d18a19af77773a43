//! JSON files for the one-shot commands: affine matrix functions, pole
//! placement tasks and gains.
//!
//! An affine matrix function file looks like
//!
//! ```json
//! {
//!   "internal_dim": 1,
//!   "blocks": [
//!     {"constant": [[0, 1], [1, 0]], "terms": [{"index": 0, "matrix": [[1, 0], [0, -1]]}]}
//!   ]
//! }
//! ```
//!
//! with an optional `"variables"` list of `{"name": "P", "kind": {"symmetric": 2}}`
//! entries (`"scalar"`, `{"symmetric": k}` or `{"general": [rows, cols]}`).

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{matrix_from_rows, matrix_to_rows};
use crate::lmi::{AffineMatrixFunction, AmfBlock, EvpOptions, EvpResult, InternalKind, InternalVariable};
use crate::pole::{LmOutcome, PolePlacementTask, TrustRegionParams};

type Rows = Vec<Vec<f64>>;

fn parse<T: serde::de::DeserializeOwned>(text: &str, context: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        context: context.to_string(),
        message: format!("line {}, column {}: {e}", e.line(), e.column()),
    })
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum KindFile {
    Scalar,
    Symmetric(usize),
    General([usize; 2]),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VariableFile {
    name: String,
    kind: KindFile,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermFile {
    index: usize,
    matrix: Rows,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BlockFile {
    constant: Rows,
    #[serde(default)]
    terms: Vec<TermFile>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct EvpOptionsFile {
    tolerance: Option<f64>,
    max_iterations: Option<usize>,
    lambda_stop: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AmfFile {
    internal_dim: usize,
    #[serde(default)]
    variables: Vec<VariableFile>,
    blocks: Vec<BlockFile>,
    #[serde(default)]
    options: EvpOptionsFile,
}

/// Parses an affine matrix function file. EVP options default to
/// [`EvpOptions::exact`] since the one-shot command reports `λ*` itself.
pub fn parse_amf(text: &str, context: &str) -> Result<(AffineMatrixFunction, EvpOptions)> {
    let file: AmfFile = parse(text, context)?;
    let structure = file
        .variables
        .into_iter()
        .map(|v| InternalVariable {
            name: v.name,
            kind: match v.kind {
                KindFile::Scalar => InternalKind::Scalar,
                KindFile::Symmetric(k) => InternalKind::Symmetric(k),
                KindFile::General([rows, cols]) => InternalKind::General { rows, cols },
            },
        })
        .collect();
    let mut blocks = Vec::with_capacity(file.blocks.len());
    for (b, block) in file.blocks.iter().enumerate() {
        let constant = matrix_from_rows(&block.constant, &format!("block {b} constant"))?;
        let terms = block
            .terms
            .iter()
            .map(|t| Ok((t.index, matrix_from_rows(&t.matrix, &format!("block {b} term {}", t.index))?)))
            .collect::<Result<Vec<_>>>()?;
        blocks.push(AmfBlock::new(constant, terms));
    }
    let amf = AffineMatrixFunction::new(file.internal_dim, structure, blocks)?;
    let mut opts = EvpOptions::exact();
    if let Some(t) = file.options.tolerance {
        opts.tolerance = t;
    }
    if let Some(m) = file.options.max_iterations {
        opts.max_iterations = m;
    }
    if let Some(l) = file.options.lambda_stop {
        opts.lambda_stop = l;
    }
    Ok((amf, opts))
}

pub fn amf_to_json(amf: &AffineMatrixFunction) -> String {
    let file = AmfFile {
        internal_dim: amf.internal_dim(),
        variables: amf
            .internal_structure()
            .iter()
            .map(|v| VariableFile {
                name: v.name.clone(),
                kind: match v.kind {
                    InternalKind::Scalar => KindFile::Scalar,
                    InternalKind::Symmetric(k) => KindFile::Symmetric(k),
                    InternalKind::General { rows, cols } => KindFile::General([rows, cols]),
                },
            })
            .collect(),
        blocks: amf
            .blocks()
            .iter()
            .map(|b| BlockFile {
                constant: matrix_to_rows(&b.constant),
                terms: b.terms.iter().map(|(i, m)| TermFile { index: *i, matrix: matrix_to_rows(m) }).collect(),
            })
            .collect(),
        options: EvpOptionsFile::default(),
    };
    serde_json::to_string_pretty(&file).expect("matrix function serializes")
}

pub fn evp_result_json(res: &EvpResult) -> serde_json::Value {
    serde_json::json!({
        "lambda_star": res.lambda_star,
        "feasible": res.lambda_star < 0.0,
        "status": res.status.as_str(),
        "iterations": res.iterations,
        "duality_gap": res.duality_gap,
        "primal_residual": res.primal_residual,
        "x_star": res.x_star,
    })
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct TrustRegionFile {
    delta_hat: Option<f64>,
    delta0: Option<f64>,
    eta: Option<f64>,
    max_iter: Option<usize>,
    residual_tol: Option<f64>,
}

/// `{"A": .., "B": .., "C": .., "poles": [[re, im], ..], "q0": [..], "params": {..}}`.
/// `q0` defaults to zeros and `params` to the standard trust-region settings.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskFile {
    #[serde(rename = "A")]
    a: Rows,
    #[serde(rename = "B")]
    b: Rows,
    #[serde(rename = "C")]
    c: Rows,
    poles: Vec<[f64; 2]>,
    #[serde(default)]
    q0: Option<Vec<f64>>,
    #[serde(default)]
    params: TrustRegionFile,
}

pub fn parse_place_task(text: &str, context: &str) -> Result<(PolePlacementTask, TrustRegionParams)> {
    let file: TaskFile = parse(text, context)?;
    let a = matrix_from_rows(&file.a, "A")?;
    let b = matrix_from_rows(&file.b, "B")?;
    let c = matrix_from_rows(&file.c, "C")?;
    let poles: Vec<Complex64> = file.poles.iter().map(|p| Complex64::new(p[0], p[1])).collect();
    let q0 = file.q0.unwrap_or_else(|| vec![0.0; b.ncols() * c.nrows()]);
    let task = PolePlacementTask::new(a, b, c, poles, q0)?;
    let d = TrustRegionParams::default();
    let p = file.params;
    let params = TrustRegionParams {
        delta_hat: p.delta_hat.unwrap_or(d.delta_hat),
        delta0: p.delta0.unwrap_or(d.delta0),
        eta: p.eta.unwrap_or(d.eta),
        max_iter: p.max_iter.unwrap_or(d.max_iter),
        residual_tol: p.residual_tol.unwrap_or(d.residual_tol),
    };
    params.validate()?;
    Ok((task, params))
}

pub fn place_result_json(task: &PolePlacementTask, out: &LmOutcome, achieved: &[Complex64]) -> serde_json::Value {
    serde_json::json!({
        "gain": matrix_to_rows(&task.gain(&out.q)),
        "residual": out.h,
        "stop": format!("{:?}", out.stop),
        "iterations": out.trace.len(),
        "poles": achieved.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
    })
}

/// A gain file is either a bare array of rows or `{"F": rows}`.
pub fn parse_gain(text: &str, context: &str) -> Result<DMatrix<f64>> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum GainFile {
        Bare(Rows),
        Named {
            #[serde(rename = "F")]
            f: Rows,
        },
    }
    let rows = match parse::<GainFile>(text, context)? {
        GainFile::Bare(r) => r,
        GainFile::Named { f } => f,
    };
    matrix_from_rows(&rows, "F")
}

/// JSON number, or the string `"inf"` for an infinite value.
pub fn real_or_inf(v: f64) -> serde_json::Value {
    if v.is_finite() {
        serde_json::json!(v)
    } else if v > 0.0 {
        serde_json::json!("inf")
    } else {
        serde_json::json!("-inf")
    }
}
