//! Problem and plan files. Problems use the `cyclic-ot/1` JSON document:
//!
//! ```json
//! {"format":"cyclic-ot/1","kind":"dense","n":2,"m":2,
//!  "a":[...],"b":[...],"cost":[[...],...]}
//! {"format":"cyclic-ot/1","kind":"cyclic","n":2,"m":2,
//!  "alpha":[...],"beta":[...],"cost_blocks":[[[...],...],...]}
//! ```
//!
//! Reals are written with 17 significant digits so every f64 round-trips
//! bit-exactly; the writer is hand-rolled to pin that format. For dense
//! documents `n` records the symmetry order the producer intended (1 when
//! unknown) and `m = d / n`.

use std::fmt;
use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use crate::core::matrix::Mat;
use crate::core::problem::{
    CoreError, CyclicProblem, DenseProblem, ProbabilityVector, SolveReport, TransportPlan,
};

pub const PROBLEM_FORMAT: &str = "cyclic-ot/1";
pub const PLAN_FORMAT: &str = "cyclic-ot-plan/1";

#[derive(Debug)]
pub enum IoError {
    Io(std::io::Error),
    Parse(String),
    Format(String),
    Core(CoreError),
}

impl fmt::Display for IoError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IoError::Io(e) => write!(f, "io error: {e}"),
            IoError::Parse(msg) => write!(f, "parse error: {msg}"),
            IoError::Format(msg) => write!(f, "format error: {msg}"),
            IoError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for IoError {}

impl From<std::io::Error> for IoError {
    fn from(e: std::io::Error) -> Self {
        IoError::Io(e)
    }
}

impl From<CoreError> for IoError {
    fn from(e: CoreError) -> Self {
        IoError::Core(e)
    }
}

/// A problem in either representation.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemData {
    Dense(DenseProblem<f64>),
    Cyclic(CyclicProblem<f64>),
}

/// A parsed problem file: the data plus the symmetry order the file claims.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedProblem {
    pub data: ProblemData,
    /// For cyclic documents, the actual order; for dense documents, the
    /// order the producer intended (1 when unknown).
    pub order: usize,
}

/// 17 significant digits: enough for exact f64 round-trips.
fn push_real(out: &mut String, x: f64) {
    debug_assert!(x.is_finite(), "problem files hold finite reals only");
    write!(out, "{x:.16e}").unwrap();
}

fn push_vector(out: &mut String, v: &[f64]) {
    out.push('[');
    for (i, &x) in v.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        push_real(out, x);
    }
    out.push(']');
}

fn push_matrix(out: &mut String, mat: &Mat<f64>) {
    out.push('[');
    for i in 0..mat.rows() {
        if i > 0 {
            out.push(',');
        }
        push_vector(out, mat.row(i));
    }
    out.push(']');
}

/// Serializes a dense problem; `order_hint` records known symmetry (use 1
/// when none is claimed) and must divide the dimension.
pub fn dense_to_json(problem: &DenseProblem<f64>, order_hint: usize) -> Result<String, IoError> {
    let d = problem.dim();
    if order_hint == 0 || d % order_hint != 0 {
        return Err(IoError::Format(format!(
            "order hint {order_hint} does not divide dimension {d}"
        )));
    }
    let mut out = String::new();
    write!(
        out,
        "{{\"format\":\"{PROBLEM_FORMAT}\",\"kind\":\"dense\",\"n\":{order_hint},\"m\":{},\"a\":",
        d / order_hint
    )
    .unwrap();
    push_vector(&mut out, problem.a());
    out.push_str(",\"b\":");
    push_vector(&mut out, problem.b());
    out.push_str(",\"cost\":");
    push_matrix(&mut out, problem.cost());
    out.push('}');
    Ok(out)
}

pub fn cyclic_to_json(problem: &CyclicProblem<f64>) -> String {
    let mut out = String::new();
    write!(
        out,
        "{{\"format\":\"{PROBLEM_FORMAT}\",\"kind\":\"cyclic\",\"n\":{},\"m\":{},\"alpha\":",
        problem.order(),
        problem.block_size()
    )
    .unwrap();
    push_vector(&mut out, problem.alpha());
    out.push_str(",\"beta\":");
    push_vector(&mut out, problem.beta());
    out.push_str(",\"cost_blocks\":[");
    for (k, block) in problem.cost_blocks().iter().enumerate() {
        if k > 0 {
            out.push(',');
        }
        push_matrix(&mut out, block);
    }
    out.push_str("]}");
    out
}

pub fn problem_to_json(problem: &ProblemData, order_hint: usize) -> Result<String, IoError> {
    match problem {
        ProblemData::Dense(p) => dense_to_json(p, order_hint),
        ProblemData::Cyclic(p) => Ok(cyclic_to_json(p)),
    }
}

#[derive(Deserialize)]
struct ProblemDoc {
    format: String,
    kind: String,
    n: Option<usize>,
    m: Option<usize>,
    a: Option<Vec<f64>>,
    b: Option<Vec<f64>>,
    alpha: Option<Vec<f64>>,
    beta: Option<Vec<f64>>,
    cost: Option<Vec<Vec<f64>>>,
    cost_blocks: Option<Vec<Vec<Vec<f64>>>>,
}

fn matrix_from_nested(rows: Vec<Vec<f64>>, what: &str) -> Result<Mat<f64>, IoError> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(IoError::Format(format!("{what} must be a non-empty rectangular matrix")));
    }
    Ok(Mat::from_rows(&rows))
}

pub fn problem_from_json(text: &str) -> Result<LoadedProblem, IoError> {
    let doc: ProblemDoc =
        serde_json::from_str(text).map_err(|e| IoError::Parse(e.to_string()))?;
    if doc.format != PROBLEM_FORMAT {
        return Err(IoError::Format(format!(
            "expected format \"{PROBLEM_FORMAT}\", got \"{}\"",
            doc.format
        )));
    }
    match doc.kind.as_str() {
        "dense" => {
            let a = doc.a.ok_or_else(|| IoError::Format("dense document needs \"a\"".into()))?;
            let b = doc.b.ok_or_else(|| IoError::Format("dense document needs \"b\"".into()))?;
            let cost = matrix_from_nested(
                doc.cost.ok_or_else(|| IoError::Format("dense document needs \"cost\"".into()))?,
                "cost",
            )?;
            let d = a.len();
            let problem = DenseProblem::new(
                ProbabilityVector::new(a)?,
                ProbabilityVector::new(b)?,
                cost,
            )?;
            let order = doc.n.unwrap_or(1);
            if order == 0 || d % order != 0 {
                return Err(IoError::Format(format!(
                    "claimed order {order} does not divide dimension {d}"
                )));
            }
            if let Some(m) = doc.m {
                if m * order != d {
                    return Err(IoError::Format(format!(
                        "m = {m} and n = {order} disagree with dimension {d}"
                    )));
                }
            }
            Ok(LoadedProblem { data: ProblemData::Dense(problem), order })
        }
        "cyclic" => {
            let alpha = doc
                .alpha
                .ok_or_else(|| IoError::Format("cyclic document needs \"alpha\"".into()))?;
            let beta = doc
                .beta
                .ok_or_else(|| IoError::Format("cyclic document needs \"beta\"".into()))?;
            let blocks_nested = doc
                .cost_blocks
                .ok_or_else(|| IoError::Format("cyclic document needs \"cost_blocks\"".into()))?;
            let blocks: Result<Vec<Mat<f64>>, IoError> = blocks_nested
                .into_iter()
                .map(|b| matrix_from_nested(b, "cost block"))
                .collect();
            let problem = CyclicProblem::new(alpha, beta, blocks?)?;
            if let Some(n) = doc.n {
                if n != problem.order() {
                    return Err(IoError::Format(format!(
                        "document claims n = {n} but has {} cost blocks",
                        problem.order()
                    )));
                }
            }
            if let Some(m) = doc.m {
                if m != problem.block_size() {
                    return Err(IoError::Format(format!(
                        "document claims m = {m} but blocks are {0}x{0}",
                        problem.block_size()
                    )));
                }
            }
            let order = problem.order();
            Ok(LoadedProblem { data: ProblemData::Cyclic(problem), order })
        }
        other => Err(IoError::Format(format!("unknown kind \"{other}\""))),
    }
}

pub fn read_problem(path: impl AsRef<Path>) -> Result<LoadedProblem, IoError> {
    let text = std::fs::read_to_string(path)?;
    problem_from_json(&text)
}

pub fn write_problem(
    path: impl AsRef<Path>,
    problem: &ProblemData,
    order_hint: usize,
) -> Result<(), IoError> {
    let json = problem_to_json(problem, order_hint)?;
    std::fs::write(path, json)?;
    Ok(())
}

/// Serializes a solved plan together with its report.
pub fn plan_to_json(plan: &TransportPlan<f64>, report: &SolveReport<f64>) -> String {
    let mut out = String::new();
    out.push_str("{\"format\":\"");
    out.push_str(PLAN_FORMAT);
    out.push_str("\",");
    match plan {
        TransportPlan::Blocks(blocks) => {
            write!(
                out,
                "\"kind\":\"blocks\",\"n\":{},\"m\":{},\"blocks\":[",
                blocks.len(),
                blocks[0].rows()
            )
            .unwrap();
            for (k, block) in blocks.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                push_matrix(&mut out, block);
            }
            out.push(']');
        }
        TransportPlan::Dense(mat) => {
            write!(out, "\"kind\":\"dense\",\"d\":{},\"plan\":", mat.rows()).unwrap();
            push_matrix(&mut out, mat);
        }
    }
    out.push_str(",\"report\":");
    out.push_str(&serde_json::to_string(report).expect("report serializes"));
    out.push('}');
    out
}

pub fn write_plan(
    path: impl AsRef<Path>,
    plan: &TransportPlan<f64>,
    report: &SolveReport<f64>,
) -> Result<(), IoError> {
    std::fs::write(path, plan_to_json(plan, report))?;
    Ok(())
}

#[derive(Deserialize)]
struct PlanDoc {
    format: String,
    kind: String,
    blocks: Option<Vec<Vec<Vec<f64>>>>,
    plan: Option<Vec<Vec<f64>>>,
}

/// Reads back a plan document (the report is ignored).
pub fn plan_from_json(text: &str) -> Result<TransportPlan<f64>, IoError> {
    let doc: PlanDoc = serde_json::from_str(text).map_err(|e| IoError::Parse(e.to_string()))?;
    if doc.format != PLAN_FORMAT {
        return Err(IoError::Format(format!(
            "expected format \"{PLAN_FORMAT}\", got \"{}\"",
            doc.format
        )));
    }
    match doc.kind.as_str() {
        "blocks" => {
            let nested = doc
                .blocks
                .ok_or_else(|| IoError::Format("blocks document needs \"blocks\"".into()))?;
            let blocks: Result<Vec<Mat<f64>>, IoError> =
                nested.into_iter().map(|b| matrix_from_nested(b, "plan block")).collect();
            TransportPlan::blocks(blocks?).map_err(IoError::Core)
        }
        "dense" => {
            let nested =
                doc.plan.ok_or_else(|| IoError::Format("dense document needs \"plan\"".into()))?;
            TransportPlan::dense(matrix_from_nested(nested, "plan")?).map_err(IoError::Core)
        }
        other => Err(IoError::Format(format!("unknown kind \"{other}\""))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{gen_counter_example, gen_synthetic, RngSpec};

    #[test]
    fn cyclic_problem_roundtrips_bit_exactly() {
        let problem: CyclicProblem<f64> = gen_synthetic(4, 3, 99, RngSpec::ChaCha8).unwrap();
        let json = cyclic_to_json(&problem);
        let loaded = problem_from_json(&json).unwrap();
        assert_eq!(loaded.order, 3);
        match loaded.data {
            ProblemData::Cyclic(back) => assert_eq!(back, problem),
            _ => panic!("expected cyclic"),
        }
    }

    #[test]
    fn dense_problem_roundtrips_bit_exactly() {
        let problem: CyclicProblem<f64> = gen_counter_example(1.0).unwrap();
        let dense = crate::core::symmetry::expand(&problem);
        let json = dense_to_json(&dense, 2).unwrap();
        let loaded = problem_from_json(&json).unwrap();
        assert_eq!(loaded.order, 2);
        match loaded.data {
            ProblemData::Dense(back) => assert_eq!(back, dense),
            _ => panic!("expected dense"),
        }
    }

    #[test]
    fn reals_carry_seventeen_significant_digits() {
        let problem: CyclicProblem<f64> = gen_counter_example(1.0).unwrap();
        let json = cyclic_to_json(&problem);
        assert!(json.contains("5.0000000000000000e0"), "json: {json}");
        assert!(json.contains("\"format\":\"cyclic-ot/1\""));
    }

    #[test]
    fn rejects_malformed_documents() {
        assert!(problem_from_json("{}").is_err());
        assert!(problem_from_json("{\"format\":\"cyclic-ot/2\",\"kind\":\"dense\"}").is_err());
        let missing = format!("{{\"format\":\"{PROBLEM_FORMAT}\",\"kind\":\"dense\"}}");
        assert!(problem_from_json(&missing).is_err());
        let bad_n = format!(
            "{{\"format\":\"{PROBLEM_FORMAT}\",\"kind\":\"dense\",\"n\":3,\"a\":[0.5,0.5],\
             \"b\":[0.5,0.5],\"cost\":[[0.0,1.0],[1.0,0.0]]}}"
        );
        assert!(problem_from_json(&bad_n).is_err());
        let bad_blocks = format!(
            "{{\"format\":\"{PROBLEM_FORMAT}\",\"kind\":\"cyclic\",\"n\":3,\
             \"alpha\":[0.5],\"beta\":[0.5],\"cost_blocks\":[[[1.0]],[[2.0]]]}}"
        );
        assert!(problem_from_json(&bad_blocks).is_err());
    }

    #[test]
    fn plan_documents_roundtrip() {
        let blocks = vec![
            Mat::from_rows(&[vec![0.25_f64, 0.0], vec![0.0, 0.25]]),
            Mat::from_rows(&[vec![0.0_f64, 0.0], vec![0.0, 0.0]]),
        ];
        let plan = TransportPlan::Blocks(blocks);
        let report = SolveReport::<f64>::new("clot");
        let json = plan_to_json(&plan, &report);
        let back = plan_from_json(&json).unwrap();
        assert_eq!(back, plan);

        let dense = TransportPlan::Dense(Mat::from_rows(&[vec![1.0_f64]]));
        let json = plan_to_json(&dense, &report);
        assert_eq!(plan_from_json(&json).unwrap(), dense);
    }

    #[test]
    fn file_roundtrip() {
        let dir = std::env::temp_dir().join("cyclic-ot-io-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("problem.json");
        let problem: CyclicProblem<f64> = gen_synthetic(3, 2, 1, RngSpec::ChaCha8).unwrap();
        write_problem(&path, &ProblemData::Cyclic(problem.clone()), 2).unwrap();
        let loaded = read_problem(&path).unwrap();
        assert_eq!(loaded.data, ProblemData::Cyclic(problem));
        std::fs::remove_dir_all(&dir).ok();
    }
}
