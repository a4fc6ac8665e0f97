//! Plain-text DAG interchange format.
//!
//! ```text
//! nwdag v1 N=5 d=2
//! 3 1 param 5.0000000000000000e-1
//! 3 2 param -1.0000000000000000e0
//! 4 3 nonlinear
//! 5 4 param 2.0000000000000000e0
//! ```
//!
//! One edge per line, whitespace separated. Weights are printed with 17
//! significant digits so values round-trip bit-faithfully. Param weights are
//! written from the accompanying [`ParamVector`], so a trained vector
//! survives a save/load cycle. Loading does not validate; callers decide
//! whether to report violations or reject.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::adjacency::check_theta;
use crate::dag::{Edge, EdgeKind, NodeId, NonlinearDag, ParamVector};

#[derive(Debug, Error)]
pub enum DagFileError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("param vector has length {got}, expected {want} slots")]
    ParamLen { got: usize, want: usize },
}

fn parse_err(line: usize, message: impl Into<String>) -> DagFileError {
    DagFileError::Parse {
        line,
        message: message.into(),
    }
}

/// Serializes in canonical (dst, src) edge order.
pub fn format_dag(dag: &NonlinearDag, theta: &ParamVector) -> Result<String, DagFileError> {
    check_theta(dag, theta).map_err(|_| DagFileError::ParamLen {
        got: theta.len(),
        want: dag.param_count(),
    })?;
    let mut out = String::new();
    out.push_str(&format!(
        "nwdag v1 N={} d={}\n",
        dag.node_count(),
        dag.input_dim()
    ));
    for (idx, e) in dag.edges().iter().enumerate() {
        match e.kind {
            EdgeKind::Nonlinear => {
                out.push_str(&format!("{} {} nonlinear\n", e.dst, e.src));
            }
            _ => {
                let w = dag.effective_weight(idx, theta).unwrap();
                out.push_str(&format!("{} {} {} {:.16e}\n", e.dst, e.src, e.kind, w));
            }
        }
    }
    Ok(out)
}

pub fn save_dag(
    path: impl AsRef<Path>,
    dag: &NonlinearDag,
    theta: &ParamVector,
) -> Result<(), DagFileError> {
    let text = format_dag(dag, theta)?;
    let mut f = fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

/// Parses the interchange text. The returned DAG is unvalidated so that a
/// structurally broken file can still be diagnosed with
/// [`NonlinearDag::validate`].
pub fn parse_dag(text: &str) -> Result<(NonlinearDag, ParamVector), DagFileError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file, expected nwdag header"))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() != 4 || tokens[0] != "nwdag" || tokens[1] != "v1" {
        return Err(parse_err(1, "expected header `nwdag v1 N=<N> d=<d>`"));
    }
    let n = parse_dim(tokens[2], "N", 1)?;
    let d = parse_dim(tokens[3], "d", 1)?;

    let mut edges = Vec::new();
    for (i, raw) in lines {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() < 3 {
            return Err(parse_err(line_no, "expected `dst src kind [weight]`"));
        }
        let dst = parse_node(parts[0], line_no)?;
        let src = parse_node(parts[1], line_no)?;
        let (kind, want_weight) = match parts[2] {
            "param" => (EdgeKind::Param, true),
            "fixed" => (EdgeKind::Fixed, true),
            "nonlinear" => (EdgeKind::Nonlinear, false),
            other => {
                return Err(parse_err(
                    line_no,
                    format!("unknown edge kind `{other}`"),
                ))
            }
        };
        let weight = match (want_weight, parts.len()) {
            (true, 4) => Some(parts[3].parse::<f64>().map_err(|_| {
                parse_err(line_no, format!("bad weight `{}`", parts[3]))
            })?),
            (true, _) => {
                return Err(parse_err(line_no, "param/fixed edge requires a weight"))
            }
            (false, 3) => None,
            (false, _) => {
                return Err(parse_err(line_no, "nonlinear edge takes no weight"))
            }
        };
        edges.push(Edge {
            dst: NodeId::new(dst),
            src: NodeId::new(src),
            kind,
            weight,
        });
    }
    let dag = NonlinearDag::new_unvalidated(n, d, edges);
    let theta = dag.stored_params();
    Ok((dag, theta))
}

pub fn load_dag(path: impl AsRef<Path>) -> Result<(NonlinearDag, ParamVector), DagFileError> {
    let text = fs::read_to_string(path)?;
    parse_dag(&text)
}

fn parse_dim(token: &str, name: &str, line: usize) -> Result<usize, DagFileError> {
    let prefix = format!("{name}=");
    token
        .strip_prefix(&prefix)
        .and_then(|v| v.parse::<usize>().ok())
        .ok_or_else(|| parse_err(line, format!("expected `{name}=<integer>`")))
}

fn parse_node(token: &str, line: usize) -> Result<usize, DagFileError> {
    let v: usize = token
        .parse()
        .map_err(|_| parse_err(line, format!("bad node index `{token}`")))?;
    if v == 0 {
        return Err(parse_err(line, "node indices are 1-based"));
    }
    Ok(v)
}
