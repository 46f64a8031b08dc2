//! `.cgp` text format.
//!
//! ```text
//! # comment
//! ni,no,nr,nc,na,lb,fns
//! (i1,i2,f) (i1,i2,f) ...        N triples
//! o1,o2,...                      no output wire ids
//! ```
//!
//! `#` starts a comment running to the end of the line; blank lines are
//! skipped. `fns` selects the first `fns` gates of the standard function set.

use std::fmt::Write as _;

use thiserror::Error;

use super::{CgpParams, FunctionSet, Genome, Node, Violation};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ParseError {
    fn new(line: usize, column: usize, message: impl Into<String>) -> Self {
        ParseError {
            line,
            column,
            message: message.into(),
        }
    }
}

/// A content line with its 1-based number and comment stripped.
struct Line<'a> {
    number: usize,
    text: &'a str,
}

fn content_lines(text: &str) -> impl Iterator<Item = Line<'_>> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let body = raw.split('#').next().unwrap_or("");
        (!body.trim().is_empty()).then_some(Line {
            number: i + 1,
            text: body,
        })
    })
}

fn parse_int<T: std::str::FromStr>(tok: &str, line: usize, column: usize, what: &str) -> Result<T, ParseError> {
    tok.trim()
        .parse()
        .map_err(|_| ParseError::new(line, column, format!("expected integer {what}, found {:?}", tok.trim())))
}

/// Comma-separated integers with the 1-based column of each token.
fn csv_ints(line: &Line<'_>, what: &str) -> Result<Vec<(u64, usize)>, ParseError> {
    let mut out = Vec::new();
    let mut offset = 0;
    for tok in line.text.split(',') {
        let lead = tok.len() - tok.trim_start().len();
        let column = offset + lead + 1;
        out.push((parse_int(tok, line.number, column, what)?, column));
        offset += tok.len() + 1;
    }
    Ok(out)
}

pub fn parse(text: &str) -> Result<Genome, ParseError> {
    let mut lines = content_lines(text);
    let header = lines.next().ok_or_else(|| ParseError::new(1, 1, "missing header"))?;
    let fields = csv_ints(&header, "header field")?;
    if fields.len() != 7 {
        return Err(ParseError::new(
            header.number,
            1,
            format!(
                "malformed header: expected 7 fields ni,no,nr,nc,na,lb,fns, found {}",
                fields.len()
            ),
        ));
    }
    let f = |i: usize| fields[i].0 as usize;
    if f(4) != super::ARITY {
        return Err(ParseError::new(
            header.number,
            fields[4].1,
            format!("node arity must be 2, found {}", f(4)),
        ));
    }
    let params = CgpParams::with_levels_back(f(0), f(1), f(2), f(3), f(5))
        .map_err(|e| ParseError::new(header.number, 1, format!("malformed header: {e}")))?;
    let fnset = FunctionSet::prefix(f(6)).ok_or_else(|| {
        ParseError::new(
            header.number,
            fields[6].1,
            format!("function count {} outside 1..=10", f(6)),
        )
    })?;

    let node_line = lines
        .next()
        .ok_or_else(|| ParseError::new(header.number + 1, 1, "missing node line"))?;
    let (nodes, positions) = parse_triples(&node_line)?;
    if nodes.len() != params.node_count() {
        return Err(ParseError::new(
            node_line.number,
            1,
            format!(
                "node count mismatch: header implies {}, found {}",
                params.node_count(),
                nodes.len()
            ),
        ));
    }

    let out_line = lines
        .next()
        .ok_or_else(|| ParseError::new(node_line.number + 1, 1, "missing output line"))?;
    let outs = csv_ints(&out_line, "output id")?;
    if outs.len() != params.outputs() {
        return Err(ParseError::new(
            out_line.number,
            1,
            format!(
                "output count mismatch: header says {}, found {}",
                params.outputs(),
                outs.len()
            ),
        ));
    }
    if let Some(extra) = lines.next() {
        return Err(ParseError::new(extra.number, 1, "unexpected trailing content"));
    }
    let outputs = outs
        .iter()
        .map(|&(o, c)| u32::try_from(o).map_err(|_| ParseError::new(out_line.number, c, "output id out of range")))
        .collect::<Result<Vec<_>, _>>()?;

    let genome = Genome::from_parts(params, fnset, nodes, outputs);
    if let Some(v) = genome.validate().into_iter().next() {
        let (line, column) = match v {
            Violation::BadWire { node, .. }
            | Violation::ForwardReference { node, .. }
            | Violation::LevelsBack { node, .. }
            | Violation::BadFunction { node, .. } => (node_line.number, positions[node]),
            Violation::OutputOutOfRange { output, .. } => (out_line.number, outs[output].1),
            Violation::NodeCount { .. } => (node_line.number, 1),
            Violation::OutputCount { .. } => (out_line.number, 1),
        };
        return Err(ParseError::new(line, column, v.to_string()));
    }
    Ok(genome)
}

fn parse_triples(line: &Line<'_>) -> Result<(Vec<Node>, Vec<usize>), ParseError> {
    let bytes = line.text.as_bytes();
    let mut nodes = Vec::new();
    let mut positions = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i].is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let column = i + 1;
        if bytes[i] != b'(' {
            return Err(ParseError::new(
                line.number,
                column,
                "expected '(' opening a node triple",
            ));
        }
        let close = line.text[i..]
            .find(')')
            .map(|c| i + c)
            .ok_or_else(|| ParseError::new(line.number, column, "unterminated node triple"))?;
        let parts: Vec<&str> = line.text[i + 1..close].split(',').collect();
        if parts.len() != 3 {
            return Err(ParseError::new(
                line.number,
                column,
                "node triple needs exactly (in1,in2,fn)",
            ));
        }
        let in1 = parse_int(parts[0], line.number, column, "wire id")?;
        let in2 = parse_int(parts[1], line.number, column, "wire id")?;
        let func = parse_int(parts[2], line.number, column, "function code")?;
        nodes.push(Node { in1, in2, func });
        positions.push(column);
        i = close + 1;
    }
    Ok((nodes, positions))
}

pub fn serialize(genome: &Genome) -> String {
    let p = genome.params();
    let mut s = format!(
        "{},{},{},{},{},{},{}\n",
        p.inputs(),
        p.outputs(),
        p.rows(),
        p.columns(),
        p.arity(),
        p.levels_back(),
        genome.fnset().len()
    );
    for (k, n) in genome.nodes().iter().enumerate() {
        if k > 0 {
            s.push(' ');
        }
        let _ = write!(s, "({},{},{})", n.in1, n.in2, n.func);
    }
    s.push('\n');
    let outs: Vec<String> = genome.outputs().iter().map(u32::to_string).collect();
    s.push_str(&outs.join(","));
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const SMALL: &str = "# two-input and\n2,1,1,2,2,2,10\n(0,1,2) (2,2,0)\n3\n";

    #[test]
    fn parses_with_comments() {
        let g = parse(SMALL).unwrap();
        assert_eq!(g.nodes().len(), 2);
        assert_eq!(g.outputs(), &[3]);
        assert_eq!(
            serialize(&g),
            SMALL.lines().skip(1).collect::<Vec<_>>().join("\n") + "\n"
        );
    }

    #[test]
    fn empty_input_is_missing_header() {
        let e = parse("").unwrap_err();
        assert!(e.message.contains("missing header"));
        let e = parse("# only a comment\n\n").unwrap_err();
        assert!(e.message.contains("missing header"));
    }

    #[test]
    fn node_count_mismatch() {
        let mut text = String::from("2,1,3,3,2,3,10\n");
        for _ in 0..8 {
            text.push_str("(0,1,2) ");
        }
        text.push_str("\n2\n");
        let e = parse(&text).unwrap_err();
        assert!(e.message.contains("node count mismatch"), "{e}");
        assert_eq!(e.line, 2);
    }

    #[test]
    fn malformed_header() {
        assert!(parse("2,1,1\n").unwrap_err().message.contains("malformed header"));
        let e = parse("2,x,1,1,2,1,10\n(0,1,2)\n2\n").unwrap_err();
        assert_eq!((e.line, e.column), (1, 3));
        assert!(parse("2,1,1,1,3,1,10\n(0,1,2)\n2\n")
            .unwrap_err()
            .message
            .contains("arity"));
    }

    #[test]
    fn out_of_range_ids_report_position() {
        let e = parse("2,1,1,2,2,2,10\n(0,1,2) (0,7,2)\n3\n").unwrap_err();
        assert_eq!((e.line, e.column), (2, 9));
        assert!(e.message.contains("bad wire-id"));
        let e = parse("2,1,1,2,2,2,10\n(0,1,2) (0,1,2)\n4\n").unwrap_err();
        assert_eq!((e.line, e.column), (3, 1));
        assert!(e.message.contains("output out of range"));
        let e = parse("2,1,1,2,2,2,10\n(0,1,2) (0,1,10)\n3\n").unwrap_err();
        assert!(e.message.contains("bad function code"));
    }

    #[test]
    fn thousand_random_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for i in 0..1000 {
            let p = CgpParams::with_levels_back(1 + i % 9, 1 + i % 5, 1 + i % 3, 1 + i % 7, 1).unwrap();
            let g = Genome::random(p, FunctionSet::prefix(1 + i % 10).unwrap(), &mut rng);
            assert_eq!(parse(&serialize(&g)).unwrap(), g);
        }
    }

    proptest! {
        #[test]
        fn serialize_parse_identity_up_to_whitespace(seed in any::<u64>(), rows in 1usize..4, cols in 1usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = CgpParams::new(5, 3, rows, cols).unwrap();
            let g = Genome::random(p, FunctionSet::standard(), &mut rng);
            let text = serialize(&g);
            let spaced = text.replace(' ', "   ").replace('\n', "  \n\n");
            prop_assert_eq!(serialize(&parse(&spaced).unwrap()), text);
        }
    }
}
