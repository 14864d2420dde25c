use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;

use super::{Direction, GraphError, QuestionGraph, QuestionNode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Dot,
    Graphml,
    Json,
}

impl ExportFormat {
    pub const ALL: [ExportFormat; 3] = [ExportFormat::Json, ExportFormat::Dot, ExportFormat::Graphml];

    pub fn extension(self) -> &'static str {
        match self {
            ExportFormat::Dot => "dot",
            ExportFormat::Graphml => "graphml",
            ExportFormat::Json => "json",
        }
    }
}

impl FromStr for ExportFormat {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dot" => Ok(ExportFormat::Dot),
            "graphml" => Ok(ExportFormat::Graphml),
            "json" => Ok(ExportFormat::Json),
            _ => Err(GraphError::UnknownFormat(s.to_string())),
        }
    }
}

pub fn export_graph(graph: &QuestionGraph, format: ExportFormat) -> Result<Vec<u8>, GraphError> {
    Ok(match format {
        ExportFormat::Dot => to_dot(graph),
        ExportFormat::Graphml => to_graphml(graph),
        ExportFormat::Json => to_json(graph)?,
    }
    .into_bytes())
}

/// Canonical form: pretty JSON with a trailing newline. Embeddings are not
/// included; see [`embeddings_jsonl`].
pub fn to_json(graph: &QuestionGraph) -> Result<String, GraphError> {
    let mut out = serde_json::to_string_pretty(graph)?;
    out.push('\n');
    Ok(out)
}

pub fn from_json(text: &str) -> Result<QuestionGraph, GraphError> {
    Ok(serde_json::from_str(text)?)
}

/// One `{"node_id", "vector"}` line per node that carries an embedding.
pub fn embeddings_jsonl(nodes: &[QuestionNode]) -> Result<String, GraphError> {
    #[derive(Serialize)]
    struct Line<'a> {
        node_id: &'a str,
        vector: &'a [f64],
    }
    let mut out = String::new();
    for n in nodes {
        if let Some(e) = &n.embedding {
            out.push_str(&serde_json::to_string(&Line {
                node_id: &n.node_id,
                vector: e.values(),
            })?);
            out.push('\n');
        }
    }
    Ok(out)
}

fn dot_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => {}
            c => out.push(c),
        }
    }
    out
}

pub fn to_dot(graph: &QuestionGraph) -> String {
    let mut out = String::from("digraph dqm {\n  node [shape=box];\n");
    for n in &graph.nodes {
        let _ = writeln!(
            out,
            "  \"{}\" [label=\"{}\", chunk_id=\"{}\", absorbed=\"{}\"];",
            dot_escape(&n.node_id),
            dot_escape(&n.question),
            dot_escape(&n.chunk_id),
            dot_escape(&n.absorbed.join(","))
        );
    }
    for e in &graph.edges {
        let (from, to, extra) = match e.direction {
            Direction::AToB => (&e.a, &e.b, ""),
            Direction::BToA => (&e.b, &e.a, ""),
            Direction::Undirected => (&e.a, &e.b, ", dir=none"),
        };
        let _ = writeln!(
            out,
            "  \"{}\" -> \"{}\" [label=\"{:.3}\", weight={}, eta={}, xi={}{}];",
            dot_escape(from),
            dot_escape(to),
            e.weight,
            e.weight,
            e.eta,
            e.xi,
            extra
        );
    }
    out.push_str("}\n");
    out
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn direction_name(d: Direction) -> &'static str {
    match d {
        Direction::AToB => "a_to_b",
        Direction::BToA => "b_to_a",
        Direction::Undirected => "undirected",
    }
}

pub fn to_graphml(graph: &QuestionGraph) -> String {
    let mut out = String::from(concat!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n",
        "<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n",
        "  <key id=\"question\" for=\"node\" attr.name=\"question\" attr.type=\"string\"/>\n",
        "  <key id=\"chunk_id\" for=\"node\" attr.name=\"chunk_id\" attr.type=\"string\"/>\n",
        "  <key id=\"absorbed\" for=\"node\" attr.name=\"absorbed\" attr.type=\"string\"/>\n",
        "  <key id=\"eta\" for=\"edge\" attr.name=\"eta\" attr.type=\"double\"/>\n",
        "  <key id=\"xi\" for=\"edge\" attr.name=\"xi\" attr.type=\"double\"/>\n",
        "  <key id=\"weight\" for=\"edge\" attr.name=\"weight\" attr.type=\"double\"/>\n",
        "  <key id=\"direction\" for=\"edge\" attr.name=\"direction\" attr.type=\"string\"/>\n",
        "  <graph id=\"dqm\" edgedefault=\"directed\">\n",
    ));
    for n in &graph.nodes {
        let _ = writeln!(out, "    <node id=\"{}\">", xml_escape(&n.node_id));
        let _ = writeln!(out, "      <data key=\"question\">{}</data>", xml_escape(&n.question));
        let _ = writeln!(out, "      <data key=\"chunk_id\">{}</data>", xml_escape(&n.chunk_id));
        let _ = writeln!(out, "      <data key=\"absorbed\">{}</data>", xml_escape(&n.absorbed.join(",")));
        out.push_str("    </node>\n");
    }
    for e in &graph.edges {
        let (source, target) = match e.direction {
            Direction::BToA => (&e.b, &e.a),
            _ => (&e.a, &e.b),
        };
        let directed = if e.direction == Direction::Undirected { "false" } else { "true" };
        let _ = writeln!(
            out,
            "    <edge source=\"{}\" target=\"{}\" directed=\"{directed}\">",
            xml_escape(source),
            xml_escape(target)
        );
        let _ = writeln!(out, "      <data key=\"eta\">{}</data>", e.eta);
        let _ = writeln!(out, "      <data key=\"xi\">{}</data>", e.xi);
        let _ = writeln!(out, "      <data key=\"weight\">{}</data>", e.weight);
        let _ = writeln!(out, "      <data key=\"direction\">{}</data>", direction_name(e.direction));
        out.push_str("    </edge>\n");
    }
    out.push_str("  </graph>\n</graphml>\n");
    out
}
