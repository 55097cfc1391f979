//! Canonical text serialization of query graphs.
//!
//! One line per edge, `(src)-[rel]->(dst)`, sorted; then one line per
//! constraint. The answer node prints as `?q`, variables as `?v0`, `?v1`, ...
//! and entities by id. Variable numbering is the one that yields the
//! lexicographically smallest text, so isomorphic graphs print identically.
//! A graph with no edges prints its answer node alone as `(?q)`.

use chrono::NaiveDate;

use super::{Comparator, Constraint, GraphError, Node, OrderDirection, QueryGraph, TimePoint};

/// Separator for the single-line form used in dataset files.
pub const INLINE_SEPARATOR: &str = " ; ";

pub fn to_logical_form(g: &QueryGraph) -> Result<String, GraphError> {
    g.validate().map_err(GraphError::Invalid)?;
    Ok(canonical_lines(g).join("\n"))
}

/// Logical form on one line, lines joined by `" ; "`.
pub fn to_inline_logical_form(g: &QueryGraph) -> Result<String, GraphError> {
    g.validate().map_err(GraphError::Invalid)?;
    Ok(canonical_lines(g).join(INLINE_SEPARATOR))
}

/// The graph rebuilt from its canonical form: answer node first, other
/// nodes in order of first mention, edges and constraints in printed order.
pub fn canonicalize(g: &QueryGraph) -> Result<QueryGraph, GraphError> {
    parse_logical_form(&to_logical_form(g)?)
}

fn canonical_lines(g: &QueryGraph) -> Vec<String> {
    let vars: Vec<usize> = (0..g.nodes.len()).filter(|&i| g.nodes[i] == Node::Variable).collect();
    let mut perm: Vec<usize> = (0..vars.len()).collect();
    let mut best: Option<Vec<String>> = None;
    loop {
        let mut names: Vec<String> = g
            .nodes
            .iter()
            .map(|n| match n {
                Node::Answer => "?q".to_string(),
                Node::Variable => String::new(),
                Node::Entity(id) => id.clone(),
            })
            .collect();
        for (slot, &node) in vars.iter().enumerate() {
            names[node] = format!("?v{}", perm[slot]);
        }
        let lines = render(g, &names);
        if best.as_ref().is_none_or(|b| lines < *b) {
            best = Some(lines);
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    best.expect("at least one permutation")
}

fn render(g: &QueryGraph, names: &[String]) -> Vec<String> {
    let mut edges: Vec<String> =
        g.edges.iter().map(|e| format!("({})-[{}]->({})", names[e.src], e.relation, names[e.dst])).collect();
    edges.sort();
    if edges.is_empty() {
        edges.push("(?q)".to_string());
    }
    // order constraints are applied in sequence, so only the others are sorted
    let mut unordered: Vec<String> = Vec::new();
    let mut ordered: Vec<String> = Vec::new();
    for c in &g.constraints {
        let line = render_constraint(c, names);
        if matches!(c, Constraint::Order { .. }) {
            ordered.push(line);
        } else {
            unordered.push(line);
        }
    }
    unordered.sort();
    edges.extend(unordered);
    edges.extend(ordered);
    edges
}

fn render_constraint(c: &Constraint, names: &[String]) -> String {
    match c {
        Constraint::Entity { target, id } => format!("ENTITY({}, {id})", names[*target]),
        Constraint::Type { target, type_id } => format!("TYPE({}, {type_id})", names[*target]),
        Constraint::Temporal { target, cmp, time } => {
            let (when, kind) = match time {
                TimePoint::Date(d) => (d.format("%Y-%m-%d").to_string(), "explicit"),
                TimePoint::Year(y) => (y.to_string(), "inexplicit"),
            };
            format!("TEMPORAL({}, {}, {when}, {kind})", names[*target], cmp.symbol())
        }
        Constraint::Order { target, direction, rank, property } => {
            let dir = match direction {
                OrderDirection::Ascending => "asc",
                OrderDirection::Descending => "desc",
            };
            format!("ORDER({}, {dir}, {rank}, {property})", names[*target])
        }
        Constraint::Compare { target, cmp, value, property } => {
            format!("COMPARE({}, {}, {value}, {property})", names[*target], cmp.symbol())
        }
    }
}

fn next_permutation(p: &mut [usize]) -> bool {
    if p.len() < 2 {
        return false;
    }
    let mut i = p.len() - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = p.len() - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Parses the multi-line or `" ; "`-joined form back into a graph.
pub fn parse_logical_form(text: &str) -> Result<QueryGraph, GraphError> {
    let mut parser = Parser { g: QueryGraph::answer_only(), names: vec!["?q".to_string()] };
    let lines = text.lines().flat_map(|l| l.split(INLINE_SEPARATOR.trim())).map(str::trim);
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.is_empty()) {
        parser.line(line).map_err(|message| GraphError::Parse { line: i + 1, message })?;
    }
    parser.g.validate().map_err(GraphError::Invalid)?;
    Ok(parser.g)
}

struct Parser {
    g: QueryGraph,
    names: Vec<String>,
}

impl Parser {
    fn node(&mut self, name: &str) -> Result<usize, String> {
        if let Some(i) = self.names.iter().position(|n| n == name) {
            return Ok(i);
        }
        let node = if name == "?q" {
            Node::Answer
        } else if let Some(rest) = name.strip_prefix("?v") {
            if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
                return Err(format!("bad variable name `{name}`"));
            }
            Node::Variable
        } else if name.starts_with('?') || name.is_empty() {
            return Err(format!("bad node name `{name}`"));
        } else {
            Node::Entity(name.to_string())
        };
        self.names.push(name.to_string());
        Ok(self.g.add_node(node))
    }

    fn line(&mut self, line: &str) -> Result<(), String> {
        if line == "(?q)" {
            return Ok(());
        }
        if line.starts_with('(') {
            let body = line.strip_prefix('(').and_then(|l| l.strip_suffix(')')).ok_or("unbalanced edge")?;
            let (src, rest) = body.split_once(")-[").ok_or("expected `)-[` in edge")?;
            let (rel, dst) = rest.rsplit_once("]->(").ok_or("expected `]->(` in edge")?;
            let (s, d) = (self.node(src)?, self.node(dst)?);
            self.g.add_edge(s, rel, d);
            return Ok(());
        }
        let (kind, args) = line.split_once('(').ok_or("expected an edge or a constraint")?;
        let args: Vec<&str> = args.strip_suffix(')').ok_or("unclosed constraint")?.split(", ").collect();
        let target = self.node(args[0])?;
        let arity = |n: usize| if args.len() == n { Ok(()) } else { Err(format!("{kind} takes {n} arguments")) };
        let cmp = |s: &str| Comparator::from_symbol(s).ok_or_else(|| format!("bad comparator `{s}`"));
        let c = match kind {
            "ENTITY" => {
                arity(2)?;
                Constraint::Entity { target, id: args[1].to_string() }
            }
            "TYPE" => {
                arity(2)?;
                Constraint::Type { target, type_id: args[1].to_string() }
            }
            "TEMPORAL" => {
                arity(4)?;
                let time = match args[3] {
                    "explicit" => TimePoint::Date(
                        NaiveDate::parse_from_str(args[2], "%Y-%m-%d").map_err(|e| format!("bad date: {e}"))?,
                    ),
                    "inexplicit" => TimePoint::Year(args[2].parse().map_err(|_| format!("bad year `{}`", args[2]))?),
                    other => return Err(format!("bad explicitness `{other}`")),
                };
                Constraint::Temporal { target, cmp: cmp(args[1])?, time }
            }
            "ORDER" => {
                arity(4)?;
                let direction = match args[1] {
                    "asc" => OrderDirection::Ascending,
                    "desc" => OrderDirection::Descending,
                    other => return Err(format!("bad order direction `{other}`")),
                };
                let rank = args[2].parse().map_err(|_| format!("bad rank `{}`", args[2]))?;
                Constraint::Order { target, direction, rank, property: args[3].to_string() }
            }
            "COMPARE" => {
                arity(4)?;
                let value = args[2].parse().map_err(|_| format!("bad number `{}`", args[2]))?;
                Constraint::Compare { target, cmp: cmp(args[1])?, value, property: args[3].to_string() }
            }
            other => return Err(format!("unknown constraint `{other}`")),
        };
        self.g.constraints.push(c);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_edge_format() {
        let mut g = QueryGraph::answer_only();
        let e = g.add_node(Node::Entity("Q2".into()));
        g.add_edge(0, "position_held", e);
        assert_eq!(to_logical_form(&g).unwrap(), "(?q)-[position_held]->(Q2)");
    }

    #[test]
    fn type_constraint_is_last_line() {
        let mut g = QueryGraph::answer_only();
        let e = g.add_node(Node::Entity("Q2".into()));
        g.add_edge(0, "position_held", e);
        g.constraints.push(Constraint::Type { target: 0, type_id: "Q5".into() });
        assert!(to_logical_form(&g).unwrap().ends_with("\nTYPE(?q, Q5)"));
    }

    #[test]
    fn insertion_order_does_not_matter() {
        let mut a = QueryGraph::answer_only();
        let v = a.add_node(Node::Variable);
        let e = a.add_node(Node::Entity("E".into()));
        a.add_edge(e, "r2", v);
        a.add_edge(v, "r1", 0);
        let mut b = QueryGraph::answer_only();
        let e = b.add_node(Node::Entity("E".into()));
        let v = b.add_node(Node::Variable);
        b.add_edge(v, "r1", 0);
        b.add_edge(e, "r2", v);
        assert_eq!(to_logical_form(&a).unwrap(), to_logical_form(&b).unwrap());
    }

    #[test]
    fn variable_naming_is_minimal() {
        let mut g = QueryGraph::answer_only();
        let v1 = g.add_node(Node::Variable);
        let v2 = g.add_node(Node::Variable);
        g.add_edge(0, "b", v1);
        g.add_edge(0, "a", v2);
        assert_eq!(to_logical_form(&g).unwrap(), "(?q)-[a]->(?v0)\n(?q)-[b]->(?v1)");
    }

    #[test]
    fn round_trip_all_constraint_kinds() {
        let text = "(?v0)-[r]->(?q)\n(E)-[s]->(?v0)\nCOMPARE(?q, >, 2.5, population)\n\
                    ENTITY(?v0, E2)\nTEMPORAL(?q, <=, 1961-08-04, explicit)\nTEMPORAL(?q, =, 1961, inexplicit)\n\
                    TYPE(?q, Q5)\nORDER(?q, desc, 1, population)";
        let g = parse_logical_form(text).unwrap();
        assert_eq!(to_logical_form(&g).unwrap(), text);
        let inline = to_inline_logical_form(&g).unwrap();
        assert_eq!(parse_logical_form(&inline).unwrap(), g);
    }

    #[test]
    fn single_node() {
        let g = QueryGraph::answer_only();
        assert_eq!(to_logical_form(&g).unwrap(), "(?q)");
        assert_eq!(parse_logical_form("(?q)").unwrap(), g);
    }

    #[test]
    fn invalid_graph_rejected() {
        let mut g = QueryGraph::answer_only();
        g.add_node(Node::Answer);
        assert!(matches!(to_logical_form(&g), Err(GraphError::Invalid(_))));
        assert!(matches!(parse_logical_form("FOO(?q)"), Err(GraphError::Parse { line: 1, .. })));
    }
}
