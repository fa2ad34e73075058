use std::path::{Path, PathBuf};

use proptest::prelude::*;
use thoth_core::lexer::Position;
use thoth_core::query::*;
use thoth_core::rdf::vocab::{base, sosa, ssr, RDF_TYPE};
use thoth_core::rdf::{Term, Triple};

fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn read(rel: &str) -> String {
    std::fs::read_to_string(corpus_dir().join(rel)).unwrap()
}

fn files(dir: &str) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(corpus_dir().join(dir))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("rq" | "ttl")))
        .collect();
    v.sort();
    v
}

enum Parsed {
    Query(Query),
    Rules(Vec<Rule>),
}

fn parse_file(p: &Path) -> Result<Parsed, Vec<QueryError>> {
    let text = std::fs::read_to_string(p).unwrap();
    parse_text(&text, p.extension().unwrap() == "ttl")
}

fn parse_text(text: &str, rules: bool) -> Result<Parsed, Vec<QueryError>> {
    if rules {
        parse_rule_document(text).map(Parsed::Rules)
    } else {
        parse_query(text).map(Parsed::Query)
    }
}

fn canonical(p: &Parsed) -> String {
    match p {
        Parsed::Query(q) => serialize_ast(q),
        Parsed::Rules(r) => serialize_ast(r.as_slice()),
    }
}

#[test]
fn listing4_ast() {
    let q = parse_query(&read("golden/listing4.rq")).unwrap();
    let QueryForm::Select { projection } = &q.form else { panic!("not a select") };
    assert_eq!(
        projection,
        &vec![
            Projection::Var("camera".into()),
            Projection::Aggregate {
                agg: Aggregate { func: AggFunc::Count, distinct: false, arg: Some("truck".into()) },
                alias: "truckCount".into()
            }
        ]
    );
    assert_eq!(q.stream_blocks.len(), 1);
    let b = &q.stream_blocks[0];
    assert_eq!(b.source, StreamSource::Var("streamURI".into()));
    assert_eq!(b.window.as_ref().unwrap().width_ms, 5 * 60 * 1000);
    assert_eq!(b.patterns.len(), 5);
    assert_eq!(q.group_by, vec!["camera".to_string()]);
    assert_eq!(
        q.having,
        Some(Expr::Cmp(
            CmpOp::Gt,
            Box::new(Expr::Aggregate(Aggregate { func: AggFunc::Count, distinct: false, arg: Some("truck".into()) })),
            Box::new(Expr::Const(Term::integer(1)))
        ))
    );
    assert_eq!(q.order_by, vec![OrderKey { expr: Expr::Var("truckCount".into()), descending: false }]);
    assert!(matches!(&q.static_patterns[0], Pattern::Triple(t) if matches!(&t.predicate, Predicate::Sequence(s) if s.len() == 2 && s[1].as_str() == RDF_TYPE)));
}

#[test]
fn listing2_ast() {
    let rules = parse_rule_document(&read("golden/listing2.ttl")).unwrap();
    assert_eq!(rules.len(), 1);
    let r = &rules[0];
    assert_eq!(r.id.as_str(), "http://example.org/ssr#rule_w_1");
    assert_eq!(r.kind, RuleKind::Soft { weight: 1.0 });
    assert_eq!(
        r.head(),
        &[Pattern::Occurrence { triple: Triple::new(Term::var("O"), base("enters"), ssr("FoV")), time: "T".into() }]
    );
    assert_eq!(r.query.stream_blocks.len(), 1);
    assert_eq!(r.query.stream_blocks[0].window, None);
    assert_eq!(r.query.stream_blocks[0].filters.len(), 1);
    assert_eq!(r.query.naf_blocks.len(), 1);
    assert_eq!(r.query.naf_blocks[0].window.as_ref().unwrap().width_ms, 5000);
}

#[test]
fn listing5_ast() {
    let rules = parse_rule_document(&read("golden/listing5.ttl")).unwrap();
    assert_eq!(rules.len(), 1);
    let r = &rules[0];
    assert!(r.is_soft());
    assert_eq!(r.head(), &[Pattern::triple(Term::var("B1"), sosa("isSampleOf"), Term::var("O"))]);
    assert_eq!(r.query.filters.len(), 1);
    assert!(r.query.filters[0].calls().contains(&("iou", 2)));
}

#[test]
fn golden_canonical_forms_are_frozen() {
    for name in ["listing2.ttl", "listing4.rq", "listing5.ttl"] {
        let p = corpus_dir().join("golden").join(name);
        let parsed = parse_file(&p).unwrap();
        let expected = read(&format!("golden/{}.canonical", name.split('.').next().unwrap()));
        assert_eq!(canonical(&parsed), expected, "{name}");
    }
}

#[test]
fn round_trip_fixpoint_on_all_accepted_files() {
    let mut n = 0;
    for p in files("golden").into_iter().chain(files("variants")) {
        let first = parse_file(&p).unwrap_or_else(|e| panic!("{}: {}", p.display(), format_errors(&e)));
        let text = canonical(&first);
        let second = parse_text(&text, p.extension().unwrap() == "ttl").unwrap();
        match (&first, &second) {
            (Parsed::Query(a), Parsed::Query(b)) => assert_eq!(a, b, "{}", p.display()),
            (Parsed::Rules(a), Parsed::Rules(b)) => assert_eq!(a, b, "{}", p.display()),
            _ => unreachable!(),
        }
        assert_eq!(canonical(&second), text);
        n += 1;
    }
    assert!(n >= 13);
}

#[test]
fn negative_cases_have_expected_positions() {
    let manifest = read("negative/EXPECTED");
    let mut checked = 0;
    for line in manifest.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()) {
        let parts: Vec<&str> = line.split_whitespace().collect();
        let (file, kind, pos) = (parts[0], parts[1], parts[2]);
        let (l, c) = pos.split_once(':').unwrap();
        let errs = match parse_file(&corpus_dir().join("negative").join(file)) {
            Ok(_) => panic!("{file} parsed"),
            Err(e) => e,
        };
        let first = &errs[0];
        let got_kind = match first.kind {
            ErrorKind::Lexical => "lexical",
            ErrorKind::Grammar { .. } => "grammar",
            ErrorKind::Validation => "validation",
        };
        assert_eq!(got_kind, kind, "{file}: {first}");
        assert_eq!(first.pos, Position { line: l.parse().unwrap(), col: c.parse().unwrap() }, "{file}: {first}");
        checked += 1;
    }
    assert!(checked >= 10);
    assert_eq!(checked, files("negative").len());
}

#[test]
fn validator_soundness_on_accepted_queries() {
    for p in files("golden").into_iter().chain(files("variants")) {
        let queries = match parse_file(&p).unwrap() {
            Parsed::Query(q) => vec![q],
            Parsed::Rules(r) => r.into_iter().map(|r| r.query).collect(),
        };
        for q in queries {
            let bound = q.bound_vars();
            let mut needed: Vec<String> = q.group_by.clone();
            match &q.form {
                QueryForm::Select { projection } => {
                    for p in projection {
                        if let Projection::Var(v) = p {
                            needed.push(v.clone());
                        }
                    }
                }
                QueryForm::Construct { template } => {
                    needed.extend(template.iter().flat_map(|p| p.vars()).map(String::from));
                }
            }
            for v in needed {
                assert!(bound.contains(&v), "{}: ?{v}", p.display());
            }
        }
    }
}

const VOCAB: &[&str] = &[
    "SELECT", "CONSTRUCT", "WHERE", "STREAM", "NAF", "FILTER", "GROUP", "BY", "HAVING", "ORDER", "{", "}", "(",
    ")", "[", "]", "<<", ">>", "@", ".", ";", ",", "/", "?x", "?y", ":a", "sosa:p", "a", "1", "0.5", "'s'",
    "window", "RANGE", "5", "sec", "COUNT", "AS", "iou", ">", "&&", "||", "!", "-", "<:ssr>",
];

proptest! {
    #[test]
    fn random_token_soup_never_panics(toks in prop::collection::vec(0..VOCAB.len(), 0..40)) {
        let text: Vec<&str> = toks.iter().map(|&i| VOCAB[i]).collect();
        let text = text.join(" ");
        if let Err(errs) = parse_query(&text) {
            prop_assert!(!errs.is_empty());
            for e in &errs {
                prop_assert!(e.pos.line >= 1 && e.pos.col >= 1);
            }
        }
    }

    #[test]
    fn truncated_golden_files_never_panic(cut in 0usize..2000, which in 0usize..3) {
        let name = ["golden/listing2.ttl", "golden/listing4.rq", "golden/listing5.ttl"][which];
        let text = read(name);
        let cut = text.char_indices().map(|(i, _)| i).chain([text.len()]).nth(cut.min(text.chars().count())).unwrap();
        let r = parse_text(&text[..cut], name.ends_with(".ttl"));
        if let Err(errs) = r {
            prop_assert!(!errs.is_empty());
        }
    }
}
