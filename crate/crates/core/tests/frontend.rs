use proptest::prelude::*;

use qpl::frontend::{compile, parse_program, parse_stmt, programs, typecheck, DenoteOptions, GateTable, StmtKind};
use qpl::random;
use qpl::{BlockKey, QArrow, Signature, Tolerance};

fn compile_default(src: &str) -> qpl::frontend::Denotation {
    compile(src, &GateTable::default(), &DenoteOptions::default()).unwrap()
}

#[test]
fn corpus_parses_types_and_denotes() {
    let t = Tolerance::uniform(1e-9);
    for (name, src) in programs::corpus() {
        let program = parse_program(src).unwrap_or_else(|e| panic!("{name}: {e}"));
        let typing = typecheck(&program).unwrap();
        let d = compile_default(src);
        assert_eq!(d.input().signature(), typing.input.signature(), "{name}");
        assert_eq!(*d.arrow.source(), typing.input.signature());
        assert_eq!(*d.arrow.target(), typing.output.signature());
        let keys = d.arrow.source().keys_up_to(4);
        d.arrow.check_columns(&keys, &t).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn skip_parses_to_a_single_node() {
    let s = parse_stmt("skip").unwrap();
    assert_eq!(s.kind, StmtKind::Skip);
    assert_eq!(s.node_count(), 1);
}

#[test]
fn contexts_have_tensor_signatures() {
    let cases = [
        ("input (q: qbit); skip", vec![2]),
        ("input (b: bit); skip", vec![1, 1]),
        ("input (q: qbit, b: bit); skip", vec![2, 2]),
        ("input (q: qbit, r: qbit); skip", vec![4]),
        ("skip", vec![1]),
    ];
    for (src, blocks) in cases {
        let typing = typecheck(&parse_program(src).unwrap()).unwrap();
        assert_eq!(typing.input.signature(), Signature::finite(blocks).unwrap(), "{src}");
    }
    let typing = typecheck(&parse_program("new qbit q; q *= H(q); measure q then {} else {}").unwrap()).unwrap();
    assert_eq!(typing.output.to_string(), "(q:bit)");
    assert_eq!(typing.output.signature(), Signature::bit());
    let typing = typecheck(&parse_program(programs::NAT_ADD).unwrap()).unwrap();
    assert!(!typing.input.signature().is_finite());
}

#[test]
fn corpus_pictures_agree() {
    let mut rng = random::rng(3);
    for (name, src) in programs::corpus() {
        let d = compile_default(src);
        let (sig, out) = (d.input().signature(), d.output().signature());
        if !sig.is_finite() || !out.is_finite() {
            continue;
        }
        for _ in 0..10 {
            let rho = random::state(&sig, 1.0, &mut rng);
            let q = random::effect_vector(&out, &mut rng);
            let forward = q.pair(&d.run(&rho).unwrap()).unwrap();
            let backward = d.wp(&q).unwrap().pair(&rho).unwrap();
            let scale = forward.abs().max(backward.abs()).max(1e-300);
            assert!((forward - backward).abs() / scale <= 1e-9, "{name}: {forward} vs {backward}");
        }
    }
}

#[test]
fn nat_programs_evaluate_column_by_column() {
    let d = compile_default(programs::NAT_ADD);
    let key = BlockKey { term: 0, idx: vec![4, 9] };
    let col = d.arrow.column(&key);
    assert_eq!(col.len(), 1);
    assert_eq!(col[0].0, BlockKey::flat(13));
    assert_eq!(d.arrow.materialized_columns(), [key]);
}

#[derive(Debug, Clone)]
enum Op {
    Gate(&'static str, usize),
    Cnot(usize, usize),
    Reset(usize),
    Skip,
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        (prop::sample::select(vec!["X", "Y", "Z", "H", "S", "T"]), 0..3usize).prop_map(|(g, q)| Op::Gate(g, q)),
        (0..3usize, 0..3usize)
            .prop_filter("distinct", |(a, b)| a != b)
            .prop_map(|(a, b)| Op::Cnot(a, b)),
        (0..3usize).prop_map(Op::Reset),
        Just(Op::Skip),
    ]
}

fn render(ops: &[Op]) -> String {
    let mut src = String::from("input (q0: qbit, q1: qbit, q2: qbit)");
    for op in ops {
        src.push_str(";\n");
        match op {
            Op::Gate(g, q) => src.push_str(&format!("q{q} *= {g}(q{q})")),
            Op::Cnot(a, b) => src.push_str(&format!("q{b} *= CNOT(q{a}, q{b})")),
            Op::Reset(q) => src.push_str(&format!(
                "measure q{q} then {{ discard q{q}; new qbit q{q}; q{q} *= H(q{q}) }} else {{ discard q{q}; new qbit q{q} }}"
            )),
            Op::Skip => src.push_str("skip"),
        }
    }
    src
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn straight_line_programs_are_channels(ops in prop::collection::vec(op(), 0..6), seed in 0u64..1000) {
        let d = compile_default(&render(&ops));
        let t = Tolerance::uniform(1e-9);
        prop_assert!(d.arrow.is_trace_preserving(&t).unwrap());
        let mut rng = random::rng(seed);
        let sig = d.input().signature();
        let rho = random::state(&sig, 1.0, &mut rng);
        let q = random::effect_vector(&d.output().signature(), &mut rng);
        let forward = q.pair(&d.run(&rho).unwrap()).unwrap();
        let backward = d.wp(&q).unwrap().pair(&rho).unwrap();
        prop_assert!((forward - backward).abs() <= 1e-9 * forward.abs().max(1.0));
    }

    #[test]
    fn skip_insertion_leaves_the_denotation_unchanged(ops in prop::collection::vec(op(), 1..5), at in 0usize..5) {
        let mut padded = ops.clone();
        padded.insert(at.min(ops.len()), Op::Skip);
        let a = compile_default(&render(&ops)).arrow;
        let b = compile_default(&render(&padded)).arrow;
        prop_assert_eq!(QArrow::max_choi_distance(&a, &b).unwrap(), 0.0);
    }
}
