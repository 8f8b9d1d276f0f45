//! Acceptance suite. Runs every criterion in sequence (so wall-clock limits
//! are measured without competing tests) and prints one line per criterion.

use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use maltsev::algebras::{evaluate_linear, interpretation_map, ClosureConfig, Element, SmpInstance};
use maltsev::construction::{certify, evaluate_linear_via_pattern, extend, ExtendedAlgebra};
use maltsev::cube::{check_condition_in, entails_cube_in};
use maltsev::entailment::weak_closure;
use maltsev::interp::{dual_implication_algebra, find_interpretation, impd, meet};
use maltsev::random::{random_algebra, random_condition, random_instance, AlgebraShape, ConditionShape};
use maltsev::terms::{
    canonical_variable_set, hagemann_mitschke_condition, jonsson_condition, union_conditions, CubeLetter,
};
use maltsev::{
    evaluate, generate_subpower, parse_condition, satisfies, FiniteAlgebra, LinearTerm, MaltsevCondition,
    Operation, SymbolId, TermTree, Variable,
};

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

struct Named {
    name: String,
    condition: MaltsevCondition,
}

fn named(name: &str, condition: MaltsevCondition) -> Named {
    Named {
        name: name.to_string(),
        condition,
    }
}

fn parse(text: &str) -> MaltsevCondition {
    parse_condition(text).expect("corpus condition parses")
}

fn maltsev_term() -> MaltsevCondition {
    parse("signature: p/3\nidentities:\n  p(x,y,y) = x\n  p(y,y,x) = x\n")
}

fn majority() -> MaltsevCondition {
    parse("signature: m/3\nidentities:\n  m(x,x,y) = x\n  m(x,y,x) = x\n  m(y,x,x) = x\n")
}

fn cd3() -> MaltsevCondition {
    jonsson_condition(3).unwrap()
}

fn cp3() -> MaltsevCondition {
    hagemann_mitschke_condition(3).unwrap()
}

fn corpus() -> Vec<Named> {
    let mut out = vec![
        named("CD(3)", cd3()),
        named("CP(3)", cp3()),
        named("CD(3)+CP(3)", union_conditions(&[cd3(), cp3()]).unwrap()),
        named("maltsev", maltsev_term()),
        named("majority", majority()),
        named("empty h/2", parse("signature: h/2\nidentities:\n")),
        named("empty h/3", parse("signature: h/3\nidentities:\n")),
        named("jonsson(1)", jonsson_condition(1).unwrap()),
        named("hm(1)", hagemann_mitschke_condition(1).unwrap()),
        named("CD(2)", jonsson_condition(2).unwrap()),
        named("CP(2)", hagemann_mitschke_condition(2).unwrap()),
        named("idempotent h/2", parse("signature: h/2\nidentities:\n  h(x,x) = x\n")),
        named("semilattice-like", parse("signature: s/2\nidentities:\n  s(x,y) = s(y,x)\n  s(x,x) = x\n")),
    ];
    for seed in [3, 11, 42] {
        out.push(named(&format!("random seed {seed}"), random_condition(seed, &ConditionShape::default())));
    }
    out
}

fn applicable(m: &MaltsevCondition) -> bool {
    let index = weak_closure(m, canonical_variable_set(m, None)).unwrap();
    check_condition_in(&index).map(|r| r.applicable()).unwrap_or(false)
}

fn applicable_corpus() -> Vec<Named> {
    corpus().into_iter().filter(|n| applicable(&n.condition)).collect()
}

fn algebra_corpus() -> Vec<FiniteAlgebra> {
    let mut out = vec![FiniteAlgebra::new(2, vec![Operation::from_fn("min", 2, 2, |a| a[0].min(a[1]))]).unwrap()];
    out.extend((0..24).map(|seed| random_algebra(1000 + seed, &AlgebraShape::default())));
    out
}

/// All `k`-tuples over `0..n`, lexicographic.
fn tuples(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|t| {
                (0..n).map(move |v| {
                    let mut t = t.clone();
                    t.push(v);
                    t
                })
            })
            .collect();
    }
    out
}

fn table_of(t: &TermTree, k: usize) -> Vec<Element> {
    let a = dual_implication_algebra();
    tuples(2, k).iter().map(|args| evaluate(t, &a, args).unwrap()).collect()
}

fn leaf(i: usize) -> TermTree {
    TermTree::Leaf(i)
}

fn criterion_1() -> Check {
    let a = dual_implication_algebra();
    let op = a.operation_index("impd").ok_or("no impd operation")?;
    for (args, expected) in [([0, 0], 0), ([0, 1], 1), ([1, 0], 0), ([1, 1], 0)] {
        let v = a.apply(op, &args);
        ensure!(v == expected, "impd{args:?} = {v}, expected {expected}");
    }
    Ok("4 table entries".into())
}

fn interpret_with(m: &MaltsevCondition, terms: &[(&str, TermTree)]) -> FiniteAlgebra {
    let ops = m
        .signature()
        .iter()
        .map(|s| {
            let t = match terms.iter().find(|(n, _)| *n == s.name) {
                Some((_, t)) => t.clone(),
                // the end terms are projections onto x and z
                None if s.name.ends_with("_0") => leaf(0),
                None => leaf(2),
            };
            Operation {
                symbol: s.clone(),
                table: table_of(&t, 3),
            }
        })
        .collect();
    FiniteAlgebra::new(2, ops).unwrap()
}

fn criterion_2() -> Check {
    let (x, y, z) = (leaf(0), leaf(1), leaf(2));
    let d1 = impd(meet(impd(y.clone(), x.clone()), impd(z.clone(), x.clone())), x.clone());
    let d2 = impd(impd(x.clone(), y.clone()), z.clone());
    let p1 = impd(impd(z.clone(), y.clone()), x.clone());
    let p2 = impd(impd(x, y), z);
    let cd = cd3();
    let s = satisfies(&interpret_with(&cd, &[("d_1", d1), ("d_2", d2)]), &cd).map_err(|e| e.to_string())?;
    ensure!(s.holds(), "CD(3) terms fail: {s:?}");
    let cp = cp3();
    let s = satisfies(&interpret_with(&cp, &[("p_1", p1), ("p_2", p2)]), &cp).map_err(|e| e.to_string())?;
    ensure!(s.holds(), "CP(3) terms fail: {s:?}");
    Ok(format!("{} + {} identities", cd.identities().len(), cp.identities().len()))
}

fn criterion_3() -> Check {
    let mut checked = 0;
    for m in [cd3(), cp3(), union_conditions(&[cd3(), cp3()]).unwrap()] {
        let index = weak_closure(&m, canonical_variable_set(&m, None)).unwrap();
        for h in m.symbol_ids() {
            let r = entails_cube_in(&index, h).map_err(|e| e.to_string())?;
            ensure!(!r.entails_cube, "{} unexpectedly entails cube identities", r.name);
            checked += 1;
        }
    }
    for m in [maltsev_term(), majority()] {
        let index = weak_closure(&m, canonical_variable_set(&m, None)).unwrap();
        let h = SymbolId(0);
        let r = entails_cube_in(&index, h).map_err(|e| e.to_string())?;
        ensure!(r.entails_cube, "{} should entail cube identities", r.name);
        let rows = r.witness_strings();
        ensure!(rows.len() >= 2, "witness for {} has {} rows", r.name, rows.len());
        for row in &rows {
            let letters: Vec<Variable> =
                row.chars().map(|c| CubeLetter::from_char(c).unwrap().variable()).collect();
            let lhs = LinearTerm::app(h, letters);
            ensure!(
                index.derivable(&lhs, &LinearTerm::Var(Variable::Y)),
                "row {row} of {} is not derivable",
                r.name
            );
        }
        for i in 0..r.arity {
            ensure!(
                rows.iter().any(|row| row.as_bytes()[i] == b'x'),
                "column {} of the {} witness is all y",
                i + 1,
                r.name
            );
        }
        checked += 1;
    }
    Ok(format!("{checked} symbols"))
}

fn criterion_4() -> Check {
    let corpus = corpus();
    ensure!(corpus.len() >= 12, "corpus has only {} conditions", corpus.len());
    let mut found = 0;
    for n in &corpus {
        let index = weak_closure(&n.condition, canonical_variable_set(&n.condition, None)).unwrap();
        let expected = check_condition_in(&index).map(|r| r.applicable()).unwrap_or(false);
        let got = find_interpretation(&n.condition).map_err(|e| e.to_string())?;
        ensure!(got.is_some() == expected, "{}: interpretation {} but applicable {}", n.name, got.is_some(), expected);
        if let Some(i) = got {
            ensure!(
                satisfies(&i.to_algebra(), &n.condition).unwrap().holds(),
                "{}: returned interpretation fails",
                n.name
            );
            found += 1;
        }
    }
    Ok(format!("{} conditions, {found} interpretable", corpus.len()))
}

fn criterion_5() -> Check {
    let algebras = algebra_corpus();
    ensure!(algebras.len() >= 20, "only {} algebras", algebras.len());
    let conditions = applicable_corpus();
    let mut pairs = 0;
    for n in &conditions {
        for a in &algebras {
            let ext = extend(a, &n.condition).map_err(|e| format!("{}: {e}", n.name))?;
            let s = satisfies(&ext.extended, &n.condition).map_err(|e| e.to_string())?;
            ensure!(s.holds(), "{} fails in the extension of {:?}: {s:?}", n.name, a);
            pairs += 1;
        }
    }
    Ok(format!("{} conditions x {} algebras = {pairs} extensions", conditions.len(), algebras.len()))
}

fn criterion_6() -> Check {
    let config = ClosureConfig::default();
    let conditions = applicable_corpus();
    let algebras = algebra_corpus();
    let mut exts: Vec<(String, ExtendedAlgebra)> = Vec::new();
    for n in &conditions {
        for a in &algebras {
            exts.push((n.name.clone(), extend(a, &n.condition).map_err(|e| e.to_string())?));
        }
    }
    let mut instances = 0;
    let mut yes = 0;
    let run = |name: &str, ext: &ExtendedAlgebra, inst: &SmpInstance| -> Result<bool, String> {
        let cert = certify(ext, inst, &config).map_err(|e| format!("{name}: {e}"))?;
        ensure!(
            cert.answer_base == cert.answer_extended,
            "{name}: base {} extended {} on {inst:?}",
            cert.answer_base,
            cert.answer_extended
        );
        ensure!(cert.ok(), "{name}: witness did not survive elimination on {inst:?}");
        Ok(cert.answer_base)
    };
    for (name, ext) in exts.iter().filter(|(_, e)| e.base.size() <= 2) {
        let n = ext.base.size();
        for m in 1..=2 {
            let all = tuples(n, m);
            for count in 0..=2 {
                for picks in tuples(all.len(), count) {
                    let generators: Vec<Vec<usize>> = picks.iter().map(|&i| all[i].clone()).collect();
                    for target in &all {
                        let inst = SmpInstance { m, generators: generators.clone(), target: target.clone() };
                        yes += run(name, ext, &inst)? as usize;
                        instances += 1;
                    }
                }
            }
        }
    }
    let exhaustive = instances;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for i in 0..100 {
        let (name, ext) = exts.choose(&mut rng).unwrap();
        let m = rng.gen_range(1..=3);
        let count = rng.gen_range(0..=3);
        let inst = random_instance(600 + i, ext.base.size(), m, count);
        yes += run(name, ext, &inst)? as usize;
        instances += 1;
    }
    Ok(format!("{exhaustive} exhaustive + {} random instances, {yes} yes", instances - exhaustive))
}

fn criterion_7() -> Check {
    let mut evaluations = 0u64;
    let algebras: Vec<FiniteAlgebra> = algebra_corpus().into_iter().filter(|a| a.size() <= 2).collect();
    for n in applicable_corpus() {
        let m = &n.condition;
        for a in &algebras {
            let ext = extend(a, m).map_err(|e| e.to_string())?;
            let ops = interpretation_map(&ext.extended, m).map_err(|e| e.to_string())?;
            let width = ext.index.variable_set().len();
            for h in m.symbol_ids() {
                let k = m.symbol(h).arity;
                for l in 1..=width {
                    for map in tuples(l, k) {
                        let w = LinearTerm::app(h, map.iter().map(|&i| Variable(i)));
                        for args in tuples(ext.extended.size(), l) {
                            let direct = evaluate_linear(&ext.extended, &ops, &w, &args);
                            let via = evaluate_linear_via_pattern(&ext, &w, &args).map_err(|e| e.to_string())?;
                            ensure!(direct == via, "{}: {} at {args:?}: table {direct}, pattern {via}", n.name, m.display_term(&w));
                            evaluations += 1;
                        }
                    }
                }
            }
        }
    }
    Ok(format!("{evaluations} evaluations"))
}

/// Checks identities whose symbols are all assigned in `tables`.
fn satisfied_so_far(m: &MaltsevCondition, tables: &[Option<Vec<Element>>], ids: &[usize]) -> bool {
    ids.iter().all(|&i| {
        let id = m.identities()[i].compact();
        let d = id.variables().len();
        tuples(2, d).iter().all(|asg| eval2(&id.lhs, tables, asg) == eval2(&id.rhs, tables, asg))
    })
}

fn eval2(t: &LinearTerm, tables: &[Option<Vec<Element>>], asg: &[Element]) -> Element {
    match t {
        LinearTerm::Var(v) => asg[v.0],
        LinearTerm::App { symbol, args } => {
            let code = args.iter().fold(0, |acc, v| acc * 2 + asg[v.0]);
            tables[symbol.0].as_ref().expect("assigned")[code]
        }
    }
}

/// Randomized backtracking for a two-element model of `m`.
fn random_model(m: &MaltsevCondition, rng: &mut ChaCha8Rng) -> Option<Vec<Vec<Element>>> {
    let sig = m.signature();
    let last_symbol = |i: usize| m.identities()[i].symbols().map(|s| s.0).max();
    let mut due: Vec<Vec<usize>> = vec![Vec::new(); sig.len()];
    for i in 0..m.identities().len() {
        match last_symbol(i) {
            Some(s) => due[s].push(i),
            // symbol-free identities only hold when trivial
            None if m.identities()[i].lhs != m.identities()[i].rhs => return None,
            None => {}
        }
    }
    fn rec(
        s: usize,
        m: &MaltsevCondition,
        due: &[Vec<usize>],
        tables: &mut Vec<Option<Vec<Element>>>,
        rng: &mut ChaCha8Rng,
    ) -> bool {
        if s == tables.len() {
            return true;
        }
        let k = m.signature()[s].arity;
        let mut candidates: Vec<u64> = (0..1u64 << (1 << k)).collect();
        candidates.shuffle(rng);
        for c in candidates {
            tables[s] = Some((0..1 << k).map(|i| ((c >> i) & 1) as usize).collect());
            if satisfied_so_far(m, tables, &due[s]) && rec(s + 1, m, due, tables, rng) {
                return true;
            }
        }
        tables[s] = None;
        false
    }
    let mut tables = vec![None; sig.len()];
    rec(0, m, &due, &mut tables, rng).then(|| tables.into_iter().map(Option::unwrap).collect())
}

fn all_models(m: &MaltsevCondition) -> Vec<Vec<Vec<Element>>> {
    let sizes: Vec<usize> = m.signature().iter().map(|s| 1 << (1 << s.arity)).collect();
    let mut out = Vec::new();
    let total: usize = sizes.iter().product();
    let all_ids: Vec<usize> = (0..m.identities().len()).collect();
    for mut code in 0..total {
        let tables: Vec<Option<Vec<Element>>> = m
            .signature()
            .iter()
            .zip(&sizes)
            .map(|(s, &n)| {
                let c = code % n;
                code /= n;
                Some((0..1 << s.arity).map(|i| (c >> i) & 1).collect())
            })
            .collect();
        if satisfied_so_far(m, &tables, &all_ids) {
            out.push(tables.into_iter().map(Option::unwrap).collect());
        }
    }
    out
}

fn criterion_8() -> Check {
    let mut models_checked = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for n in corpus() {
        let m = &n.condition;
        let index = weak_closure(m, canonical_variable_set(m, None)).unwrap();
        let models = if m.max_arity() <= 2 {
            all_models(m)
        } else {
            (0..200).filter_map(|_| random_model(m, &mut rng)).collect()
        };
        let width = index.variable_set().len();
        let assignments = tuples(2, width);
        let classes = index.classes();
        for model in &models {
            let tables: Vec<Option<Vec<Element>>> = model.iter().cloned().map(Some).collect();
            for class in &classes {
                let values = |i: usize| -> Vec<Element> {
                    let t = index.universe().term(i);
                    assignments.iter().map(|a| eval2(&t, &tables, a)).collect()
                };
                let first = values(class[0]);
                for &i in &class[1..] {
                    ensure!(
                        values(i) == first,
                        "{}: {} and {} differ in a model",
                        n.name,
                        index.display_term(class[0]),
                        index.display_term(i)
                    );
                }
            }
            models_checked += 1;
        }
    }
    Ok(format!("{models_checked} models"))
}

fn criterion_9() -> Check {
    let mut decisions = 0;
    for n in corpus() {
        let m = &n.condition;
        let index = weak_closure(m, canonical_variable_set(m, None)).unwrap();
        if !index.is_consistent() {
            continue;
        }
        for h in m.symbol_ids() {
            let k = m.symbol(h).arity;
            if k > 3 {
                continue;
            }
            let rows: Vec<Vec<CubeLetter>> = tuples(2, k)
                .into_iter()
                .map(|t| t.into_iter().map(|b| if b == 0 { CubeLetter::X } else { CubeLetter::Y }).collect())
                .collect();
            let derivable: Vec<Vec<CubeLetter>> = rows
                .into_iter()
                .filter(|r| {
                    let lhs = LinearTerm::app(h, r.iter().map(|l| l.variable()));
                    index.derivable(&lhs, &LinearTerm::Var(Variable::Y))
                })
                .collect();
            let mut brute = false;
            for size in 1..=k.min(derivable.len()) {
                for pick in tuples(derivable.len(), size) {
                    let covers = (0..k).all(|i| pick.iter().any(|&r| derivable[r][i] == CubeLetter::X));
                    if covers {
                        brute = true;
                    }
                }
            }
            let report = entails_cube_in(&index, h).map_err(|e| e.to_string())?;
            ensure!(
                report.entails_cube == brute,
                "{} symbol {}: criterion says {}, search says {brute}",
                n.name,
                report.name,
                report.entails_cube
            );
            decisions += 1;
        }
    }
    Ok(format!("{decisions} symbol decisions"))
}

fn criterion_10() -> Check {
    // several seeds, so that at least one closure is large
    let shape = AlgebraShape {
        size: 3..=3,
        operations: 1..=1,
        arity: 2..=2,
    };
    let mut largest = 0;
    let mut slowest = Duration::ZERO;
    for seed in 0..200 {
        let groupoid = random_algebra(seed, &shape);
        let inst = random_instance(seed, 3, 8, 2);
        let start = Instant::now();
        let closure = generate_subpower(&groupoid, 8, &inst.generators, &ClosureConfig::default())
            .map_err(|e| e.to_string())?;
        let elapsed = start.elapsed();
        ensure!(closure.len() <= 6561, "closure has {} members", closure.len());
        ensure!(elapsed < Duration::from_secs(1), "A^8 closure for seed {seed} took {elapsed:?}");
        largest = largest.max(closure.len());
        slowest = slowest.max(elapsed);
    }
    ensure!(largest >= 1000, "largest closure has only {largest} members");

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let alg = dir.path().join("succ.alg");
    let smp = dir.path().join("succ.smp");
    std::fs::write(&alg, "universe: 3\nop s/1:\n1 2 0\n").map_err(|e| e.to_string())?;
    std::fs::write(&smp, "m: 1\ngenerators:\n0\ntarget:\n2\n").map_err(|e| e.to_string())?;
    let out = Command::new(env!("CARGO_BIN_EXE_maltsev"))
        .arg("smp")
        .arg(&alg)
        .arg(&smp)
        .args(["--budget", "2"])
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(out.status.code() == Some(3), "budget run exited with {:?}", out.status.code());
    ensure!(
        String::from_utf8_lossy(&out.stderr).contains("budget"),
        "no budget message on stderr"
    );
    Ok(format!("largest closure {largest} members, slowest {slowest:.2?}; budget exit code 3"))
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Check); 10] = [
        ("operation table of I^d", Duration::from_millis(1), criterion_1),
        ("known CD(3) and CP(3) terms in I^d", Duration::from_millis(10), criterion_2),
        ("cube decisions with verified witnesses", Duration::from_secs(1), criterion_3),
        ("interpretability equivalence", Duration::from_secs(30), criterion_4),
        ("extensions are models", Duration::from_secs(60), criterion_5),
        ("reduction answers agree", Duration::from_secs(300), criterion_6),
        ("pattern evaluation agrees with tables", Duration::from_secs(30), criterion_7),
        ("closure identities hold in models", Duration::from_secs(60), criterion_8),
        ("cube criterion against search", Duration::from_secs(60), criterion_9),
        ("closure performance and budget", Duration::from_secs(5), criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let verdict = match &result {
            Ok(_) if elapsed >= *limit => Err(format!("took {elapsed:?}, limit {limit:?}")),
            Ok(detail) => Ok(detail.clone()),
            Err(e) => Err(e.clone()),
        };
        match verdict {
            Ok(detail) => println!("criterion {:>2} PASS  {name} ({detail}; {elapsed:.2?} < {limit:?})", i + 1),
            Err(e) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {e}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all 10 criteria passed");
}
