//! The expression evaluator against an independent shunting-yard
//! implementation on random expressions.

use phasemix_core::expr::{Expr, Vars};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
enum Tok {
    Num(f64),
    X,
    Y,
    Op(char),
    Func(&'static str),
    Open,
    Close,
}

fn tokenize(s: &str) -> Vec<Tok> {
    let b = s.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let c = b[i] as char;
        if c == ' ' {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < b.len() && ((b[i] as char).is_ascii_digit() || b[i] == b'.') {
                i += 1;
            }
            out.push(Tok::Num(s[start..i].parse().unwrap()));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < b.len() && (b[i] as char).is_ascii_alphabetic() {
                i += 1;
            }
            out.push(match &s[start..i] {
                "x" => Tok::X,
                "y" => Tok::Y,
                "sin" => Tok::Func("sin"),
                "cos" => Tok::Func("cos"),
                "exp" => Tok::Func("exp"),
                "abs" => Tok::Func("abs"),
                other => panic!("unexpected name {other}"),
            });
        } else {
            out.push(match c {
                '(' => Tok::Open,
                ')' => Tok::Close,
                _ => Tok::Op(c),
            });
            i += 1;
        }
    }
    out
}

fn prec(op: char) -> (u8, bool) {
    match op {
        '+' | '-' => (1, false),
        '*' | '/' => (2, false),
        '^' => (3, true),
        _ => unreachable!(),
    }
}

/// Dijkstra's shunting-yard algorithm to RPN, then a stack evaluation.
fn reference_eval(s: &str, x: f64, y: f64) -> f64 {
    let mut output: Vec<Tok> = Vec::new();
    let mut ops: Vec<Tok> = Vec::new();
    for t in tokenize(s) {
        match t {
            Tok::Num(_) | Tok::X | Tok::Y => output.push(t),
            Tok::Func(_) | Tok::Open => ops.push(t),
            Tok::Op(o) => {
                let (p, right) = prec(o);
                while let Some(Tok::Op(top)) = ops.last() {
                    let (q, _) = prec(*top);
                    if q > p || (q == p && !right) {
                        output.push(ops.pop().unwrap());
                    } else {
                        break;
                    }
                }
                ops.push(Tok::Op(o));
            }
            Tok::Close => {
                while !matches!(ops.last(), Some(Tok::Open)) {
                    output.push(ops.pop().unwrap());
                }
                ops.pop();
                if let Some(Tok::Func(_)) = ops.last() {
                    output.push(ops.pop().unwrap());
                }
            }
        }
    }
    while let Some(t) = ops.pop() {
        output.push(t);
    }
    let mut st: Vec<f64> = Vec::new();
    for t in output {
        match t {
            Tok::Num(v) => st.push(v),
            Tok::X => st.push(x),
            Tok::Y => st.push(y),
            Tok::Func(f) => {
                let a = st.pop().unwrap();
                st.push(match f {
                    "sin" => a.sin(),
                    "cos" => a.cos(),
                    "exp" => a.exp(),
                    _ => a.abs(),
                });
            }
            Tok::Op(o) => {
                let b = st.pop().unwrap();
                let a = st.pop().unwrap();
                st.push(match o {
                    '+' => a + b,
                    '-' => a - b,
                    '*' => a * b,
                    '/' => a / b,
                    // integer exponents by repeated multiplication
                    _ if b.fract() == 0.0 => a.powi(b as i32),
                    _ => a.powf(b),
                });
            }
            _ => unreachable!(),
        }
    }
    st.pop().unwrap()
}

fn random_expr(rng: &mut ChaCha8Rng, depth: u32) -> String {
    let operand = |rng: &mut ChaCha8Rng, depth: u32| -> String {
        match if depth == 0 { rng.gen_range(0..3) } else { rng.gen_range(0..6) } {
            0 => format!("{:.3}", rng.gen_range(0.1..5.0)),
            1 => "x".into(),
            2 => "y".into(),
            3 => format!("({})", random_expr(rng, depth - 1)),
            _ => {
                let f = ["sin", "cos", "exp", "abs"][rng.gen_range(0..4)];
                let inner = random_expr(rng, depth - 1);
                // keep exponentials tame
                if f == "exp" { format!("exp(sin({inner}))") } else { format!("{f}({inner})") }
            }
        }
    };
    let mut s = operand(rng, depth);
    for _ in 0..rng.gen_range(1..5) {
        let op = ['+', '-', '*', '/', '^'][rng.gen_range(0..5)];
        if op == '^' {
            s.push_str(&format!(" ^ {}", rng.gen_range(1..4)));
        } else {
            s.push_str(&format!(" {op} {}", operand(rng, depth)));
        }
    }
    s
}

#[test]
fn matches_shunting_yard_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut compared = 0;
    for _ in 0..100 {
        let src = random_expr(&mut rng, 2);
        let e = Expr::parse(&src).unwrap_or_else(|err| panic!("{src}: {err}"));
        for _ in 0..100 {
            let (x, y) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let want = reference_eval(&src, x, y);
            let got = e.eval(Vars::at(x, y));
            if !want.is_finite() || want.abs() > 1e12 {
                continue;
            }
            assert!(
                (got - want).abs() <= 1e-14 * want.abs().max(1.0),
                "{src} at ({x}, {y}): {got} vs {want}"
            );
            compared += 1;
        }
    }
    assert!(compared > 5000, "only {compared} finite comparisons");
}

#[test]
fn precedence_corner_cases() {
    let cases = [("2 ^ 3 ^ 2", 512.0), ("-2 ^ 2", -4.0), ("8 / 4 / 2", 1.0), ("1 - 2 - 3", -4.0), ("2 * 3 + 4 * 5", 26.0)];
    for (src, want) in cases {
        assert_eq!(Expr::parse(src).unwrap().eval(Vars::default()), want, "{src}");
    }
}
