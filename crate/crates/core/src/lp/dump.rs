use std::fmt::Write;

use super::LpProblem;

/// Plain-text dump of an LP for external cross-checking.
///
/// ```text
/// minimize
///   obj: 25 x0 + 30 x1
/// subject to
///   le0: 1 x0 + 1 x1 <= 150
///   eq0: 1 x0 + 1 x1 = 150
/// bounds
///   0 <= x0 <= 100
///   x1 free
/// end
/// ```
///
/// Variables are named `x<j>`, rows `le<i>`/`eq<i>`. Zero coefficients are
/// omitted and numbers use Rust's shortest round-trip formatting.
pub fn write_lp_dump(p: &LpProblem) -> String {
    let mut out = String::new();
    out.push_str("minimize\n  obj:");
    push_linear(&mut out, &p.objective);
    out.push_str("\nsubject to\n");
    for (i, (row, rhs)) in p.ineq.iter().zip(&p.ineq_rhs).enumerate() {
        let _ = write!(out, "  le{i}:");
        push_linear(&mut out, row);
        let _ = writeln!(out, " <= {rhs}");
    }
    for (i, (row, rhs)) in p.eq.iter().zip(&p.eq_rhs).enumerate() {
        let _ = write!(out, "  eq{i}:");
        push_linear(&mut out, row);
        let _ = writeln!(out, " = {rhs}");
    }
    out.push_str("bounds\n");
    for (j, (&l, &u)) in p.lower.iter().zip(&p.upper).enumerate() {
        let _ = match (l.is_finite(), u.is_finite()) {
            (false, false) => writeln!(out, "  x{j} free"),
            (true, false) => writeln!(out, "  x{j} >= {l}"),
            (false, true) => writeln!(out, "  x{j} <= {u}"),
            (true, true) => writeln!(out, "  {l} <= x{j} <= {u}"),
        };
    }
    out.push_str("end\n");
    out
}

fn push_linear(out: &mut String, coefs: &[f64]) {
    let mut first = true;
    for (j, &c) in coefs.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        if first {
            let _ = write!(out, " {c} x{j}");
            first = false;
        } else if c < 0.0 {
            let _ = write!(out, " - {} x{j}", -c);
        } else {
            let _ = write!(out, " + {c} x{j}");
        }
    }
    if first {
        out.push_str(" 0");
    }
}
