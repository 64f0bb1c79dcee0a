use std::fmt::Write as _;
use std::io::{self, Write};

use super::{LinearProgram, Sense};

/// Writes `lp` in free-format MPS for inspection with external solvers.
pub fn write_mps(lp: &LinearProgram, name: &str, mut out: impl Write) -> io::Result<()> {
    let mut s = String::new();
    let _ = writeln!(s, "NAME {name}");
    s.push_str("ROWS\n N COST\n");
    for r in lp.rows() {
        let tag = match r.sense {
            Sense::Ge => 'G',
            Sense::Le => 'L',
            Sense::Eq => 'E',
        };
        let _ = writeln!(s, " {tag} {}", r.name);
    }
    let mut by_var: Vec<Vec<(usize, f64)>> = vec![Vec::new(); lp.num_vars()];
    for (i, r) in lp.rows().iter().enumerate() {
        for &(j, a) in &r.coefs {
            by_var[j].push((i, a));
        }
    }
    s.push_str("COLUMNS\n");
    for (j, v) in lp.vars().iter().enumerate() {
        if v.cost != 0.0 {
            let _ = writeln!(s, " {} COST {:e}", v.name, v.cost);
        }
        for &(i, a) in &by_var[j] {
            let _ = writeln!(s, " {} {} {:e}", v.name, lp.rows()[i].name, a);
        }
    }
    s.push_str("RHS\n");
    for r in lp.rows() {
        if r.rhs != 0.0 {
            let _ = writeln!(s, " RHS {} {:e}", r.name, r.rhs);
        }
    }
    s.push_str("BOUNDS\n");
    for v in lp.vars() {
        match (v.lower.is_finite(), v.upper.is_finite()) {
            (false, false) => {
                let _ = writeln!(s, " FR BND {}", v.name);
            }
            (true, true) if v.lower == v.upper => {
                let _ = writeln!(s, " FX BND {} {:e}", v.name, v.lower);
            }
            (lo, up) => {
                if !lo {
                    let _ = writeln!(s, " MI BND {}", v.name);
                } else if v.lower != 0.0 {
                    let _ = writeln!(s, " LO BND {} {:e}", v.name, v.lower);
                }
                if up {
                    let _ = writeln!(s, " UP BND {} {:e}", v.name, v.upper);
                }
            }
        }
    }
    s.push_str("ENDATA\n");
    out.write_all(s.as_bytes())
}
