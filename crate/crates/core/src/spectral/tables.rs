//! Text dump of the eigensystem tables for diffing across implementations.
//!
//! ```text
//! # eigensystem-tables v1
//! p <value>
//! q <value>
//! mu <value>
//! M <int>
//! arith exact|float
//! <table> <row> <col> <value>
//! ```
//! Tables: d, e, d_tilde, e_tilde (row = n, col = k) and A, B, A_tilde, B_tilde
//! (row = m, col = n). Zero entries are omitted.

use std::fmt::{Display, Write};

use super::eigen::EigenSystem;
use super::scalar::Scalar;

pub const TABLES_HEADER: &str = "# eigensystem-tables v1";

pub fn dump_tables<T: Scalar + Display>(sys: &EigenSystem<T>, exact: bool) -> String {
    let mut out = String::new();
    writeln!(out, "{TABLES_HEADER}").unwrap();
    writeln!(out, "p {}", sys.p).unwrap();
    writeln!(out, "q {}", sys.q).unwrap();
    writeln!(out, "mu {}", sys.mu).unwrap();
    writeln!(out, "M {}", sys.m).unwrap();
    writeln!(out, "arith {}", if exact { "exact" } else { "float" }).unwrap();
    let tables: [(&str, &Vec<Vec<T>>); 8] = [
        ("d", &sys.d),
        ("e", &sys.e),
        ("d_tilde", &sys.d_tilde),
        ("e_tilde", &sys.e_tilde),
        ("A", &sys.proj_a),
        ("B", &sys.proj_b),
        ("A_tilde", &sys.dual_a),
        ("B_tilde", &sys.dual_b),
    ];
    for (name, t) in tables {
        for (i, row) in t.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if !v.is_zero() {
                    writeln!(out, "{name} {i} {j} {v}").unwrap();
                }
            }
        }
    }
    out
}
