//! The oracle may only borrow data types from `model`; any path into the
//! solver modules would let a solver bug confirm itself.

const FORBIDDEN: [&str; 6] = ["recip", "nonrecip", "sdp", "heuristics", "region", "linalg"];

#[test]
fn oracle_imports_no_solver_module() {
    let src = include_str!("../src/oracle.rs");
    let body = src.split("#[cfg(test)]").next().unwrap();
    for line in body.lines() {
        for m in FORBIDDEN {
            for prefix in ["crate::", "super::", "relaybf::"] {
                assert!(!line.contains(&format!("{prefix}{m}")), "oracle reaches into `{m}`: {line}");
            }
        }
    }
    for line in body.lines().filter(|l| l.contains("crate::model::")) {
        let inner = line.split('{').nth(1).unwrap_or("");
        assert!(
            !inner.split(|c: char| !c.is_alphanumeric() && c != '_').any(|w| w.starts_with(char::is_lowercase)),
            "oracle imports model functions: {line}"
        );
    }
}
