//! CSV emission: header row, UTF-8, LF line endings, 17 significant digits
//! so values round-trip losslessly. Empty cells stand for "not defined at
//! this row" (e.g. a running slope before two points exist).

use std::io::Write;
use std::path::Path;

/// One CSV cell: a number or empty.
pub type Cell = Option<f64>;

fn fmt(cell: Cell) -> String {
    match cell {
        Some(v) => format!("{v:.16e}"),
        None => String::new(),
    }
}

/// Writes `name` under `dir` with the given header and rows.
pub fn write_csv(
    dir: &Path,
    name: &str,
    header: &[&str],
    rows: &[Vec<Cell>],
) -> std::io::Result<()> {
    let mut out = Vec::new();
    writeln!(out, "{}", header.join(",")).unwrap();
    for row in rows {
        debug_assert_eq!(row.len(), header.len(), "row width mismatch in {name}");
        let line: Vec<String> = row.iter().map(|&c| fmt(c)).collect();
        writeln!(out, "{}", line.join(",")).unwrap();
    }
    std::fs::write(dir.join(name), out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cells_round_trip_and_lines_end_with_lf() {
        let dir = std::env::temp_dir().join(format!("sp-reports-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let x = std::f64::consts::PI * 1e-7;
        write_csv(
            &dir,
            "t.csv",
            &["a", "b"],
            &[vec![Some(x), None], vec![Some(1.0), Some(-2.5)]],
        )
        .unwrap();
        let text = std::fs::read_to_string(dir.join("t.csv")).unwrap();
        assert!(!text.contains('\r'));
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("a,b"));
        let row = lines.next().unwrap();
        let first = row.split(',').next().unwrap();
        assert_eq!(first.parse::<f64>().unwrap(), x);
        assert!(row.ends_with(','), "empty trailing cell expected: {row}");
    }
}
