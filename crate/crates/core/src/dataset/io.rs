use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::PointSet;

/// Parses whitespace-separated coordinates, one point per line. Blank lines
/// and `#` comments are skipped; the first point fixes the dimension.
pub fn parse_points(text: &str, origin: &Path) -> Result<PointSet> {
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut dim = None;
    let mut coords = Vec::new();
    let mut last_line = 0;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        last_line = line_no;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|e| err(line_no, format!("bad number {tok:?}: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(v) = vals.iter().find(|v| !v.is_finite()) {
            return Err(err(line_no, format!("non-finite coordinate {v}")));
        }
        match dim {
            None if vals.len() == 2 || vals.len() == 3 => dim = Some(vals.len()),
            None => {
                return Err(err(
                    line_no,
                    format!("expected 2 or 3 coordinates, found {}", vals.len()),
                ))
            }
            Some(d) if d != vals.len() => {
                return Err(err(
                    line_no,
                    format!("expected {d} coordinates, found {}", vals.len()),
                ))
            }
            _ => {}
        }
        coords.extend(vals);
    }
    let dim = dim.ok_or_else(|| err(last_line.max(1), "no points in file".into()))?;
    PointSet::new(dim, coords)
}

pub fn format_points(points: &PointSet) -> String {
    let mut out = String::with_capacity(points.len() * points.dim() * 26);
    for p in points.iter() {
        let line: Vec<String> = p.iter().map(|v| format!("{v:.16e}")).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    out
}

pub fn read_points(path: impl AsRef<Path>) -> Result<PointSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_points(&text, path)
}

pub fn write_points(path: impl AsRef<Path>, points: &PointSet) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_points(points)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn origin() -> &'static Path {
        Path::new("test.xyz")
    }

    proptest! {
        #[test]
        fn format_then_parse_is_exact(
            coords in prop::collection::vec(-1e6f64..1e6, 1..60).prop_map(|mut v| {
                let n = v.len() / 3 * 3;
                v.truncate(n.max(3));
                while v.len() < 3 { v.push(0.5); }
                v
            })
        ) {
            let p = PointSet::new(3, coords).unwrap();
            let back = parse_points(&format_points(&p), origin()).unwrap();
            prop_assert_eq!(back, p);
        }
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.xyz");
        let p = PointSet::new(
            3,
            (0..300).map(|i| (i as f64 * 0.731).sin() * 1e3).collect(),
        )
        .unwrap();
        write_points(&path, &p).unwrap();
        let q = read_points(&path).unwrap();
        let err = p
            .coords()
            .iter()
            .zip(q.coords())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-12);
    }

    #[test]
    fn comments_and_dimension() {
        let p = parse_points("# header\n1 2\n\n3 4 # not a comment\n", origin());
        assert!(p.is_err());
        let p = parse_points("# header\n1 2\n\n3 4\n", origin()).unwrap();
        assert_eq!((p.len(), p.dim()), (2, 2));
    }

    #[test]
    fn mixed_dimension_reports_line() {
        match parse_points("0 0 0\n1 1 1\n2 2\n", origin()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_file_is_an_error() {
        assert!(matches!(
            parse_points("", origin()),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            parse_points("# only\n", origin()),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn missing_file() {
        assert!(matches!(
            read_points("/nonexistent/x.xyz"),
            Err(Error::Io { .. })
        ));
    }
}
