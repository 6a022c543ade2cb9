//! Text file formats: sequence lists, point lists, front tables, and atomic writes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::domain::{Alphabet, DiscreteSequence, ObjectiveVector};
use crate::error::{Error, Result};
use crate::moo::pareto_filter;

/// Shortest round-trip decimal form; scientific notation outside `[1e-5, 1e16)`.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-5..1e16).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Parses one sequence per line. Blank lines and `#` comments are skipped.
pub fn parse_sequences(text: &str, alphabet: &Alphabet, source: &str) -> Result<Vec<DiscreteSequence>> {
    data_lines(text)
        .map(|(line, l)| {
            alphabet.parse(l).map_err(|e| Error::Parse {
                location: format!("{source}:{line}"),
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn read_sequences(path: impl AsRef<Path>, alphabet: &Alphabet) -> Result<Vec<DiscreteSequence>> {
    let path = path.as_ref();
    parse_sequences(&read_text(path)?, alphabet, &path.display().to_string())
}

pub fn write_sequences(path: impl AsRef<Path>, seqs: &[DiscreteSequence], alphabet: &Alphabet) -> Result<()> {
    let mut out = String::new();
    for s in seqs {
        out.push_str(&alphabet.render(s));
        out.push('\n');
    }
    write_atomic(path.as_ref(), out.as_bytes())
}

/// Parses one objective vector per line, values separated by commas and/or whitespace.
/// A first line that is not numeric is treated as a header.
pub fn parse_points(text: &str, source: &str) -> Result<Vec<ObjectiveVector>> {
    let mut points = Vec::new();
    let mut width = None;
    for (n, (line, l)) in data_lines(text).enumerate() {
        let fields: Vec<&str> = l
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .collect();
        let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        let at = || format!("{source}:{line}");
        let values = match parsed {
            Ok(v) => v,
            Err(_) if n == 0 => continue,
            Err(e) => {
                return Err(Error::Parse {
                    location: at(),
                    message: format!("not a number: {e}"),
                })
            }
        };
        if *width.get_or_insert(values.len()) != values.len() {
            return Err(Error::Parse {
                location: at(),
                message: format!("expected {} values, found {}", width.unwrap(), values.len()),
            });
        }
        points.push(ObjectiveVector::new(values).map_err(|e| Error::Parse {
            location: at(),
            message: e.to_string(),
        })?);
    }
    Ok(points)
}

pub fn read_points(path: impl AsRef<Path>) -> Result<Vec<ObjectiveVector>> {
    let path = path.as_ref();
    parse_points(&read_text(path)?, &path.display().to_string())
}

/// Renders a front table: one row per point with its label and non-dominated flag.
pub fn render_front(points: &[ObjectiveVector], labels: &[String], names: &[String]) -> Result<String> {
    if points.len() != labels.len() {
        return Err(Error::shape(
            format!("{} labels", points.len()),
            format!("{} labels", labels.len()),
        ));
    }
    if let Some(p) = points.iter().find(|p| p.len() != names.len()) {
        return Err(Error::shape(names.len(), p.len()));
    }
    let mut flags = vec![false; points.len()];
    for i in pareto_filter(points)? {
        flags[i] = true;
    }
    let mut out = String::new();
    let mut header: Vec<&str> = names.iter().map(String::as_str).collect();
    header.extend(["label", "non_dominated"]);
    out.push_str(&header.join(","));
    out.push('\n');
    for ((p, label), flag) in points.iter().zip(labels).zip(flags) {
        for v in p.values() {
            let _ = write!(out, "{},", fmt_f64(*v));
        }
        let _ = writeln!(out, "{label},{}", u8::from(flag));
    }
    Ok(out)
}

/// Writes a front table (see [`render_front`]) to `path`.
pub fn emit_front(
    points: &[ObjectiveVector],
    labels: &[String],
    names: &[String],
    path: impl AsRef<Path>,
) -> Result<()> {
    let text = render_front(points, labels, names)?;
    write_atomic(path.as_ref(), text.as_bytes())
}

/// Writes through a sibling temporary file and a rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("not a file path: {}", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ov(v: &[f64]) -> ObjectiveVector {
        ObjectiveVector::new(v.to_vec()).unwrap()
    }

    fn names(m: usize) -> Vec<String> {
        (1..=m).map(|i| format!("f{i}")).collect()
    }

    #[test]
    fn front_flags_single_winner() {
        let pts = [ov(&[0.1, 0.1]), ov(&[0.5, 0.5]), ov(&[0.2, 0.9])];
        let labels = vec!["pcebm".to_string(); 3];
        let text = render_front(&pts, &labels, &names(2)).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "f1,f2,label,non_dominated");
        assert_eq!(lines.len(), 4);
        assert_eq!(lines.iter().filter(|l| l.ends_with(",1")).count(), 1);
        assert_eq!(lines[1], "0.1,0.1,pcebm,1");
    }

    #[test]
    fn empty_front_is_header_only() {
        let text = render_front(&[], &[], &names(2)).unwrap();
        assert_eq!(text, "f1,f2,label,non_dominated\n");
    }

    #[test]
    fn emit_front_writes_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("front.csv");
        emit_front(&[ov(&[0.5, 0.5])], &["a".into()], &names(2), &path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "f1,f2,label,non_dominated\n0.5,0.5,a,1\n");
        assert!(emit_front(&[ov(&[0.5, 0.5])], &[], &names(2), &path).is_err());
    }

    #[test]
    fn points_parse_with_header_and_separators() {
        let pts = parse_points("f1,f2\n0.2, 0.8\n# note\n0.8 0.2\n", "pts").unwrap();
        assert_eq!(pts, vec![ov(&[0.2, 0.8]), ov(&[0.8, 0.2])]);
        match parse_points("0.1,0.2\n0.3\n", "pts") {
            Err(Error::Parse { location, .. }) => assert_eq!(location, "pts:2"),
            other => panic!("{other:?}"),
        }
        match parse_points("0.1,0.2\n0.3,x\n", "pts") {
            Err(Error::Parse { location, .. }) => assert_eq!(location, "pts:2"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sequences_parse_and_report_line() {
        let abc = Alphabet::new("ABC").unwrap();
        let seqs = parse_sequences("AB\n\nCA\n", &abc, "s").unwrap();
        assert_eq!(seqs.len(), 2);
        match parse_sequences("AB\nAZ\n", &abc, "s") {
            Err(Error::Parse { location, .. }) => assert_eq!(location, "s:2"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn floats_round_trip() {
        for v in [0.0, 0.1, 1.0 / 3.0, 1e-300, 123456.789, 2.5e20, -7.25e-9] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(0.28), "0.28");
        assert_eq!(fmt_f64(1e-7), "1e-7");
    }
}
