//! Template text files and commented CSV output.
//!
//! Template format:
//!
//! ```text
//! IRISTPL 1 <rows> <cols>
//! <rows lines of '0'/'1', real part>
//!
//! <rows lines of '0'/'1', imaginary part>
//! ```
//!
//! Bit `0` is spin `-1` and bit `1` is spin `+1`. Lines starting with `#`
//! before the header are ignored by the reader.
//!
//! CSV outputs start with `#`-prefixed lines (the first is
//! `# config: <json>`), followed by a header row and data rows.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::lattice::{spin_from_bit, FullTemplate, LatticeGeometry, TemplatePart};

pub const TEMPLATE_MAGIC: &str = "IRISTPL";
pub const TEMPLATE_VERSION: u32 = 1;
pub const CONFIG_PREFIX: &str = "# config: ";

pub fn format_template(template: &FullTemplate) -> String {
    let g = template.geometry();
    let mut out = String::with_capacity(2 * (g.len() + g.rows()) + 32);
    out.push_str(&format!("{TEMPLATE_MAGIC} {TEMPLATE_VERSION} {} {}\n", g.rows(), g.cols()));
    for (i, part) in [template.real(), template.imag()].into_iter().enumerate() {
        if i == 1 {
            out.push('\n');
        }
        for r in 0..g.rows() {
            for c in 0..g.cols() {
                out.push(if part.at(r, c) > 0 { '1' } else { '0' });
            }
            out.push('\n');
        }
    }
    out
}

/// Parses template text; `origin` names the source in error messages.
pub fn parse_template(text: &str, origin: &str) -> Result<FullTemplate> {
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_string(),
        line,
        message,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .skip_while(|(_, l)| l.starts_with('#'));

    let (header_line, header) = lines.next().ok_or_else(|| err(1, "missing header".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let (rows, cols) = match fields.as_slice() {
        [magic, version, rows, cols] if *magic == TEMPLATE_MAGIC => {
            if version.parse::<u32>() != Ok(TEMPLATE_VERSION) {
                return Err(err(header_line, format!("unsupported version {version}")));
            }
            let rows = rows
                .parse::<usize>()
                .map_err(|_| err(header_line, format!("bad row count {rows:?}")))?;
            let cols = cols
                .parse::<usize>()
                .map_err(|_| err(header_line, format!("bad column count {cols:?}")))?;
            (rows, cols)
        }
        _ => {
            return Err(err(
                header_line,
                format!("expected `{TEMPLATE_MAGIC} {TEMPLATE_VERSION} <rows> <cols>`"),
            ))
        }
    };
    let geometry =
        LatticeGeometry::new(rows, cols).map_err(|e| err(header_line, e.to_string()))?;

    let read_part = |lines: &mut dyn Iterator<Item = (usize, &str)>, name: &str| {
        let mut bits = vec![false; geometry.len()];
        for r in 0..rows {
            let (n, line) = lines
                .next()
                .ok_or_else(|| err(header_line, format!("{name} part ends after {r} rows")))?;
            if line.chars().count() != cols {
                return Err(err(
                    n,
                    format!("row has {} columns, expected {cols}", line.chars().count()),
                ));
            }
            for (c, ch) in line.chars().enumerate() {
                bits[geometry.index(r, c)] = match ch {
                    '0' => false,
                    '1' => true,
                    other => return Err(err(n, format!("unexpected character {other:?}"))),
                };
            }
        }
        let spins = bits.into_iter().map(spin_from_bit).collect();
        TemplatePart::from_spins(geometry, spins)
    };

    let real = read_part(&mut lines, "real")?;
    match lines.next() {
        Some((_, "")) => {}
        Some((n, _)) => return Err(err(n, "expected blank line between parts".into())),
        None => return Err(err(header_line, "missing imaginary part".into())),
    }
    let imag = read_part(&mut lines, "imaginary")?;
    if let Some((n, line)) = lines.find(|(_, l)| !l.is_empty()) {
        return Err(err(n, format!("trailing content {line:?}")));
    }
    FullTemplate::new(real, imag)
}

pub fn read_template(path: impl AsRef<Path>) -> Result<FullTemplate> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_template(&text, &path.display().to_string())
}

pub fn write_template(template: &FullTemplate, path: impl AsRef<Path>, overwrite: bool) -> Result<()> {
    write_file(path.as_ref(), format_template(template).as_bytes(), overwrite)
}

pub(crate) fn write_file(path: &Path, bytes: &[u8], overwrite: bool) -> Result<()> {
    if !overwrite && path.exists() {
        return Err(Error::WouldOverwrite(path.to_path_buf()));
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(bytes).map_err(|e| Error::io(path, e))
}

/// A CSV table with leading comment lines.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvTable {
    pub comments: Vec<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        Self {
            comments: Vec::new(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn comment(&mut self, line: impl Into<String>) -> &mut Self {
        self.comments.push(line.into());
        self
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Header and rows, without comments.
    pub fn body(&self) -> Result<String> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(&self.header)?;
        for row in &self.rows {
            writer.write_record(row)?;
        }
        let bytes = writer
            .into_inner()
            .map_err(|e| Error::io("<memory>", e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn render(&self) -> Result<String> {
        let mut out = String::new();
        for c in &self.comments {
            out.push_str("# ");
            out.push_str(c);
            out.push('\n');
        }
        out.push_str(&self.body()?);
        Ok(out)
    }

    pub fn write(&self, path: impl AsRef<Path>, overwrite: bool) -> Result<()> {
        write_file(path.as_ref(), self.render()?.as_bytes(), overwrite)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let comments = text
            .lines()
            .take_while(|l| l.starts_with('#'))
            .map(|l| l.trim_start_matches('#').trim_start().to_string())
            .collect();
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let header = reader.headers()?.iter().map(str::to_string).collect();
        let rows = reader
            .records()
            .map(|r| r.map(|rec| rec.iter().map(str::to_string).collect()))
            .collect::<std::result::Result<_, _>>()?;
        Ok(Self {
            comments,
            header,
            rows,
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Parses a numeric column.
    pub fn f64_column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self.column(name).ok_or_else(|| Error::Parse {
            path: "<csv>".into(),
            line: 1,
            message: format!("no column named {name:?}"),
        })?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row[idx].parse::<f64>().map_err(|_| Error::Parse {
                    path: "<csv>".into(),
                    line: i + 2,
                    message: format!("not a number: {:?}", row[idx]),
                })
            })
            .collect()
    }
}

/// Data lines of a CSV file: everything except `#` lines.
pub fn csv_body(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .flat_map(|l| [l, "\n"])
        .collect()
}

/// JSON of the `# config:` line, if present.
pub fn embedded_config(text: &str) -> Option<&str> {
    text.lines()
        .take_while(|l| l.starts_with('#'))
        .find_map(|l| l.strip_prefix(CONFIG_PREFIX))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use crate::sampler::initial_template;
    use crate::lattice::Seed;
    use proptest::prelude::*;

    fn random_template(rows: usize, cols: usize, stream: u64) -> FullTemplate {
        let g = LatticeGeometry::new(rows, cols).unwrap();
        let mut rng = stream_rng(0, stream);
        FullTemplate::new(
            initial_template(&Seed::empty(g), &mut rng),
            initial_template(&Seed::empty(g), &mut rng),
        )
        .unwrap()
    }

    #[test]
    fn iris_sized_file_parses() {
        let t = random_template(8, 128, 0);
        let text = format_template(&t);
        assert_eq!(text.lines().count(), 1 + 8 + 1 + 8);
        let back = parse_template(&text, "mem").unwrap();
        assert_eq!(back, t);
        assert_eq!(back.bit_count(), 2048);
        assert_eq!(format_template(&back), text);
    }

    #[test]
    fn all_down_template_is_all_zeros() {
        let g = LatticeGeometry::new(2, 4).unwrap();
        let down = TemplatePart::uniform(g, -1).unwrap();
        let t = FullTemplate::new(down.clone(), down).unwrap();
        assert_eq!(format_template(&t), "IRISTPL 1 2 4\n0000\n0000\n\n0000\n0000\n");
    }

    #[test]
    fn row_order_and_bit_convention() {
        let text = "# made by hand\nIRISTPL 1 2 3\n100\n011\n\n111\n000\n";
        let t = parse_template(text, "mem").unwrap();
        assert_eq!(t.real().at(0, 0), 1);
        assert_eq!(t.real().at(0, 1), -1);
        assert_eq!(t.real().at(1, 2), 1);
        assert_eq!(t.imag().at(1, 0), -1);
    }

    #[test]
    fn short_row_names_line() {
        let t = random_template(8, 128, 1);
        let mut lines: Vec<String> = format_template(&t).lines().map(String::from).collect();
        lines[3].pop();
        let text = lines.join("\n");
        match parse_template(&text, "bad.tpl") {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 4);
                assert!(message.contains("127"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_inputs() {
        assert!(parse_template("", "x").is_err());
        assert!(parse_template("IRISTPL 2 1 3\n", "x").is_err());
        assert!(parse_template("TPL 1 1 3\n", "x").is_err());
        assert!(parse_template("IRISTPL 1 1 3\n012\n\n000\n", "x").is_err());
        assert!(parse_template("IRISTPL 1 1 3\n010\n000\n", "x").is_err());
        assert!(parse_template("IRISTPL 1 1 3\n010\n\n000\n111\n", "x").is_err());
        assert!(parse_template("IRISTPL 1 1 3\n010\n", "x").is_err());
    }

    #[test]
    fn file_round_trip_and_overwrite_guard() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a_0.tpl");
        let t = random_template(4, 16, 2);
        write_template(&t, &path, false).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(read_template(&path).unwrap(), t);
        assert!(matches!(
            write_template(&t, &path, false),
            Err(Error::WouldOverwrite(_))
        ));
        write_template(&read_template(&path).unwrap(), &path, true).unwrap();
        assert_eq!(fs::read(&path).unwrap(), bytes);
        assert!(matches!(
            read_template(dir.path().join("missing.tpl")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn csv_table_round_trip() {
        let mut t = CsvTable::new(&["a", "b"]);
        t.comment("config: {\"x\":1}").comment("note");
        t.push(vec!["1".into(), "0.25".into()]);
        t.push(vec!["2".into(), "0.5".into()]);
        let text = t.render().unwrap();
        assert_eq!(embedded_config(&text), Some("{\"x\":1}"));
        assert_eq!(csv_body(&text), "a,b\n1,0.25\n2,0.5\n");
        let back = CsvTable::parse(&text).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.f64_column("b").unwrap(), vec![0.25, 0.5]);
        assert!(back.f64_column("c").is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn template_text_round_trip(rows in 1usize..6, cols in 3usize..20, stream in any::<u64>()) {
            let t = random_template(rows, cols, stream);
            let text = format_template(&t);
            let back = parse_template(&text, "mem").unwrap();
            prop_assert_eq!(&back, &t);
            prop_assert_eq!(format_template(&back), text);
        }
    }
}
