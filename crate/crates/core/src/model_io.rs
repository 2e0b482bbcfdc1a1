//! Plain-text tabulated-model files.
//!
//! Layout:
//!
//! ```text
//! ringcov model v1
//! range=<r> mu=<m> nu=<n> n_steps=<k>
//! nugget=<g> partial_sill=<s>
//! curve <rows>
//! d,C
//! <d>,<C>                  (human-readable correlation curve)
//! pieces <m>
//! <knot>                   (m + 1 knot lines)
//! <c0>,<c1>,<c2>,<c3>      (m coefficient lines)
//! end
//! ```
//!
//! All numbers are written with 17 significant digits, which round-trips
//! `f64` exactly through decimal, so a written model evaluates bit-for-bit
//! identically after loading.

use crate::covariance::{CovarianceModel, TabulatedCovariance};
use crate::error::{Error, Result};
use crate::sphere::Radians;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

/// Rows of the embedded human-readable curve block.
pub const CURVE_ROWS: usize = 1024;

/// 17 significant digits: exact decimal round-trip for f64.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Serializes a model; requires shape provenance (μ, ν) in the structure.
pub fn model_to_string(model: &CovarianceModel) -> Result<String> {
    let t = model.structure();
    let (mu, nu) = t.shape().ok_or_else(|| {
        Error::invalid("model files require shape provenance (μ, ν); tabulate from parameters")
    })?;
    let mut out = String::new();
    out.push_str("ringcov model v1\n");
    let _ = writeln!(
        out,
        "range={} mu={} nu={} n_steps={}",
        fmt17(t.range().value()),
        fmt17(mu),
        fmt17(nu),
        t.n_steps()
    );
    let _ = writeln!(
        out,
        "nugget={} partial_sill={}",
        fmt17(model.nugget()),
        fmt17(model.partial_sill())
    );
    let _ = writeln!(out, "curve {CURVE_ROWS}");
    out.push_str("d,C\n");
    for i in 0..CURVE_ROWS {
        let d = PI * i as f64 / (CURVE_ROWS - 1) as f64;
        let c = t.evaluate(Radians::new(d))?;
        let _ = writeln!(out, "{},{}", fmt17(d), fmt17(c));
    }
    let knots = t.knots();
    let coeffs = t.coefficients();
    let _ = writeln!(out, "pieces {}", coeffs.len());
    for k in knots {
        let _ = writeln!(out, "{}", fmt17(*k));
    }
    for c in coeffs {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            fmt17(c[0]),
            fmt17(c[1]),
            fmt17(c[2]),
            fmt17(c[3])
        );
    }
    out.push_str("end\n");
    Ok(out)
}

pub fn write_model(model: &CovarianceModel, path: &Path) -> Result<()> {
    let text = model_to_string(model)?;
    std::fs::write(path, text)?;
    Ok(())
}

struct LineReader<'a> {
    lines: std::str::Lines<'a>,
    line_no: usize,
}

impl<'a> LineReader<'a> {
    fn new(text: &'a str) -> Self {
        LineReader {
            lines: text.lines(),
            line_no: 0,
        }
    }

    fn next(&mut self) -> Result<&'a str> {
        self.line_no += 1;
        self.lines.next().ok_or(Error::ModelFile {
            line: self.line_no,
            msg: "unexpected end of file".into(),
        })
    }

    fn fail(&self, msg: impl Into<String>) -> Error {
        Error::ModelFile {
            line: self.line_no,
            msg: msg.into(),
        }
    }
}

fn parse_f64(reader: &LineReader<'_>, text: &str, what: &str) -> Result<f64> {
    text.trim()
        .parse::<f64>()
        .map_err(|e| reader.fail(format!("bad {what} '{text}': {e}")))
}

fn expect_key<'a>(reader: &LineReader<'_>, token: Option<&'a str>, key: &str) -> Result<&'a str> {
    let token = token.ok_or_else(|| reader.fail(format!("missing {key}=")))?;
    token
        .strip_prefix(key)
        .and_then(|rest| rest.strip_prefix('='))
        .ok_or_else(|| reader.fail(format!("expected {key}=..., got '{token}'")))
}

/// Parses a model file produced by [`model_to_string`].
pub fn model_from_string(text: &str) -> Result<CovarianceModel> {
    let mut reader = LineReader::new(text);
    let header = reader.next()?;
    if header.trim() != "ringcov model v1" {
        return Err(reader.fail(format!("unrecognized header '{header}'")));
    }

    let line = reader.next()?;
    let mut tokens = line.split_whitespace();
    let range = parse_f64(
        &reader,
        expect_key(&reader, tokens.next(), "range")?,
        "range",
    )?;
    let mu = parse_f64(&reader, expect_key(&reader, tokens.next(), "mu")?, "mu")?;
    let nu = parse_f64(&reader, expect_key(&reader, tokens.next(), "nu")?, "nu")?;
    let n_steps: usize = expect_key(&reader, tokens.next(), "n_steps")?
        .trim()
        .parse()
        .map_err(|e| reader.fail(format!("bad n_steps: {e}")))?;

    let line = reader.next()?;
    let mut tokens = line.split_whitespace();
    let nugget = parse_f64(
        &reader,
        expect_key(&reader, tokens.next(), "nugget")?,
        "nugget",
    )?;
    let partial_sill = parse_f64(
        &reader,
        expect_key(&reader, tokens.next(), "partial_sill")?,
        "partial_sill",
    )?;

    let line = reader.next()?;
    let curve_rows: usize = line
        .strip_prefix("curve ")
        .ok_or_else(|| reader.fail("expected 'curve <rows>'"))?
        .trim()
        .parse()
        .map_err(|e| reader.fail(format!("bad curve row count: {e}")))?;
    let header = reader.next()?;
    if header.trim() != "d,C" {
        return Err(reader.fail("expected curve header 'd,C'"));
    }
    // The curve block is for humans and plotting; skip but sanity-check it.
    for _ in 0..curve_rows {
        let row = reader.next()?;
        let mut cols = row.split(',');
        for what in ["d", "C"] {
            let cell = cols
                .next()
                .ok_or_else(|| reader.fail(format!("curve row missing {what}")))?;
            parse_f64(&reader, cell, what)?;
        }
    }

    let line = reader.next()?;
    let n_pieces: usize = line
        .strip_prefix("pieces ")
        .ok_or_else(|| reader.fail("expected 'pieces <count>'"))?
        .trim()
        .parse()
        .map_err(|e| reader.fail(format!("bad piece count: {e}")))?;
    let mut knots = Vec::with_capacity(n_pieces + 1);
    for _ in 0..=n_pieces {
        let line = reader.next()?;
        knots.push(parse_f64(&reader, line, "knot")?);
    }
    let mut coeffs = Vec::with_capacity(n_pieces);
    for _ in 0..n_pieces {
        let line = reader.next()?;
        let mut cells = line.split(',');
        let mut c = [0.0; 4];
        for slot in &mut c {
            let cell = cells
                .next()
                .ok_or_else(|| reader.fail("coefficient row needs 4 entries"))?;
            *slot = parse_f64(&reader, cell, "coefficient")?;
        }
        coeffs.push(c);
    }
    let line = reader.next()?;
    if line.trim() != "end" {
        return Err(reader.fail("expected trailing 'end'"));
    }

    let structure = TabulatedCovariance::from_parts(
        Radians::new(range),
        Some((mu, nu)),
        n_steps,
        knots,
        coeffs,
    )
    .map_err(|e| Error::ModelFile {
        line: 0,
        msg: format!("inconsistent tabulation: {e}"),
    })?;
    CovarianceModel::new(nugget, partial_sill, structure)
}

pub fn read_model(path: &Path) -> Result<CovarianceModel> {
    let text = std::fs::read_to_string(path)?;
    model_from_string(&text)
}
