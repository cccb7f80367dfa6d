//! Plain-text file formats.
//!
//! * Matrix text: `#`-prefixed `key=value` header lines, then one row of
//!   space-separated decimals per y sample. Values use the shortest decimal
//!   that round-trips, so save then load is exact. A phase pattern may carry a
//!   second block of rows after a `# aperture` line.
//! * Graymap: ASCII portable graymap (`P2`), maxval 255. Values are scaled by
//!   the map's largest value; negatives are clipped at 0 and a sidecar
//!   `<file>.note` records how many.
//!
//! In both formats the first data row is the smallest y. All output uses LF
//! line endings.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::detector::{CountFrame, FrameMeta, SignedFrame};
use crate::experiments::{CoincidenceMap, MapMeta, PhasePattern, SignedMap};
use crate::polarization::PolarizerAngle;
use crate::{Error, Result};

pub const GRAY_MAX: u32 = 255;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MapFormat {
    MatrixText,
    Graymap,
}

impl MapFormat {
    /// `.pgm` selects the graymap, anything else matrix text.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("pgm") => MapFormat::Graymap,
            _ => MapFormat::MatrixText,
        }
    }
}

/// Anything with a regular grid of values that can be written out.
pub trait GridData {
    fn kind(&self) -> &'static str;
    fn dims(&self) -> (usize, usize);
    fn pitch(&self) -> (f64, f64);
    fn origin(&self) -> (f64, f64);
    fn values_f64(&self) -> Vec<f64>;
    /// Extra header entries.
    fn meta(&self) -> Vec<(String, String)> {
        Vec::new()
    }
}

fn polarizer_meta(p: &Option<(PolarizerAngle, PolarizerAngle)>, out: &mut Vec<(String, String)>) {
    if let Some((d1, d2)) = p {
        out.push(("delta1_deg".into(), d1.degrees().to_string()));
        out.push(("delta2_deg".into(), d2.degrees().to_string()));
    }
}

fn frame_meta(prefix: &str, m: &FrameMeta, out: &mut Vec<(String, String)>) {
    out.push((format!("{prefix}gates_opened"), m.gates_opened.to_string()));
    out.push((format!("{prefix}exposure"), m.exposure().to_string()));
    out.push((format!("{prefix}seed"), m.seed.to_string()));
}

impl GridData for CoincidenceMap {
    fn kind(&self) -> &'static str {
        "coincidence"
    }
    fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }
    fn pitch(&self) -> (f64, f64) {
        self.pitch
    }
    fn origin(&self) -> (f64, f64) {
        self.origin
    }
    fn values_f64(&self) -> Vec<f64> {
        self.values.clone()
    }
    fn meta(&self) -> Vec<(String, String)> {
        let mut out = vec![("raw_peak".into(), self.meta.raw_peak.to_string())];
        polarizer_meta(&self.meta.polarizers, &mut out);
        if !self.meta.note.is_empty() {
            out.push(("note".into(), self.meta.note.clone()));
        }
        out
    }
}

impl GridData for SignedMap {
    fn kind(&self) -> &'static str {
        "signed"
    }
    fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }
    fn pitch(&self) -> (f64, f64) {
        self.pitch
    }
    fn origin(&self) -> (f64, f64) {
        self.origin
    }
    fn values_f64(&self) -> Vec<f64> {
        self.values.clone()
    }
}

impl GridData for CountFrame {
    fn kind(&self) -> &'static str {
        "counts"
    }
    fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }
    fn pitch(&self) -> (f64, f64) {
        self.pitch
    }
    fn origin(&self) -> (f64, f64) {
        self.origin
    }
    fn values_f64(&self) -> Vec<f64> {
        self.values()
    }
    fn meta(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        frame_meta("", &self.meta, &mut out);
        out
    }
}

impl GridData for SignedFrame {
    fn kind(&self) -> &'static str {
        "signed_counts"
    }
    fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }
    fn pitch(&self) -> (f64, f64) {
        self.pitch
    }
    fn origin(&self) -> (f64, f64) {
        self.origin
    }
    fn values_f64(&self) -> Vec<f64> {
        self.values()
    }
    fn meta(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        frame_meta("signal_", &self.signal, &mut out);
        frame_meta("background_", &self.background, &mut out);
        out
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn push_rows(out: &mut String, nx: usize, values: &[f64]) {
    for row in values.chunks(nx) {
        let mut first = true;
        for v in row {
            if !first {
                out.push(' ');
            }
            first = false;
            // `{}` on f64 is the shortest string that parses back exactly
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
}

fn matrix_text(data: &dyn GridData) -> String {
    let (nx, ny) = data.dims();
    let (px, py) = data.pitch();
    let (ox, oy) = data.origin();
    let mut out = String::new();
    let _ = writeln!(out, "# kind={}", data.kind());
    let _ = writeln!(out, "# nx={nx}\n# ny={ny}");
    let _ = writeln!(out, "# pitch_x={px}\n# pitch_y={py}");
    let _ = writeln!(out, "# origin_x={ox}\n# origin_y={oy}");
    for (k, v) in data.meta() {
        let _ = writeln!(out, "# {k}={}", v.replace('\n', " "));
    }
    push_rows(&mut out, nx, &data.values_f64());
    out
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".note");
    PathBuf::from(s)
}

/// Write `data` to `path` in `format`.
pub fn save_map(data: &dyn GridData, path: &Path, format: MapFormat) -> Result<()> {
    match format {
        MapFormat::MatrixText => write_file(path, &matrix_text(data)),
        MapFormat::Graymap => {
            let (nx, ny) = data.dims();
            let values = data.values_f64();
            let max = values.iter().cloned().fold(0.0f64, f64::max);
            let clipped = values.iter().filter(|&&v| v < 0.0).count();
            let mut out = format!("P2\n# kind={}\n{nx} {ny}\n{GRAY_MAX}\n", data.kind());
            for row in values.chunks(nx) {
                let line: Vec<String> = row
                    .iter()
                    .map(|&v| {
                        let g = if max > 0.0 {
                            (v.max(0.0) / max * GRAY_MAX as f64).round()
                        } else {
                            0.0
                        };
                        (g as u32).to_string()
                    })
                    .collect();
                out.push_str(&line.join(" "));
                out.push('\n');
            }
            write_file(path, &out)?;
            if clipped > 0 {
                let note = format!(
                    "{clipped} negative values clipped to 0 in {}\nscale: gray {GRAY_MAX} = {max}\n",
                    path.display()
                );
                write_file(&sidecar(path), &note)?;
            }
            Ok(())
        }
    }
}

/// Matrix text with the parsed header.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    pub header: BTreeMap<String, String>,
    pub nx: usize,
    pub ny: usize,
    /// Row-major `(y, x)`.
    pub values: Vec<f64>,
    /// Optional second block (phase patterns only).
    pub aperture: Option<Vec<f64>>,
}

impl Matrix {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.header.get(key).map(String::as_str)
    }

    fn number(&self, path: &Path, key: &str) -> Result<Option<f64>> {
        match self.get(key) {
            None => Ok(None),
            Some(s) => s.trim().parse().map(Some).map_err(|_| Error::Parse {
                path: path.display().to_string(),
                line: 0,
                msg: format!("header {key}={s} is not a number"),
            }),
        }
    }

    fn pitch_origin(&self, path: &Path) -> Result<((f64, f64), (f64, f64))> {
        let n = |k| self.number(path, k);
        Ok((
            (n("pitch_x")?.unwrap_or(1.0), n("pitch_y")?.unwrap_or(1.0)),
            (n("origin_x")?.unwrap_or(0.0), n("origin_y")?.unwrap_or(0.0)),
        ))
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Read a matrix-text file.
pub fn load_matrix(path: &Path) -> Result<Matrix> {
    let text = read_text(path)?;
    let mut header = BTreeMap::new();
    let mut blocks: Vec<Vec<Vec<f64>>> = vec![Vec::new()];
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if let Some(c) = t.strip_prefix('#') {
            let c = c.trim();
            if c == "aperture" {
                blocks.push(Vec::new());
            } else if let Some((k, v)) = c.split_once('=') {
                header.insert(k.trim().to_string(), v.trim().to_string());
            }
            continue;
        }
        let row = t
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(path, lineno, format!("not a finite number: {tok:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        let block = blocks.last_mut().expect("at least one block");
        if let Some(first) = block.first() {
            if first.len() != row.len() {
                return Err(parse_err(
                    path,
                    lineno,
                    format!("row has {} values, expected {}", row.len(), first.len()),
                ));
            }
        }
        block.push(row);
    }
    if blocks.len() > 2 {
        return Err(parse_err(path, 0, "more than one aperture block"));
    }
    let main = &blocks[0];
    if main.is_empty() {
        return Err(parse_err(path, 0, "no data rows"));
    }
    let (nx, ny) = (main[0].len(), main.len());
    let aperture = match blocks.get(1) {
        None => None,
        Some(b) if b.len() == ny && b.iter().all(|r| r.len() == nx) => Some(b.concat()),
        Some(_) => {
            return Err(parse_err(
                path,
                0,
                "aperture block does not match the data grid",
            ))
        }
    };
    Ok(Matrix {
        header,
        nx,
        ny,
        values: main.concat(),
        aperture,
    })
}

/// Read back a map written by [`save_map`] in matrix text.
pub fn load_map(path: &Path) -> Result<CoincidenceMap> {
    let m = load_matrix(path)?;
    let (pitch, origin) = m.pitch_origin(path)?;
    if m.values.iter().any(|v| *v < 0.0) {
        return Err(parse_err(path, 0, "coincidence map has negative values"));
    }
    let polarizers = match (m.number(path, "delta1_deg")?, m.number(path, "delta2_deg")?) {
        (Some(a), Some(b)) => Some((
            PolarizerAngle::from_degrees(a)?,
            PolarizerAngle::from_degrees(b)?,
        )),
        _ => None,
    };
    let raw_peak = m.number(path, "raw_peak")?;
    let meta = MapMeta {
        polarizers,
        raw_peak: 0.0,
        note: m.get("note").unwrap_or_default().to_string(),
    };
    let mut map =
        CoincidenceMap::from_raw_parts(m.nx, m.ny, pitch, origin, m.values.clone(), meta)?;
    if let Some(p) = raw_peak {
        // values were written normalised: keep them as they are on disk
        map.values = m.values;
        map.meta.raw_peak = p;
    }
    Ok(map)
}

/// Write a pattern as matrix text (`kind=phase`, radians). The aperture block
/// is written only when some pixel is not fully open.
pub fn save_pattern(pattern: &PhasePattern, path: &Path) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "# kind=phase");
    let _ = writeln!(out, "# nx={}\n# ny={}", pattern.nx, pattern.ny);
    let _ = writeln!(out, "# pitch={}", pattern.pitch);
    let _ = writeln!(
        out,
        "# origin_x={}\n# origin_y={}",
        pattern.origin.0, pattern.origin.1
    );
    push_rows(&mut out, pattern.nx, &pattern.phase);
    if pattern.aperture.iter().any(|&a| a != 1.0) {
        out.push_str("# aperture\n");
        push_rows(&mut out, pattern.nx, &pattern.aperture);
    }
    write_file(path, &out)
}

/// Load a phase pattern from an ASCII graymap or a matrix-text file.
///
/// Gray level `g` becomes `φ = phase_scale * g / g_max`, where `g_max` is the
/// graymap maxval or, for a plain matrix, its largest entry. A matrix written
/// by [`save_pattern`] (`kind=phase`) is read as radians, unscaled, with its own
/// pitch and origin. Otherwise the pattern is centred with pixel pitch `pitch`.
pub fn load_pattern(path: &Path, phase_scale: f64, pitch: f64) -> Result<PhasePattern> {
    let text = read_text(path)?;
    if text.trim_start().starts_with("P2") {
        let (nx, ny, maxval, gray) = parse_pgm(path, &text)?;
        let phase = gray
            .iter()
            .map(|&g| phase_scale * g as f64 / maxval as f64)
            .collect();
        return PhasePattern::centered(nx, ny, pitch, phase);
    }
    let m = load_matrix(path)?;
    if m.get("kind") == Some("phase") {
        let pitch = m.number(path, "pitch")?.unwrap_or(pitch);
        let origin = (
            m.number(path, "origin_x")?
                .unwrap_or(-0.5 * pitch * (m.nx as f64 - 1.0)),
            m.number(path, "origin_y")?
                .unwrap_or(-0.5 * pitch * (m.ny as f64 - 1.0)),
        );
        let aperture = m.aperture.clone().unwrap_or_else(|| vec![1.0; m.nx * m.ny]);
        return PhasePattern::new(m.nx, m.ny, pitch, origin, m.values, aperture);
    }
    if m.values.iter().any(|&v| v < 0.0) {
        return Err(parse_err(path, 0, "gray levels must be nonnegative"));
    }
    let gmax = m.values.iter().cloned().fold(0.0f64, f64::max);
    let phase = m
        .values
        .iter()
        .map(|&g| {
            if gmax > 0.0 {
                phase_scale * g / gmax
            } else {
                0.0
            }
        })
        .collect();
    PhasePattern::centered(m.nx, m.ny, pitch, phase)
}

/// Parse an ASCII graymap: `(width, height, maxval, pixels)`.
pub fn parse_pgm(path: &Path, text: &str) -> Result<(usize, usize, u32, Vec<u32>)> {
    let mut tokens = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let data = line.split('#').next().unwrap_or("");
        tokens.extend(data.split_whitespace().map(|t| (idx + 1, t)));
    }
    let mut it = tokens.into_iter();
    match it.next() {
        Some((_, "P2")) => {}
        Some((l, t)) => {
            return Err(parse_err(
                path,
                l,
                format!("expected P2 magic, found {t:?}"),
            ))
        }
        None => return Err(parse_err(path, 1, "empty file")),
    }
    let mut header = |what: &str| -> Result<u32> {
        let (l, t) = it
            .next()
            .ok_or_else(|| parse_err(path, 0, format!("missing {what}")))?;
        t.parse::<u32>().map_err(|_| {
            parse_err(
                path,
                l,
                format!("{what} is not a nonnegative integer: {t:?}"),
            )
        })
    };
    let (w, h, maxval) = (header("width")?, header("height")?, header("maxval")?);
    if w == 0 || h == 0 {
        return Err(parse_err(path, 0, "empty image"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(parse_err(path, 0, format!("maxval {maxval} out of range")));
    }
    let n = w as usize * h as usize;
    let mut pixels = Vec::with_capacity(n);
    for (l, t) in it.by_ref().take(n) {
        let g: u32 = t.parse().map_err(|_| {
            parse_err(
                path,
                l,
                format!("pixel is not a nonnegative integer: {t:?}"),
            )
        })?;
        if g > maxval {
            return Err(parse_err(
                path,
                l,
                format!("pixel {g} exceeds maxval {maxval}"),
            ));
        }
        pixels.push(g);
    }
    if pixels.len() < n {
        return Err(parse_err(
            path,
            0,
            format!("expected {n} pixels, found {}", pixels.len()),
        ));
    }
    if let Some((l, _)) = it.next() {
        return Err(parse_err(path, l, "trailing data after the last pixel"));
    }
    Ok((w as usize, h as usize, maxval, pixels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use std::f64::consts::PI;

    fn sample_map() -> CoincidenceMap {
        let g = GridSpec::new(5, 3, 2e-3, 1e-3).unwrap();
        let raw = (0..15)
            .map(|k| (k as f64 * 0.37).sin().abs() / 3.0)
            .collect();
        let meta = MapMeta {
            polarizers: Some((PolarizerAngle::diag_minus(), PolarizerAngle::diag_plus())),
            raw_peak: 0.0,
            note: "test map".into(),
        };
        CoincidenceMap::from_raw(&g, raw, meta).unwrap()
    }

    #[test]
    fn matrix_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.txt");
        let m = sample_map();
        save_map(&m, &p, MapFormat::MatrixText).unwrap();
        let back = load_map(&p).unwrap();
        assert_eq!(back, m);
        let text = fs::read_to_string(&p).unwrap();
        assert!(!text.contains('\r'));
        assert!(text.starts_with("# kind=coincidence\n"));
    }

    #[test]
    fn zero_map_writes_zeros() {
        let dir = tempfile::tempdir().unwrap();
        let g = GridSpec::new(3, 2, 1.0, 1.0).unwrap();
        let m = CoincidenceMap::from_raw(&g, vec![0.0; 6], MapMeta::default()).unwrap();
        let p = dir.path().join("z.txt");
        save_map(&m, &p, MapFormat::MatrixText).unwrap();
        let mat = load_matrix(&p).unwrap();
        assert!(mat.values.iter().all(|&v| v == 0.0));
        let q = dir.path().join("z.pgm");
        save_map(&m, &q, MapFormat::Graymap).unwrap();
        let (_, _, _, px) = parse_pgm(&q, &fs::read_to_string(&q).unwrap()).unwrap();
        assert!(px.iter().all(|&g| g == 0));
    }

    #[test]
    fn graymap_scales_and_clips() {
        let dir = tempfile::tempdir().unwrap();
        let s = SignedMap {
            nx: 2,
            ny: 2,
            pitch: (1.0, 1.0),
            origin: (0.0, 0.0),
            values: vec![-1.0, 0.0, 0.5, 2.0],
        };
        let p = dir.path().join("s.pgm");
        save_map(&s, &p, MapFormat::Graymap).unwrap();
        let (w, h, maxval, px) = parse_pgm(&p, &fs::read_to_string(&p).unwrap()).unwrap();
        assert_eq!((w, h, maxval), (2, 2, 255));
        assert_eq!(px, vec![0, 0, 64, 255]);
        let note = fs::read_to_string(sidecar(&p)).unwrap();
        assert!(note.starts_with("1 negative"));
    }

    #[test]
    fn pattern_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mut pat =
            PhasePattern::from_fn(7, 4, 12.5e-6, |x, y| (x * 1e5).sin() + y * 3e4).unwrap();
        let p = dir.path().join("pat.txt");
        save_pattern(&pat, &p).unwrap();
        assert_eq!(load_pattern(&p, PI, 1.0).unwrap(), pat);
        pat.aperture[3] = 0.25;
        save_pattern(&pat, &p).unwrap();
        assert_eq!(load_pattern(&p, PI, 1.0).unwrap(), pat);
    }

    #[test]
    fn pgm_patterns() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.pgm");
        fs::write(&p, "P2\n# made by hand\n3 2 # size\n255\n0 0 0\n0 0 0\n").unwrap();
        let pat = load_pattern(&p, PI, 8e-6).unwrap();
        assert!(pat.phase.iter().all(|&v| v == 0.0));
        assert_eq!(pat.pitch, 8e-6);
        assert!(pat.aperture.iter().all(|&a| a == 1.0));

        fs::write(&p, "P2\n4 1\n200\n0 200 200 0\n").unwrap();
        let pat = load_pattern(&p, PI, 8e-6).unwrap();
        assert_eq!(pat.phase, vec![0.0, PI, PI, 0.0]);
        // half max gray is φ = π/2 at the default scale
        fs::write(&p, "P2\n2 1\n254\n127 254\n").unwrap();
        assert_eq!(load_pattern(&p, PI, 1.0).unwrap().phase, vec![PI / 2.0, PI]);
    }

    #[test]
    fn plain_matrix_pattern_uses_its_maximum() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.txt");
        fs::write(&p, "0 1\n2 0\n").unwrap();
        let pat = load_pattern(&p, PI, 1e-5).unwrap();
        assert_eq!(pat.phase, vec![0.0, PI / 2.0, PI, 0.0]);
        fs::write(&p, "0 0\n0 0\n").unwrap();
        assert!(load_pattern(&p, PI, 1e-5)
            .unwrap()
            .phase
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn malformed_inputs_report_lines() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.txt");
        fs::write(&p, "# kind=phase\n1 2\n3 x\n").unwrap();
        match load_pattern(&p, PI, 1.0) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        fs::write(&p, "1 2\n3\n").unwrap();
        assert!(matches!(load_matrix(&p), Err(Error::Parse { line: 2, .. })));
        fs::write(&p, "# only a header\n").unwrap();
        assert!(load_matrix(&p).is_err());
        let q = dir.path().join("bad.pgm");
        fs::write(&q, "P2\n2 2\n10\n1 2\n3 11\n").unwrap();
        assert!(matches!(
            load_pattern(&q, PI, 1.0),
            Err(Error::Parse { line: 5, .. })
        ));
        fs::write(&q, "P2\n2 2\n10\n1 2 3\n").unwrap();
        assert!(load_pattern(&q, PI, 1.0).is_err());
        fs::write(&q, "P2\n0 2\n10\n").unwrap();
        assert!(load_pattern(&q, PI, 1.0).is_err());
        assert!(matches!(
            load_pattern(&dir.path().join("missing.pgm"), PI, 1.0),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn counts_round_trip_as_integers() {
        let dir = tempfile::tempdir().unwrap();
        let f = CountFrame {
            nx: 2,
            ny: 1,
            pitch: (1e-5, 1e-5),
            origin: (0.0, 0.0),
            counts: vec![3, 12345678901],
            meta: FrameMeta {
                gates_opened: 99,
                exposure_bits: 1.5f64.to_bits(),
                seed: 4,
            },
        };
        let p = dir.path().join("c.txt");
        save_map(&f, &p, MapFormat::MatrixText).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.contains("\n3 12345678901\n"));
        let m = load_matrix(&p).unwrap();
        assert_eq!(m.get("gates_opened"), Some("99"));
        assert_eq!(m.get("exposure"), Some("1.5"));
    }
}
