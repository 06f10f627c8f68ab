//! Line-delimited persistence of branches and sheets.
//!
//! Every file starts with a header object followed by one object per state. Keys
//! are written in sorted order and every float with 17 significant digits, so a
//! read followed by a write reproduces the file byte for byte. Non-finite floats
//! are stored as the strings `"NaN"`, `"inf"` and `"-inf"`.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::continuation::{Branch, BranchEvent, ContinuationConfig, EventKind, Origin};
use crate::error::{Error, Result};
use crate::spectral::{CosineSeries, SteadyState};
use crate::symbol::{BifurcationPoint, SymbolParams};
use crate::twodim::{Sheet, SheetOptions, SheetPoint};

pub const BRANCH_KIND: &str = "branch";
pub const SHEET_KIND: &str = "sheet";

fn float(v: f64) -> Value {
    if v.is_finite() {
        Value::from(v)
    } else if v.is_nan() {
        Value::from("NaN")
    } else if v > 0.0 {
        Value::from("inf")
    } else {
        Value::from("-inf")
    }
}

fn write_canonical(v: &Value, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                let _ = write!(out, "{:.16e}", n.as_f64().unwrap());
            } else {
                let _ = write!(out, "{n}");
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(a) => {
            out.push('[');
            for (i, x) in a.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(x, out);
            }
            out.push(']');
        }
        Value::Object(m) => {
            out.push('{');
            let mut keys: Vec<&String> = m.keys().collect();
            keys.sort();
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(k.clone()).to_string());
                out.push(':');
                write_canonical(&m[k], out);
            }
            out.push('}');
        }
    }
}

/// Serializes `v` on one line with sorted keys and 17-digit floats.
pub fn canonical_line(v: &Value) -> String {
    let mut s = String::new();
    write_canonical(v, &mut s);
    s
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("plain data serializes")
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| Error::Domain(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Sidecar path holding run metadata, `<path>.meta.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

pub fn write_sidecar(path: &Path, meta: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(meta).expect("json value");
    text.push('\n');
    write_atomic(&sidecar_path(path), text.as_bytes())
}

struct Line<'a> {
    no: usize,
    map: &'a Map<String, Value>,
}

impl<'a> Line<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse { line: self.no, msg: msg.into() }
    }

    fn get(&self, key: &str) -> Result<&'a Value> {
        self.map.get(key).ok_or_else(|| self.err(format!("missing key \"{key}\"")))
    }

    fn f64(&self, key: &str) -> Result<f64> {
        value_f64(self.get(key)?).ok_or_else(|| self.err(format!("\"{key}\" is not a number")))
    }

    fn usize(&self, key: &str) -> Result<usize> {
        self.get(key)?.as_u64().map(|v| v as usize).ok_or_else(|| self.err(format!("\"{key}\" is not an integer")))
    }

    fn bool(&self, key: &str) -> Result<bool> {
        self.get(key)?.as_bool().ok_or_else(|| self.err(format!("\"{key}\" is not a boolean")))
    }

    fn f64s(&self, key: &str) -> Result<Vec<f64>> {
        let arr = self.get(key)?.as_array().ok_or_else(|| self.err(format!("\"{key}\" is not an array")))?;
        arr.iter().map(|v| value_f64(v).ok_or_else(|| self.err(format!("non-numeric entry in \"{key}\"")))).collect()
    }

    fn typed<T: DeserializeOwned>(&self, key: &str) -> Result<T> {
        serde_json::from_value(self.get(key)?.clone()).map_err(|e| self.err(format!("bad \"{key}\": {e}")))
    }
}

fn value_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => match s.as_str() {
            "NaN" => Some(f64::NAN),
            "inf" => Some(f64::INFINITY),
            "-inf" => Some(f64::NEG_INFINITY),
            _ => None,
        },
        _ => None,
    }
}

fn parse_lines(text: &str) -> Result<Vec<(usize, Map<String, Value>)>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| match serde_json::from_str::<Value>(l) {
            Ok(Value::Object(m)) => Ok((i + 1, m)),
            Ok(_) => Err(Error::Parse { line: i + 1, msg: "expected an object".into() }),
            Err(e) => Err(Error::Parse { line: i + 1, msg: e.to_string() }),
        })
        .collect()
}

fn check_kind(line: &Line, kind: &str) -> Result<()> {
    match line.get("kind")?.as_str() {
        Some(k) if k == kind => Ok(()),
        Some(k) => Err(line.err(format!("expected a {kind} file, found {k}"))),
        None => Err(line.err("\"kind\" is not a string")),
    }
}

fn state_from_line(line: &Line) -> Result<SteadyState> {
    let coeffs = line.f64s("coeffs")?;
    let n = line.usize("N")?;
    if coeffs.len() != n + 1 || n == 0 {
        return Err(line.err(format!("N = {n} but {} coefficients", coeffs.len())));
    }
    let params = SymbolParams::new(line.f64("T")?, line.f64("kappa")?).map_err(|e| line.err(e.to_string()))?;
    Ok(SteadyState { u: CosineSeries { coeffs }, c: line.f64("c")?, params, residual_norm: line.f64("residual_norm")? })
}

fn state_fields(s: &SteadyState, m: &mut Map<String, Value>) {
    m.insert("T".into(), float(s.params.t));
    m.insert("kappa".into(), float(s.params.kappa));
    m.insert("c".into(), float(s.c));
    m.insert("N".into(), Value::from(s.order()));
    m.insert("coeffs".into(), Value::Array(s.u.coeffs.iter().map(|&a| float(a)).collect()));
    m.insert("residual_norm".into(), float(s.residual_norm));
}

/// Header plus one line per point.
pub fn branch_to_string(b: &Branch, cfg: &ContinuationConfig) -> String {
    let mut out = canonical_line(&json!({
        "kind": BRANCH_KIND,
        "version": crate::VERSION,
        "cfg": to_value(cfg),
        "origin": to_value(&b.origin),
    }));
    out.push('\n');
    for (i, s) in b.points.iter().enumerate() {
        let mut m = Map::new();
        state_fields(s, &mut m);
        let ev: Vec<&BranchEvent> = b.events.iter().filter(|e| e.index == i).collect();
        let tag = if ev.is_empty() {
            Value::Null
        } else {
            Value::from(ev.iter().map(|e| e.kind.tag()).collect::<Vec<_>>().join(","))
        };
        m.insert("event_tag".into(), tag);
        m.insert("event_c".into(), Value::Array(ev.iter().map(|e| float(e.c)).collect()));
        m.insert("ds".into(), float(b.step_sizes[i]));
        m.insert("ds_next".into(), float(b.next_steps[i]));
        m.insert("min_eig".into(), float(b.min_eigs[i]));
        out.push_str(&canonical_line(&Value::Object(m)));
        out.push('\n');
    }
    out
}

pub fn branch_from_str(text: &str) -> Result<(Branch, ContinuationConfig)> {
    let lines = parse_lines(text)?;
    let Some(((hno, hmap), rest)) = lines.split_first() else {
        return Err(Error::Parse { line: 1, msg: "empty file".into() });
    };
    let head = Line { no: *hno, map: hmap };
    check_kind(&head, BRANCH_KIND)?;
    let cfg: ContinuationConfig = head.typed("cfg")?;
    let origin: Origin = head.typed("origin")?;
    let mut b = Branch {
        points: Vec::new(),
        step_sizes: Vec::new(),
        next_steps: Vec::new(),
        min_eigs: Vec::new(),
        events: Vec::new(),
        origin,
    };
    for (no, map) in rest {
        let line = Line { no: *no, map };
        let index = b.points.len();
        b.points.push(state_from_line(&line)?);
        b.step_sizes.push(line.f64("ds")?);
        b.next_steps.push(line.f64("ds_next")?);
        b.min_eigs.push(line.f64("min_eig")?);
        let cs = line.f64s("event_c")?;
        match line.get("event_tag")? {
            Value::Null if cs.is_empty() => {}
            Value::String(tags) => {
                let kinds: Vec<EventKind> = tags
                    .split(',')
                    .map(|t| EventKind::from_tag(t).ok_or_else(|| line.err(format!("unknown event \"{t}\""))))
                    .collect::<Result<_>>()?;
                if kinds.len() != cs.len() {
                    return Err(line.err("event_tag and event_c differ in length"));
                }
                b.events.extend(kinds.into_iter().zip(cs).map(|(kind, c)| BranchEvent { index, kind, c }));
            }
            _ => return Err(line.err("bad event_tag")),
        }
    }
    if b.points.is_empty() {
        return Err(Error::Parse { line: *hno, msg: "branch has no points".into() });
    }
    Ok((b, cfg))
}

pub fn write_branch(path: &Path, b: &Branch, cfg: &ContinuationConfig) -> Result<()> {
    write_atomic(path, branch_to_string(b, cfg).as_bytes())
}

pub fn read_branch(path: &Path) -> Result<(Branch, ContinuationConfig)> {
    branch_from_str(&fs::read_to_string(path)?)
}

pub fn sheet_to_string(sheet: &Sheet, opts: &SheetOptions) -> String {
    let mut out = canonical_line(&json!({
        "kind": SHEET_KIND,
        "version": crate::VERSION,
        "base": to_value(&sheet.base),
        "options": to_value(opts),
        "resonant": sheet.resonant,
        "rho": sheet.rho.iter().map(|&v| float(v)).collect::<Vec<_>>(),
        "theta": sheet.theta.iter().map(|&v| float(v)).collect::<Vec<_>>(),
    }));
    out.push('\n');
    for pt in &sheet.samples {
        let mut m = Map::new();
        state_fields(&pt.state, &mut m);
        m.insert("t1".into(), float(pt.t1));
        m.insert("t2".into(), float(pt.t2));
        m.insert("rho".into(), float(pt.rho()));
        m.insert("theta".into(), float(pt.theta()));
        m.insert("converged".into(), Value::Bool(pt.converged));
        m.insert("r".into(), float(pt.r));
        m.insert("p".into(), float(pt.p));
        m.insert("iterations".into(), Value::from(pt.iterations));
        out.push_str(&canonical_line(&Value::Object(m)));
        out.push('\n');
    }
    out
}

pub fn sheet_from_str(text: &str) -> Result<(Sheet, SheetOptions)> {
    let lines = parse_lines(text)?;
    let Some(((hno, hmap), rest)) = lines.split_first() else {
        return Err(Error::Parse { line: 1, msg: "empty file".into() });
    };
    let head = Line { no: *hno, map: hmap };
    check_kind(&head, SHEET_KIND)?;
    let base: BifurcationPoint = head.typed("base")?;
    let opts: SheetOptions = head.typed("options")?;
    let rho = head.f64s("rho")?;
    let theta = head.f64s("theta")?;
    let mut samples = Vec::with_capacity(rest.len());
    for (no, map) in rest {
        let line = Line { no: *no, map };
        samples.push(SheetPoint {
            t1: line.f64("t1")?,
            t2: line.f64("t2")?,
            converged: line.bool("converged")?,
            r: line.f64("r")?,
            p: line.f64("p")?,
            iterations: line.usize("iterations")?,
            state: state_from_line(&line)?,
        });
    }
    if samples.len() != rho.len() * theta.len() {
        return Err(Error::Parse {
            line: *hno,
            msg: format!("{} samples for a {}x{} grid", samples.len(), theta.len(), rho.len()),
        });
    }
    Ok((Sheet { base, resonant: head.bool("resonant")?, rho, theta, samples }, opts))
}

pub fn write_sheet(path: &Path, sheet: &Sheet, opts: &SheetOptions) -> Result<()> {
    write_atomic(path, sheet_to_string(sheet, opts).as_bytes())
}

pub fn read_sheet(path: &Path) -> Result<(Sheet, SheetOptions)> {
    sheet_from_str(&fs::read_to_string(path)?)
}

/// `rho,theta,converged` with `converged` as 0/1.
pub fn convergence_map_csv(sheet: &Sheet) -> String {
    let mut out = String::from("rho,theta,converged\n");
    for pt in &sheet.samples {
        let _ = writeln!(out, "{:.16e},{:.16e},{}", pt.rho(), pt.theta(), u8::from(pt.converged));
    }
    out
}

/// Reads the `kind` field of a persisted file's header.
pub fn file_kind(text: &str) -> Result<String> {
    let lines = parse_lines(text.lines().find(|l| !l.trim().is_empty()).unwrap_or(""))?;
    let (no, map) = lines.first().ok_or_else(|| Error::Parse { line: 1, msg: "empty file".into() })?;
    let line = Line { no: *no, map };
    line.get("kind")?.as_str().map(str::to_owned).ok_or_else(|| line.err("\"kind\" is not a string"))
}
