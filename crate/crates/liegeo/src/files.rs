//! File formats: model description JSON, trajectory CSV/JSON, and schedule
//! JSON. Writers are deterministic (fixed 17-significant-digit decimal
//! formatting in CSV, stable key order everywhere) so identical inputs give
//! byte-identical outputs; readers reject non-finite numbers and report
//! positions for malformed input.
//!
//! Indices in all file formats are 1-based.

use std::collections::{BTreeMap, HashSet};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::algebra::StructureConstants;
use crate::error::{Error, FileError};
use crate::geodesics::{IntegratorConfig, LieModel, Trajectory};
use crate::group::Representation;
use crate::reachability::{ControlSchedule, Segment};

/// Fixed decimal formatting with 17 significant digits; round-trips f64
/// exactly.
pub fn format_g17(x: f64) -> String {
    format!("{x:.16e}")
}

// ---------------------------------------------------------------------------
// model files
// ---------------------------------------------------------------------------

/// Sparse structure-constant entry [e_i, e_j] = value · e_k (1-based).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScEntry {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub value: f64,
}

/// Matrix representation block: n row-major d×d matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepFile {
    pub d: usize,
    pub mats: Vec<Vec<f64>>,
}

/// A user-supplied model description. Only i < j structure-constant entries
/// are required; missing mirrors are filled antisymmetrically, while
/// explicitly given mirrors are kept as-is (so validation can exercise
/// violations).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub name: String,
    pub n: usize,
    pub r: usize,
    pub structure_constants: Vec<ScEntry>,
    pub representation: RepFile,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
}

/// Parses and structurally validates a model file.
pub fn model_from_json(text: &str) -> Result<ModelFile, FileError> {
    let mf: ModelFile = serde_json::from_str(text)?;
    if mf.n == 0 {
        return Err(FileError::malformed("model", 0, "n must be positive"));
    }
    let mut seen = HashSet::new();
    for (pos, e) in mf.structure_constants.iter().enumerate() {
        if e.i == 0 || e.j == 0 || e.k == 0 || e.i > mf.n || e.j > mf.n || e.k > mf.n {
            return Err(FileError::malformed(
                "model",
                pos + 1,
                format!("entry ({},{},{}) out of range 1..={}", e.i, e.j, e.k, mf.n),
            ));
        }
        if !e.value.is_finite() {
            return Err(FileError::malformed(
                "model",
                pos + 1,
                format!("entry ({},{},{}) has non-finite value", e.i, e.j, e.k),
            ));
        }
        if !seen.insert((e.i, e.j, e.k)) {
            return Err(FileError::malformed(
                "model",
                pos + 1,
                format!("duplicate entry ({},{},{})", e.i, e.j, e.k),
            ));
        }
    }
    if mf.representation.mats.len() != mf.n {
        return Err(FileError::malformed(
            "model",
            0,
            format!(
                "representation has {} matrices, expected n = {}",
                mf.representation.mats.len(),
                mf.n
            ),
        ));
    }
    let d = mf.representation.d;
    if d == 0 {
        return Err(FileError::malformed("model", 0, "d must be positive"));
    }
    for (pos, m) in mf.representation.mats.iter().enumerate() {
        if m.len() != d * d {
            return Err(FileError::malformed(
                "model",
                pos + 1,
                format!("matrix {} has {} entries, expected {}", pos + 1, m.len(), d * d),
            ));
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(FileError::malformed(
                "model",
                pos + 1,
                format!("matrix {} has non-finite entries", pos + 1),
            ));
        }
    }
    Ok(mf)
}

/// Raw tensor from the sparse entries: explicit entries as given, missing
/// mirrors filled with the negated value.
pub fn model_file_tensor(mf: &ModelFile) -> Result<StructureConstants, Error> {
    let n = mf.n;
    let mut c = vec![0.0; n * n * n];
    let explicit: HashSet<(usize, usize, usize)> = mf
        .structure_constants
        .iter()
        .map(|e| (e.i, e.j, e.k))
        .collect();
    for e in &mf.structure_constants {
        c[((e.i - 1) * n + (e.j - 1)) * n + (e.k - 1)] = e.value;
    }
    for e in &mf.structure_constants {
        if !explicit.contains(&(e.j, e.i, e.k)) {
            c[((e.j - 1) * n + (e.i - 1)) * n + (e.k - 1)] = -e.value;
        }
    }
    StructureConstants::from_raw(n, c)
}

/// Representation object from the file block (row-major input).
pub fn model_file_representation(mf: &ModelFile) -> Result<Representation, Error> {
    let d = mf.representation.d;
    let mats = mf
        .representation
        .mats
        .iter()
        .map(|m| DMatrix::from_row_slice(d, d, m))
        .collect();
    Representation::new(d, mats)
}

/// Full load: parse pieces and run every load-time validation.
pub fn load_model(mf: &ModelFile) -> Result<LieModel, Error> {
    let sc = model_file_tensor(mf)?;
    let rep = model_file_representation(mf)?;
    LieModel::new(mf.name.clone(), sc, rep, mf.r, mf.params.clone())
}

/// Serializes a built-in or user model to the file schema (always writes the
/// full antisymmetric pair set for clarity, i < j entries only).
pub fn model_to_file(model: &LieModel) -> ModelFile {
    let n = model.dim();
    let mut entries = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            for k in 0..n {
                let v = model.sc.get(i, j, k);
                if v != 0.0 {
                    entries.push(ScEntry {
                        i: i + 1,
                        j: j + 1,
                        k: k + 1,
                        value: v,
                    });
                }
            }
        }
    }
    let d = model.rep_dim();
    let mats = (0..n)
        .map(|i| {
            let m = model.rep.basis_matrix(i);
            (0..d)
                .flat_map(|row| (0..d).map(move |col| m[(row, col)]))
                .collect()
        })
        .collect();
    ModelFile {
        name: model.name.clone(),
        n,
        r: model.rank,
        structure_constants: entries,
        representation: RepFile { d, mats },
        params: model.params.clone(),
    }
}

// ---------------------------------------------------------------------------
// trajectory files
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub max_speed_drift: f64,
    pub max_hamiltonian_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub g: Vec<f64>,
    pub psi: Vec<f64>,
    pub u: Vec<f64>,
}

/// On-disk trajectory: header (model, ψ0, grid, method, diagnostics) plus
/// rows (t, g row-major, ψ_1..ψ_n, u_1..u_r).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryFile {
    pub model: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
    pub psi0: Vec<f64>,
    pub h: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub method: String,
    pub speed: f64,
    pub diagnostics: DiagnosticsRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stamp: Option<String>,
    pub d: usize,
    pub n: usize,
    pub r: usize,
    pub rows: Vec<TrajectoryRow>,
}

/// Packs an integrated trajectory for serialization; `decimate` keeps every
/// N-th row (diagnostics always reflect the full grid).
pub fn trajectory_file(
    model: &LieModel,
    psi0: &DVector<f64>,
    traj: &Trajectory,
    cfg: &IntegratorConfig,
    decimate: usize,
    stamp: Option<String>,
) -> Result<TrajectoryFile, Error> {
    let decimate = decimate.max(1);
    let d = model.rep_dim();
    let n = model.dim();
    let r = model.rank;
    let mut rows = Vec::new();
    for (idx, s) in traj.samples.iter().enumerate() {
        if idx % decimate != 0 {
            continue;
        }
        let g: Vec<f64> = (0..d)
            .flat_map(|row| (0..d).map(move |col| s.g[(row, col)]))
            .collect();
        let psi: Vec<f64> = s.psi.iter().copied().collect();
        let u: Vec<f64> = s.u.iter().take(r).copied().collect();
        if !s.t.is_finite()
            || g.iter().any(|x| !x.is_finite())
            || psi.iter().any(|x| !x.is_finite())
            || u.iter().any(|x| !x.is_finite())
        {
            return Err(Error::NonFiniteState { t: s.t });
        }
        rows.push(TrajectoryRow { t: s.t, g, psi, u });
    }
    Ok(TrajectoryFile {
        model: model.name.clone(),
        params: model.params.clone(),
        psi0: psi0.iter().copied().collect(),
        h: cfg.step,
        horizon: cfg.horizon,
        method: traj.method.as_str().to_string(),
        speed: traj.speed,
        diagnostics: DiagnosticsRecord {
            max_speed_drift: traj.diagnostics.max_speed_drift,
            max_hamiltonian_drift: traj.diagnostics.max_hamiltonian_drift,
        },
        stamp,
        d,
        n,
        r,
        rows,
    })
}

pub fn trajectory_to_csv(tf: &TrajectoryFile) -> String {
    let mut out = String::new();
    out.push_str("# liegeo-trajectory v1\n");
    out.push_str(&format!("# model: {}\n", tf.model));
    if !tf.params.is_empty() {
        let params: Vec<String> = tf
            .params
            .iter()
            .map(|(k, v)| format!("{k}={}", format_g17(*v)))
            .collect();
        out.push_str(&format!("# params: {}\n", params.join(",")));
    }
    let psi0: Vec<String> = tf.psi0.iter().map(|x| format_g17(*x)).collect();
    out.push_str(&format!("# psi0: {}\n", psi0.join(",")));
    out.push_str(&format!("# dims: d={},n={},r={}\n", tf.d, tf.n, tf.r));
    out.push_str(&format!("# h: {}\n", format_g17(tf.h)));
    out.push_str(&format!("# T: {}\n", format_g17(tf.horizon)));
    out.push_str(&format!("# method: {}\n", tf.method));
    out.push_str(&format!("# speed: {}\n", format_g17(tf.speed)));
    out.push_str(&format!(
        "# max_speed_drift: {}\n",
        format_g17(tf.diagnostics.max_speed_drift)
    ));
    out.push_str(&format!(
        "# max_hamiltonian_drift: {}\n",
        format_g17(tf.diagnostics.max_hamiltonian_drift)
    ));
    if let Some(stamp) = &tf.stamp {
        out.push_str(&format!("# stamp: {stamp}\n"));
    }
    out.push('t');
    for i in 1..=tf.d {
        for j in 1..=tf.d {
            out.push_str(&format!(",g{i}_{j}"));
        }
    }
    for i in 1..=tf.n {
        out.push_str(&format!(",psi{i}"));
    }
    for i in 1..=tf.r {
        out.push_str(&format!(",u{i}"));
    }
    out.push('\n');
    for row in &tf.rows {
        out.push_str(&format_g17(row.t));
        for x in row.g.iter().chain(&row.psi).chain(&row.u) {
            out.push(',');
            out.push_str(&format_g17(*x));
        }
        out.push('\n');
    }
    out
}

pub fn trajectory_from_csv(text: &str) -> Result<TrajectoryFile, FileError> {
    const F: &str = "trajectory csv";
    let mut header: BTreeMap<String, String> = BTreeMap::new();
    let mut lines = text.lines().enumerate().peekable();
    let mut column_line = None;
    for (no, line) in lines.by_ref() {
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if rest == "liegeo-trajectory v1" || rest.is_empty() {
                continue;
            }
            let (key, value) = rest.split_once(':').ok_or_else(|| {
                FileError::malformed(F, no + 1, format!("header line without ':': {rest}"))
            })?;
            header.insert(key.trim().to_string(), value.trim().to_string());
        } else {
            column_line = Some((no, line));
            break;
        }
    }
    let (cols_no, cols) =
        column_line.ok_or_else(|| FileError::malformed(F, 0, "missing column header"))?;
    if !cols.starts_with('t') {
        return Err(FileError::malformed(F, cols_no + 1, "column header must start with t"));
    }

    let need = |key: &str| -> Result<&String, FileError> {
        header
            .get(key)
            .ok_or_else(|| FileError::malformed(F, 0, format!("missing header line '# {key}: ...'")))
    };
    let parse_f64 = |raw: &str, no: usize| -> Result<f64, FileError> {
        let v: f64 = raw
            .trim()
            .parse()
            .map_err(|_| FileError::malformed(F, no, format!("bad number '{raw}'")))?;
        if !v.is_finite() {
            return Err(FileError::malformed(F, no, format!("non-finite number '{raw}'")));
        }
        Ok(v)
    };

    let dims_raw = need("dims")?.clone();
    let mut dims: BTreeMap<&str, usize> = BTreeMap::new();
    for piece in dims_raw.split(',') {
        let (k, v) = piece
            .split_once('=')
            .ok_or_else(|| FileError::malformed(F, 0, format!("bad dims entry '{piece}'")))?;
        dims.insert(
            k.trim(),
            v.trim()
                .parse()
                .map_err(|_| FileError::malformed(F, 0, format!("bad dims value '{v}'")))?,
        );
    }
    let (d, n, r) = (
        *dims.get("d").ok_or_else(|| FileError::malformed(F, 0, "dims missing d"))?,
        *dims.get("n").ok_or_else(|| FileError::malformed(F, 0, "dims missing n"))?,
        *dims.get("r").ok_or_else(|| FileError::malformed(F, 0, "dims missing r"))?,
    );
    if d == 0 || n == 0 || r == 0 || r > n || d > 64 || n > 64 {
        return Err(FileError::malformed(F, 0, format!("implausible dims d={d}, n={n}, r={r}")));
    }

    let psi0 = need("psi0")?
        .split(',')
        .map(|x| parse_f64(x, 0))
        .collect::<Result<Vec<f64>, _>>()?;
    if psi0.len() != n {
        return Err(FileError::malformed(F, 0, format!("psi0 has {} entries, expected {n}", psi0.len())));
    }

    let mut params = BTreeMap::new();
    if let Some(raw) = header.get("params") {
        for piece in raw.split(',') {
            if piece.trim().is_empty() {
                continue;
            }
            let (k, v) = piece
                .split_once('=')
                .ok_or_else(|| FileError::malformed(F, 0, format!("bad params entry '{piece}'")))?;
            params.insert(k.trim().to_string(), parse_f64(v, 0)?);
        }
    }

    let expected_cols = 1 + d * d + n + r;
    let mut rows = Vec::new();
    let mut prev_t = f64::NEG_INFINITY;
    for (no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != expected_cols {
            return Err(FileError::malformed(
                F,
                no + 1,
                format!("expected {expected_cols} fields, got {}", fields.len()),
            ));
        }
        let values = fields
            .iter()
            .map(|x| parse_f64(x, no + 1))
            .collect::<Result<Vec<f64>, _>>()?;
        let t = values[0];
        if t <= prev_t {
            return Err(FileError::malformed(F, no + 1, "time column must be strictly increasing"));
        }
        prev_t = t;
        rows.push(TrajectoryRow {
            t,
            g: values[1..1 + d * d].to_vec(),
            psi: values[1 + d * d..1 + d * d + n].to_vec(),
            u: values[1 + d * d + n..].to_vec(),
        });
    }

    Ok(TrajectoryFile {
        model: need("model")?.clone(),
        params,
        psi0,
        h: parse_f64(need("h")?, 0)?,
        horizon: parse_f64(need("T")?, 0)?,
        method: need("method")?.clone(),
        speed: parse_f64(need("speed")?, 0)?,
        diagnostics: DiagnosticsRecord {
            max_speed_drift: parse_f64(need("max_speed_drift")?, 0)?,
            max_hamiltonian_drift: parse_f64(need("max_hamiltonian_drift")?, 0)?,
        },
        stamp: header.get("stamp").cloned(),
        d,
        n,
        r,
        rows,
    })
}

pub fn trajectory_to_json(tf: &TrajectoryFile) -> String {
    serde_json::to_string(tf).expect("trajectory serialization cannot fail")
}

pub fn trajectory_from_json(text: &str) -> Result<TrajectoryFile, FileError> {
    const F: &str = "trajectory json";
    let tf: TrajectoryFile = serde_json::from_str(text)?;
    if tf.d == 0 || tf.n == 0 || tf.r == 0 || tf.r > tf.n || tf.d > 64 || tf.n > 64 {
        return Err(FileError::malformed(F, 0, "implausible dims"));
    }
    if tf.psi0.len() != tf.n {
        return Err(FileError::malformed(F, 0, "psi0 length mismatch"));
    }
    let mut prev_t = f64::NEG_INFINITY;
    for (idx, row) in tf.rows.iter().enumerate() {
        if row.g.len() != tf.d * tf.d || row.psi.len() != tf.n || row.u.len() != tf.r {
            return Err(FileError::malformed(F, idx + 1, "row length mismatch"));
        }
        if !row.t.is_finite()
            || row.g.iter().any(|x| !x.is_finite())
            || row.psi.iter().any(|x| !x.is_finite())
            || row.u.iter().any(|x| !x.is_finite())
        {
            return Err(FileError::malformed(F, idx + 1, "non-finite entry"));
        }
        if row.t <= prev_t {
            return Err(FileError::malformed(F, idx + 1, "time must be strictly increasing"));
        }
        prev_t = row.t;
    }
    let finite = [
        tf.h,
        tf.horizon,
        tf.speed,
        tf.diagnostics.max_speed_drift,
        tf.diagnostics.max_hamiltonian_drift,
    ];
    if finite.iter().any(|x| !x.is_finite()) || tf.psi0.iter().any(|x| !x.is_finite()) {
        return Err(FileError::malformed(F, 0, "non-finite header value"));
    }
    Ok(tf)
}

/// Reconstructs sample matrices/vectors from a parsed trajectory file.
pub fn rows_to_samples(tf: &TrajectoryFile) -> Vec<crate::geodesics::Sample> {
    tf.rows
        .iter()
        .map(|row| {
            let g = DMatrix::from_row_slice(tf.d, tf.d, &row.g);
            let psi = DVector::from_vec(row.psi.clone());
            let mut u = DVector::zeros(tf.n);
            for (i, v) in row.u.iter().enumerate() {
                u[i] = *v;
            }
            crate::geodesics::Sample {
                t: row.t,
                g_comp: DMatrix::zeros(tf.d, tf.d),
                psi_comp: DVector::zeros(tf.n),
                g,
                psi,
                u,
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// schedule files
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub duration: f64,
    pub index: usize,
    pub sign: i8,
}

/// Schedules serialize as a bare JSON list of {duration, index, sign}.
pub fn schedule_to_json(schedule: &ControlSchedule) -> String {
    let entries: Vec<ScheduleEntry> = schedule
        .segments
        .iter()
        .map(|s| ScheduleEntry {
            duration: s.duration,
            index: s.index,
            sign: s.sign,
        })
        .collect();
    serde_json::to_string_pretty(&entries).expect("schedule serialization cannot fail")
}

pub fn schedule_from_json(text: &str) -> Result<ControlSchedule, FileError> {
    const F: &str = "schedule json";
    let entries: Vec<ScheduleEntry> = serde_json::from_str(text)?;
    let mut schedule = ControlSchedule::empty();
    for (idx, e) in entries.iter().enumerate() {
        if !(e.duration >= 0.0) || !e.duration.is_finite() {
            return Err(FileError::malformed(F, idx + 1, "duration must be finite and nonnegative"));
        }
        if e.sign != 1 && e.sign != -1 {
            return Err(FileError::malformed(F, idx + 1, "sign must be 1 or -1"));
        }
        if e.index == 0 || e.index > 64 {
            return Err(FileError::malformed(F, idx + 1, "implausible index"));
        }
        schedule.segments.push(Segment {
            duration: e.duration,
            index: e.index,
            sign: e.sign,
        });
    }
    Ok(schedule)
}
