//! On-disk dataset layout and result files.
//!
//! A dataset directory holds:
//!
//! | file | columns | frame |
//! |---|---|---|
//! | `radar.csv` | `scan_id,t,px,py,pz,doppler` | radar (FLU), m, m/s |
//! | `imu.csv` | `t,fx,fy,fz,wx,wy,wz` | body (FRD), m/s², rad/s |
//! | `ground_truth.csv` (optional) | `t,px,py,pz,qw,qx,qy,qz` | nav (NED), body-to-nav quaternion |
//! | `ground_truth_velocity.csv` (optional) | `t,vx_r,vy_r,vz_r,vx_n,vy_n,vz_n` | radar velocity in radar, body velocity in nav |
//! | `calib.json` | `format_version`, `q_rb` (radar-to-body `[w,x,y,z]`), `p_rb`, `gravity`, `metadata` | |
//!
//! Numbers are written in shortest round-trip decimal form, so save/load is
//! bit-exact. Lines starting with `#` are comments.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::VelocityEstimate;
use crate::frames::{ExtrinsicCalib, ImuSample, PoseSample, RadarScan, RadarTarget, Rotation, Stamped, Vec3};
use crate::metrics::AlignedPair;
use crate::sim::Scenario;

pub const FORMAT_VERSION: u32 = 1;

pub const RADAR_FILE: &str = "radar.csv";
pub const IMU_FILE: &str = "imu.csv";
pub const TRUTH_FILE: &str = "ground_truth.csv";
pub const TRUTH_VELOCITY_FILE: &str = "ground_truth_velocity.csv";
pub const CALIB_FILE: &str = "calib.json";

const RADAR_HEADER: [&str; 6] = ["scan_id", "t", "px", "py", "pz", "doppler"];
const IMU_HEADER: [&str; 7] = ["t", "fx", "fy", "fz", "wx", "wy", "wz"];
const TRUTH_HEADER: [&str; 8] = ["t", "px", "py", "pz", "qw", "qx", "qy", "qz"];
const VELOCITY_HEADER: [&str; 7] = ["t", "vx_r", "vy_r", "vz_r", "vx_n", "vy_n", "vz_n"];
pub const ESTIMATES_HEADER: [&str; 13] = [
    "t", "vx_r", "vy_r", "vz_r", "vx_n", "vy_n", "vz_n", "inlier_ratio", "gamma_x", "gamma_y", "gamma_z",
    "constrained", "zero_velocity",
];
const ALIGNED_HEADER: [&str; 8] = ["t", "est_x", "est_y", "est_z", "gt_x", "gt_y", "gt_z", "error"];

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Metadata {
    pub name: String,
    pub source: String,
    pub seed: Option<u64>,
}

/// Truth velocity at a radar epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityTruth {
    pub t: f64,
    pub radar: Vec3,
    pub nav: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub radar: Vec<RadarScan>,
    pub imu: Vec<ImuSample>,
    pub truth: Option<Vec<PoseSample>>,
    pub truth_velocity: Option<Vec<VelocityTruth>>,
    pub calib: ExtrinsicCalib,
    pub metadata: Metadata,
}

/// Row counts of a loaded dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DatasetSummary {
    pub scans: usize,
    pub radar_rows: usize,
    pub imu_rows: usize,
    pub truth_rows: usize,
    pub truth_velocity_rows: usize,
}

impl Dataset {
    pub fn from_scenario(scenario: &Scenario, name: &str) -> Self {
        Self {
            radar: scenario.radar.clone(),
            imu: scenario.imu.clone(),
            truth: Some(scenario.truth.clone()),
            truth_velocity: Some(
                scenario
                    .truth_velocity_radar
                    .iter()
                    .zip(&scenario.truth_velocity_nav)
                    .map(|(r, n)| VelocityTruth {
                        t: r.t,
                        radar: r.value,
                        nav: n.value,
                    })
                    .collect(),
            ),
            calib: scenario.calib,
            metadata: Metadata {
                name: name.to_string(),
                source: "simulation".to_string(),
                seed: Some(scenario.config.rng_seed),
            },
        }
    }

    pub fn summary(&self) -> DatasetSummary {
        DatasetSummary {
            scans: self.radar.len(),
            radar_rows: self.radar.iter().map(|s| s.targets.len()).sum(),
            imu_rows: self.imu.len(),
            truth_rows: self.truth.as_ref().map_or(0, Vec::len),
            truth_velocity_rows: self.truth_velocity.as_ref().map_or(0, Vec::len),
        }
    }

    pub fn truth_velocity_radar(&self) -> Option<Vec<Stamped<Vec3>>> {
        self.truth_velocity
            .as_ref()
            .map(|v| v.iter().map(|s| Stamped::new(s.t, s.radar)).collect())
    }

    pub fn truth_velocity_nav(&self) -> Option<Vec<Stamped<Vec3>>> {
        self.truth_velocity
            .as_ref()
            .map(|v| v.iter().map(|s| Stamped::new(s.t, s.nav)).collect())
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// CSV writer with leading comment lines and a header row.
fn csv_writer(path: &Path, comments: &[&str], header: &[&str]) -> Result<csv::Writer<BufWriter<File>>> {
    let mut out = create(path)?;
    for c in comments {
        writeln!(out, "# {c}").map_err(|e| Error::io(path, e))?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    Ok(w)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::Malformed {
            path: path.to_path_buf(),
            line,
            msg: format!("{other:?}"),
        },
    }
}

fn fmt(values: impl IntoIterator<Item = f64>) -> Vec<String> {
    values.into_iter().map(|v| v.to_string()).collect()
}

fn finish(path: &Path, w: csv::Writer<BufWriter<File>>) -> Result<()> {
    let mut inner = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    inner.flush().map_err(|e| Error::io(path, e))
}

/// Rows of a headered CSV file with their 1-based line numbers.
struct Table {
    path: PathBuf,
    rows: Vec<(u64, csv::StringRecord)>,
}

impl Table {
    fn read(path: &Path, header: &[&str]) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(file);
        let found = reader.headers().map_err(|e| csv_error(path, e))?.clone();
        if found.iter().ne(header.iter().copied()) {
            return Err(Error::Malformed {
                path: path.to_path_buf(),
                line: found.position().map_or(1, |p| p.line()),
                msg: format!("expected header '{}', found '{}'", header.join(","), found.iter().collect::<Vec<_>>().join(",")),
            });
        }
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| csv_error(path, e))?;
            let line = record.position().map_or(0, |p| p.line());
            if record.len() != header.len() {
                return Err(Error::Malformed {
                    path: path.to_path_buf(),
                    line,
                    msg: format!("expected {} columns, found {}", header.len(), record.len()),
                });
            }
            rows.push((line, record));
        }
        Ok(Self {
            path: path.to_path_buf(),
            rows,
        })
    }

    fn malformed(&self, line: u64, msg: String) -> Error {
        Error::Malformed {
            path: self.path.clone(),
            line,
            msg,
        }
    }

    fn number(&self, line: u64, record: &csv::StringRecord, col: usize) -> Result<f64> {
        let field = &record[col];
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(self.malformed(line, format!("column {}: '{field}' is not a finite number", col + 1))),
        }
    }

    fn numbers<const N: usize>(&self, line: u64, record: &csv::StringRecord, from: usize) -> Result<[f64; N]> {
        let mut out = [0.0; N];
        for (i, v) in out.iter_mut().enumerate() {
            *v = self.number(line, record, from + i)?;
        }
        Ok(out)
    }

    /// Rejects a timestamp that does not strictly increase past `prev`.
    fn check_time(&self, line: u64, t: f64, prev: Option<f64>) -> Result<()> {
        match prev {
            Some(prev) if t <= prev => Err(Error::NonMonotonic {
                path: self.path.clone(),
                line,
                t,
                prev,
            }),
            _ => Ok(()),
        }
    }

    /// Parses rows whose first column is a strictly increasing timestamp.
    fn timed<T, const N: usize>(&self, mut build: impl FnMut(u64, [f64; N]) -> Result<T>) -> Result<Vec<T>> {
        let mut prev = None;
        let mut out = Vec::with_capacity(self.rows.len());
        for (line, record) in &self.rows {
            let values: [f64; N] = self.numbers(*line, record, 0)?;
            self.check_time(*line, values[0], prev)?;
            prev = Some(values[0]);
            out.push(build(*line, values)?);
        }
        Ok(out)
    }
}

fn v3(a: &[f64]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CalibFile {
    format_version: u32,
    q_rb: [f64; 4],
    p_rb: [f64; 3],
    gravity: f64,
    #[serde(default)]
    metadata: Metadata,
}

pub fn save_dataset(dataset: &Dataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let path = dir.join(RADAR_FILE);
    let mut w = csv_writer(&path, &["radar frame FLU; position m; doppler m/s"], &RADAR_HEADER)?;
    for (id, scan) in dataset.radar.iter().enumerate() {
        for target in &scan.targets {
            let p = target.position;
            let mut row = vec![id.to_string()];
            row.extend(fmt([scan.timestamp, p.x, p.y, p.z, target.doppler]));
            w.write_record(&row).map_err(|e| csv_error(&path, e))?;
        }
    }
    finish(&path, w)?;

    let path = dir.join(IMU_FILE);
    let mut w = csv_writer(&path, &["body frame FRD; specific force m/s^2; angular rate rad/s"], &IMU_HEADER)?;
    for m in &dataset.imu {
        let (f, g) = (m.specific_force, m.angular_rate);
        w.write_record(fmt([m.timestamp, f.x, f.y, f.z, g.x, g.y, g.z]))
            .map_err(|e| csv_error(&path, e))?;
    }
    finish(&path, w)?;

    if let Some(truth) = &dataset.truth {
        let path = dir.join(TRUTH_FILE);
        let mut w = csv_writer(&path, &["nav frame NED; position m; quaternion body-to-nav [w,x,y,z]"], &TRUTH_HEADER)?;
        for pose in truth {
            let p = pose.position;
            let [qw, qx, qy, qz] = pose.attitude.quaternion();
            w.write_record(fmt([pose.timestamp, p.x, p.y, p.z, qw, qx, qy, qz]))
                .map_err(|e| csv_error(&path, e))?;
        }
        finish(&path, w)?;
    }

    if let Some(velocity) = &dataset.truth_velocity {
        let path = dir.join(TRUTH_VELOCITY_FILE);
        let mut w = csv_writer(
            &path,
            &["radar velocity in radar frame FLU, body velocity in nav frame NED; m/s"],
            &VELOCITY_HEADER,
        )?;
        for s in velocity {
            let (r, n) = (s.radar, s.nav);
            w.write_record(fmt([s.t, r.x, r.y, r.z, n.x, n.y, n.z]))
                .map_err(|e| csv_error(&path, e))?;
        }
        finish(&path, w)?;
    }

    let calib = CalibFile {
        format_version: FORMAT_VERSION,
        q_rb: dataset.calib.rot_radar_to_body.quaternion(),
        p_rb: dataset.calib.lever_arm.into(),
        gravity: dataset.calib.gravity,
        metadata: dataset.metadata.clone(),
    };
    write_report(&calib, dir.join(CALIB_FILE))
}

fn load_radar(path: &Path) -> Result<Vec<RadarScan>> {
    let table = Table::read(path, &RADAR_HEADER)?;
    let mut scans: Vec<RadarScan> = Vec::new();
    let mut current_id: Option<u64> = None;
    for (line, record) in &table.rows {
        let line = *line;
        let id: u64 = record[0]
            .parse()
            .map_err(|_| table.malformed(line, format!("column 1: '{}' is not a scan id", &record[0])))?;
        let [t, px, py, pz, doppler] = table.numbers(line, record, 1)?;
        let target = RadarTarget::new(Vec3::new(px, py, pz), doppler).map_err(|e| table.malformed(line, e.to_string()))?;
        match (current_id, scans.last_mut()) {
            (Some(cur), Some(scan)) if cur == id => {
                if t != scan.timestamp {
                    return Err(table.malformed(
                        line,
                        format!("scan {id} changes timestamp from {} to {t}", scan.timestamp),
                    ));
                }
                scan.targets.push(target);
            }
            _ => {
                if let Some(cur) = current_id {
                    if id <= cur {
                        return Err(table.malformed(line, format!("scan id {id} follows {cur}")));
                    }
                }
                table.check_time(line, t, scans.last().map(|s| s.timestamp))?;
                current_id = Some(id);
                scans.push(RadarScan {
                    timestamp: t,
                    targets: vec![target],
                });
            }
        }
    }
    Ok(scans)
}

fn load_imu(path: &Path) -> Result<Vec<ImuSample>> {
    let table = Table::read(path, &IMU_HEADER)?;
    table.timed(|_, v: [f64; 7]| {
        Ok(ImuSample {
            timestamp: v[0],
            specific_force: v3(&v[1..4]),
            angular_rate: v3(&v[4..7]),
        })
    })
}

fn load_truth(path: &Path) -> Result<Vec<PoseSample>> {
    let table = Table::read(path, &TRUTH_HEADER)?;
    table.timed(|line, v: [f64; 8]| {
        let attitude = Rotation::from_quaternion(v[4], v[5], v[6], v[7]).map_err(|e| table.malformed(line, e.to_string()))?;
        Ok(PoseSample {
            timestamp: v[0],
            position: v3(&v[1..4]),
            attitude,
        })
    })
}

fn load_truth_velocity(path: &Path) -> Result<Vec<VelocityTruth>> {
    let table = Table::read(path, &VELOCITY_HEADER)?;
    table.timed(|_, v: [f64; 7]| {
        Ok(VelocityTruth {
            t: v[0],
            radar: v3(&v[1..4]),
            nav: v3(&v[4..7]),
        })
    })
}

fn load_calib(path: &Path) -> Result<(ExtrinsicCalib, Metadata)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let malformed = |line: usize, msg: String| Error::Malformed {
        path: path.to_path_buf(),
        line: line as u64,
        msg,
    };
    let file: CalibFile = serde_json::from_str(&text).map_err(|e| malformed(e.line(), e.to_string()))?;
    if file.format_version != FORMAT_VERSION {
        return Err(malformed(
            1,
            format!("unsupported format_version {} (expected {FORMAT_VERSION})", file.format_version),
        ));
    }
    let [w, x, y, z] = file.q_rb;
    let rot = Rotation::from_quaternion(w, x, y, z).map_err(|e| malformed(1, e.to_string()))?;
    let calib = ExtrinsicCalib::new(rot, Vec3::from(file.p_rb), file.gravity).map_err(|e| malformed(1, e.to_string()))?;
    Ok((calib, file.metadata))
}

fn optional<T>(path: PathBuf, load: impl FnOnce(&Path) -> Result<T>) -> Result<Option<T>> {
    if path.exists() {
        load(&path).map(Some)
    } else {
        Ok(None)
    }
}

pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(Error::MissingFile {
            path: dir.to_path_buf(),
        });
    }
    let (calib, metadata) = load_calib(&dir.join(CALIB_FILE))?;
    Ok(Dataset {
        radar: load_radar(&dir.join(RADAR_FILE))?,
        imu: load_imu(&dir.join(IMU_FILE))?,
        truth: optional(dir.join(TRUTH_FILE), load_truth)?,
        truth_velocity: optional(dir.join(TRUTH_VELOCITY_FILE), load_truth_velocity)?,
        calib,
        metadata,
    })
}

/// One row of the estimates file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateRecord {
    pub t: f64,
    pub velocity_radar: Vec3,
    pub velocity_nav: Vec3,
    pub inlier_ratio: f64,
    pub gamma: Vec3,
    pub constrained: bool,
    pub zero_velocity: bool,
}

impl From<&VelocityEstimate> for EstimateRecord {
    fn from(e: &VelocityEstimate) -> Self {
        Self {
            t: e.timestamp,
            velocity_radar: e.velocity_radar,
            velocity_nav: e.velocity_nav,
            inlier_ratio: e.inlier_ratio,
            gamma: e.gamma_used,
            constrained: e.constrained,
            zero_velocity: e.zero_velocity,
        }
    }
}

pub fn write_estimates(estimates: &[EstimateRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(
        path,
        &["velocity_radar in radar frame FLU, velocity_nav in nav frame NED; m/s"],
        &ESTIMATES_HEADER,
    )?;
    for e in estimates {
        let (r, n, g) = (e.velocity_radar, e.velocity_nav, e.gamma);
        let mut row = fmt([e.t, r.x, r.y, r.z, n.x, n.y, n.z, e.inlier_ratio, g.x, g.y, g.z]);
        row.push(u8::from(e.constrained).to_string());
        row.push(u8::from(e.zero_velocity).to_string());
        w.write_record(&row).map_err(|err| csv_error(path, err))?;
    }
    finish(path, w)
}

pub fn read_estimates(path: impl AsRef<Path>) -> Result<Vec<EstimateRecord>> {
    let table = Table::read(path.as_ref(), &ESTIMATES_HEADER)?;
    let flag = |line: u64, record: &csv::StringRecord, col: usize| match &record[col] {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(table.malformed(line, format!("column {}: '{other}' is not 0 or 1", col + 1))),
    };
    let mut prev = None;
    let mut out = Vec::with_capacity(table.rows.len());
    for (line, record) in &table.rows {
        let v: [f64; 11] = table.numbers(*line, record, 0)?;
        table.check_time(*line, v[0], prev)?;
        prev = Some(v[0]);
        out.push(EstimateRecord {
            t: v[0],
            velocity_radar: v3(&v[1..4]),
            velocity_nav: v3(&v[4..7]),
            inlier_ratio: v[7],
            gamma: v3(&v[8..11]),
            constrained: flag(*line, record, 11)?,
            zero_velocity: flag(*line, record, 12)?,
        });
    }
    Ok(out)
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_report<T: Serialize + ?Sized>(report: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, report).map_err(|e| Error::io(path, e.into()))?;
    writeln!(out).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

/// Aligned estimate vs. ground truth positions, one row per matched epoch.
pub fn write_aligned(pairs: &[AlignedPair], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path, &["nav frame NED after alignment; m"], &ALIGNED_HEADER)?;
    for p in pairs {
        w.write_record(fmt([p.t, p.est.x, p.est.y, p.est.z, p.gt.x, p.gt.y, p.gt.z, p.error]))
            .map_err(|e| csv_error(path, e))?;
    }
    finish(path, w)
}
