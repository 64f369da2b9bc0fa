//! KITTI odometry file formats: velodyne scans, pose files, calibration, plus
//! ASCII PLY import and trajectory export.
//!
//! Pipeline axis convention: `+Z` forward along the direction of motion, `+Y`
//! vertical, `+X` to the right. Velodyne scans use `+X` forward, `+Y` left,
//! `+Z` up, so the default [`AxisMapping`] is `(x, y, z) ↦ (−y, z, x)`.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{orthonormality_error, Point3, PointCloud, Pose, RigidMotion, Trajectory};

/// Largest orthonormality error a pose file rotation may have before it is
/// rejected instead of re-orthonormalized.
pub const POSE_ORTHONORMALITY_LIMIT: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("malformed scan {path}: {reason}")]
    MalformedScan { path: PathBuf, reason: String },
    #[error("malformed pose at {path}:{line}: {reason}")]
    MalformedPose {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("malformed calibration {path}: {reason}")]
    MalformedCalibration { path: PathBuf, reason: String },
    #[error("malformed PLY {path}: {reason}")]
    MalformedPly { path: PathBuf, reason: String },
    #[error("invalid axis mapping '{0}'")]
    InvalidAxisMapping(String),
    #[error("cannot write an empty trajectory")]
    EmptyTrajectory,
    #[error("write to {path} failed: {source}")]
    WriteError {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("sequence {dir}: {reason}")]
    InvalidSequence { dir: PathBuf, reason: String },
}

fn read_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Read {
        path: path.to_path_buf(),
        source,
    }
}

fn write_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::WriteError {
        path: path.to_path_buf(),
        source,
    }
}

/// Signed axis permutation from sensor coordinates to pipeline coordinates:
/// `pipeline[i] = sign[i] · sensor[source[i]]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct AxisMapping {
    source: [usize; 3],
    negate: [bool; 3],
}

impl AxisMapping {
    pub const IDENTITY: AxisMapping = AxisMapping {
        source: [0, 1, 2],
        negate: [false; 3],
    };

    /// Velodyne `(x, y, z)` to pipeline `(−y, z, x)`.
    pub const KITTI_VELODYNE: AxisMapping = AxisMapping {
        source: [1, 2, 0],
        negate: [true, false, false],
    };

    pub fn new(source: [usize; 3], negate: [bool; 3]) -> Result<Self, IoError> {
        let mut seen = [false; 3];
        for &s in &source {
            if s > 2 || seen[s] {
                return Err(IoError::InvalidAxisMapping(format!("{source:?}")));
            }
            seen[s] = true;
        }
        Ok(Self { source, negate })
    }

    pub fn apply(&self, p: &[f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for i in 0..3 {
            let v = p[self.source[i]];
            out[i] = if self.negate[i] { -v } else { v };
        }
        out
    }

    pub fn inverse(&self) -> AxisMapping {
        let mut source = [0; 3];
        let mut negate = [false; 3];
        for i in 0..3 {
            source[self.source[i]] = i;
            negate[self.source[i]] = self.negate[i];
        }
        AxisMapping { source, negate }
    }

    /// Matrix `A` with `pipeline = A · sensor`.
    pub fn matrix(&self) -> Matrix3<f64> {
        let mut m = Matrix3::zeros();
        for i in 0..3 {
            m[(i, self.source[i])] = if self.negate[i] { -1.0 } else { 1.0 };
        }
        m
    }

    pub fn homogeneous(&self) -> Matrix4<f64> {
        self.matrix().to_homogeneous()
    }
}

impl Default for AxisMapping {
    fn default() -> Self {
        Self::KITTI_VELODYNE
    }
}

impl fmt::Display for AxisMapping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const NAMES: [&str; 3] = ["x", "y", "z"];
        let parts: Vec<String> = (0..3)
            .map(|i| format!("{}{}", if self.negate[i] { "-" } else { "" }, NAMES[self.source[i]]))
            .collect();
        write!(f, "{}", parts.join(","))
    }
}

impl FromStr for AxisMapping {
    type Err = IoError;

    /// Parses the `Display` form, e.g. `-y,z,x`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || IoError::InvalidAxisMapping(s.to_string());
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let mut source = [0; 3];
        let mut negate = [false; 3];
        for (i, part) in parts.iter().enumerate() {
            let (neg, axis) = match part.strip_prefix('-') {
                Some(rest) => (true, rest),
                None => (false, part.strip_prefix('+').unwrap_or(part)),
            };
            source[i] = match axis {
                "x" => 0,
                "y" => 1,
                "z" => 2,
                _ => return Err(bad()),
            };
            negate[i] = neg;
        }
        AxisMapping::new(source, negate).map_err(|_| bad())
    }
}

impl TryFrom<String> for AxisMapping {
    type Error = IoError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<AxisMapping> for String {
    fn from(m: AxisMapping) -> String {
        m.to_string()
    }
}

const VELODYNE_RECORD: usize = 16;

/// Reads a KITTI velodyne `.bin` scan: little-endian `f32` quadruples
/// `(x, y, z, reflectance)` with no header.
pub fn read_velodyne_scan(path: &Path, mapping: &AxisMapping) -> Result<PointCloud, IoError> {
    let bytes = fs::read(path).map_err(read_err(path))?;
    decode_velodyne(&bytes, mapping).map_err(|reason| IoError::MalformedScan {
        path: path.to_path_buf(),
        reason,
    })
}

pub fn decode_velodyne(bytes: &[u8], mapping: &AxisMapping) -> Result<PointCloud, String> {
    if bytes.is_empty() {
        return Err("empty file".into());
    }
    if !bytes.len().is_multiple_of(VELODYNE_RECORD) {
        return Err(format!("length {} is not a multiple of 16", bytes.len()));
    }
    let n = bytes.len() / VELODYNE_RECORD;
    let mut points = Vec::with_capacity(n);
    let mut intensity = Vec::with_capacity(n);
    for (i, rec) in bytes.chunks_exact(VELODYNE_RECORD).enumerate() {
        let f = |k: usize| f32::from_le_bytes(rec[4 * k..4 * k + 4].try_into().expect("4 bytes"));
        let raw = [f(0) as f64, f(1) as f64, f(2) as f64];
        let refl = f(3);
        if !raw.iter().all(|v| v.is_finite()) || !refl.is_finite() {
            return Err(format!("non-finite value in record {i}"));
        }
        points.push(Point3::from(mapping.apply(&raw)));
        intensity.push(refl);
    }
    Ok(PointCloud::with_intensity(points, intensity))
}

/// Writes a cloud in velodyne format, undoing `mapping`. Missing intensity is
/// written as zero.
pub fn write_velodyne_scan(cloud: &PointCloud, path: &Path, mapping: &AxisMapping) -> Result<(), IoError> {
    let inv = mapping.inverse();
    let mut bytes = Vec::with_capacity(cloud.len() * VELODYNE_RECORD);
    for (i, p) in cloud.points().iter().enumerate() {
        let raw = inv.apply(&p.as_array());
        for v in raw {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
        let refl = cloud.intensity().map_or(0.0, |v| v[i]);
        bytes.extend_from_slice(&refl.to_le_bytes());
    }
    fs::write(path, bytes).map_err(write_err(path))
}

fn parse_twelve(line: &str) -> Result<[f64; 12], String> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 12 {
        return Err(format!("expected 12 fields, found {}", fields.len()));
    }
    let mut out = [0.0; 12];
    for (o, f) in out.iter_mut().zip(&fields) {
        *o = f.parse::<f64>().map_err(|e| format!("bad number '{f}': {e}"))?;
        if !o.is_finite() {
            return Err(format!("non-finite number '{f}'"));
        }
    }
    Ok(out)
}

/// Nearest proper rotation to `m` (polar decomposition via SVD).
pub fn nearest_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let d = (u * v_t).determinant().signum();
    u * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * v_t
}

/// Builds a rigid motion from a row-major 3×4 block, re-orthonormalizing the
/// rotation when its error exceeds the rotation tolerance but is within
/// [`POSE_ORTHONORMALITY_LIMIT`].
pub fn motion_from_row_major(v: &[f64; 12]) -> Result<RigidMotion, String> {
    let r = Matrix3::new(v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10]);
    let t = Vector3::new(v[3], v[7], v[11]);
    let err = orthonormality_error(&r);
    if err > POSE_ORTHONORMALITY_LIMIT || r.determinant() <= 0.0 {
        return Err(format!(
            "rotation block is not a rotation (orthonormality error {err:.3e}, det {:.6})",
            r.determinant()
        ));
    }
    RigidMotion::new(r, t)
        .or_else(|_| RigidMotion::new(nearest_rotation(&r), t))
        .map_err(|e| e.to_string())
}

/// Reads a KITTI pose file: one row-major 3×4 matrix per nonempty line.
pub fn read_pose_file(path: &Path) -> Result<Trajectory, IoError> {
    let file = File::open(path).map_err(read_err(path))?;
    let mut poses = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(read_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| IoError::MalformedPose {
            path: path.to_path_buf(),
            line: i + 1,
            reason,
        };
        let values = parse_twelve(&line).map_err(malformed)?;
        let motion = motion_from_row_major(&values).map_err(malformed)?;
        poses.push(Pose::from_motion(motion));
    }
    Ok(Trajectory::from_poses(poses))
}

/// Writes a trajectory in KITTI pose format with 17 significant digits, so a
/// read-back reproduces every entry exactly.
pub fn write_trajectory(traj: &Trajectory, path: &Path) -> Result<(), IoError> {
    if traj.is_empty() {
        return Err(IoError::EmptyTrajectory);
    }
    let file = File::create(path).map_err(write_err(path))?;
    let mut w = BufWriter::new(file);
    for pose in traj.poses() {
        let line: Vec<String> = pose.to_row_major_3x4().iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(w, "{}", line.join(" ")).map_err(write_err(path))?;
    }
    w.flush().map_err(write_err(path))
}

/// `frame,x,y,z` CSV of pose positions, for plotting.
pub fn write_trajectory_csv(traj: &Trajectory, path: &Path) -> Result<(), IoError> {
    if traj.is_empty() {
        return Err(IoError::EmptyTrajectory);
    }
    let file = File::create(path).map_err(write_err(path))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "frame,x,y,z").map_err(write_err(path))?;
    for (i, p) in traj.poses().iter().enumerate() {
        let t = p.translation();
        writeln!(w, "{i},{:.9},{:.9},{:.9}", t.x, t.y, t.z).map_err(write_err(path))?;
    }
    w.flush().map_err(write_err(path))
}

/// Reads the velodyne-to-camera transform from a KITTI `calib.txt`
/// (`Tr:` or `Tr_velo_to_cam:` line, 12 numbers).
pub fn read_calibration(path: &Path) -> Result<RigidMotion, IoError> {
    let text = fs::read_to_string(path).map_err(read_err(path))?;
    let malformed = |reason: String| IoError::MalformedCalibration {
        path: path.to_path_buf(),
        reason,
    };
    for line in text.lines() {
        let Some((key, rest)) = line.split_once(':') else {
            continue;
        };
        if matches!(key.trim(), "Tr" | "Tr_velo_to_cam") {
            let values = parse_twelve(rest).map_err(malformed)?;
            return motion_from_row_major(&values).map_err(malformed);
        }
    }
    Err(malformed("no Tr line".into()))
}

/// Reads an ASCII PLY file whose vertex element has `x`, `y`, `z` properties.
/// Other vertex properties are skipped; other elements must come after the
/// vertices.
pub fn read_ply_ascii(path: &Path) -> Result<PointCloud, IoError> {
    let text = fs::read_to_string(path).map_err(read_err(path))?;
    parse_ply_ascii(&text).map_err(|reason| IoError::MalformedPly {
        path: path.to_path_buf(),
        reason,
    })
}

pub fn parse_ply_ascii(text: &str) -> Result<PointCloud, String> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err("missing 'ply' magic".into());
    }
    let mut vertex_count = None;
    let mut in_vertex = false;
    let mut props = Vec::new();
    for line in lines.by_ref() {
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            ["format", "ascii", _] => {}
            ["format", ..] => return Err("only ASCII PLY is supported".into()),
            ["element", "vertex", n] => {
                vertex_count = Some(n.parse::<usize>().map_err(|e| e.to_string())?);
                in_vertex = true;
            }
            ["element", ..] => in_vertex = false,
            ["property", _, name] if in_vertex => props.push(name.to_string()),
            ["end_header"] => break,
            _ => {}
        }
    }
    let n = vertex_count.ok_or("no vertex element")?;
    let col = |name: &str| props.iter().position(|p| p == name).ok_or(format!("no '{name}' property"));
    let (ix, iy, iz) = (col("x")?, col("y")?, col("z")?);
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let line = lines.next().ok_or("truncated vertex list")?;
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|s| s.parse::<f64>().map_err(|e| e.to_string()))
            .collect::<Result<_, _>>()?;
        if vals.len() < props.len() {
            return Err("vertex line has too few values".into());
        }
        let p = Point3::new(vals[ix], vals[iy], vals[iz]);
        if !p.is_finite() {
            return Err("non-finite vertex".into());
        }
        points.push(p);
    }
    Ok(PointCloud::new(points))
}

/// A KITTI-layout sequence: `<root>/sequences/<id>/velodyne/*.bin`, optional
/// `<root>/poses/<id>.txt` and `<root>/sequences/<id>/calib.txt`.
#[derive(Debug, Clone)]
pub struct ScanSequence {
    pub id: String,
    pub dir: PathBuf,
    scans: Vec<PathBuf>,
    ground_truth: Option<Trajectory>,
    calibration: Option<RigidMotion>,
    pub axis_mapping: AxisMapping,
}

impl ScanSequence {
    pub fn open(root: &Path, id: &str, axis_mapping: AxisMapping) -> Result<Self, IoError> {
        let dir = root.join("sequences").join(id);
        let invalid = |reason: String| IoError::InvalidSequence {
            dir: dir.clone(),
            reason,
        };
        let velodyne = dir.join("velodyne");
        let mut indexed = Vec::new();
        for entry in fs::read_dir(&velodyne).map_err(read_err(&velodyne))? {
            let path = entry.map_err(read_err(&velodyne))?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("bin") {
                continue;
            }
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
            let index: u64 = stem
                .parse()
                .map_err(|_| invalid(format!("scan name '{stem}' is not an index")))?;
            indexed.push((index, path));
        }
        indexed.sort();
        if indexed.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(invalid("duplicate scan index".into()));
        }
        let scans: Vec<PathBuf> = indexed.into_iter().map(|(_, p)| p).collect();

        let calib_path = dir.join("calib.txt");
        let calibration = if calib_path.exists() {
            Some(read_calibration(&calib_path)?)
        } else {
            None
        };

        let pose_path = root.join("poses").join(format!("{id}.txt"));
        let ground_truth = if pose_path.exists() {
            let raw = read_pose_file(&pose_path)?;
            if raw.len() != scans.len() {
                return Err(invalid(format!(
                    "{} ground-truth poses for {} scans",
                    raw.len(),
                    scans.len()
                )));
            }
            Some(raw)
        } else {
            None
        };

        Ok(Self {
            id: id.to_string(),
            dir,
            scans,
            ground_truth,
            calibration,
            axis_mapping,
        })
    }

    pub fn len(&self) -> usize {
        self.scans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scans.is_empty()
    }

    pub fn scan_paths(&self) -> &[PathBuf] {
        &self.scans
    }

    pub fn read_scan(&self, index: usize) -> Result<PointCloud, IoError> {
        read_velodyne_scan(&self.scans[index], &self.axis_mapping)
    }

    pub fn calibration(&self) -> Option<&RigidMotion> {
        self.calibration.as_ref()
    }

    /// Ground truth as stored on disk (camera frame for KITTI).
    pub fn raw_ground_truth(&self) -> Option<&Trajectory> {
        self.ground_truth.as_ref()
    }

    /// Change of basis taking camera-frame poses into the pipeline frame:
    /// `A · Tr⁻¹` where `Tr` maps velodyne to camera. Without a calibration
    /// the poses are assumed to already be in the sensor frame.
    pub fn ground_truth_basis(&self) -> Matrix4<f64> {
        let a = self.axis_mapping.homogeneous();
        match &self.calibration {
            Some(tr) => a * tr.inverse().to_homogeneous(),
            None => a,
        }
    }

    /// Ground truth re-expressed in the pipeline frame, comparable with the
    /// odometry output.
    pub fn ground_truth(&self) -> Option<Trajectory> {
        let gt = self.ground_truth.as_ref()?;
        if self.calibration.is_none() {
            log::warn!(
                "sequence {}: no calib.txt, ground truth assumed to be in the sensor frame",
                self.id
            );
        }
        match gt.change_of_basis(&self.ground_truth_basis()) {
            Ok(t) => Some(t),
            Err(e) => {
                log::warn!("sequence {}: ground truth conversion failed: {e}", self.id);
                None
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn encode(records: &[[f32; 4]]) -> Vec<u8> {
        records.iter().flat_map(|r| r.iter().flat_map(|v| v.to_le_bytes())).collect()
    }

    #[test]
    fn decodes_two_records() {
        let bytes = encode(&[[1.0, 2.0, 3.0, 0.5], [4.0, 5.0, 6.0, 0.9]]);
        let cloud = decode_velodyne(&bytes, &AxisMapping::IDENTITY).unwrap();
        assert_eq!(cloud.points(), &[Point3::new(1.0, 2.0, 3.0), Point3::new(4.0, 5.0, 6.0)]);
        assert_eq!(cloud.intensity().unwrap(), &[0.5, 0.9]);
        let mapped = decode_velodyne(&bytes, &AxisMapping::KITTI_VELODYNE).unwrap();
        assert_eq!(mapped.point(0), Point3::new(-2.0, 3.0, 1.0));
    }

    #[test]
    fn rejects_bad_scans() {
        assert!(decode_velodyne(&[], &AxisMapping::IDENTITY).is_err());
        assert!(decode_velodyne(&[0u8; 17], &AxisMapping::IDENTITY).is_err());
        let bytes = encode(&[[1.0, f32::NAN, 3.0, 0.5]]);
        assert!(decode_velodyne(&bytes, &AxisMapping::IDENTITY).is_err());
    }

    #[test]
    fn empty_scan_file_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("0.bin");
        fs::write(&path, []).unwrap();
        assert!(matches!(
            read_velodyne_scan(&path, &AxisMapping::default()),
            Err(IoError::MalformedScan { .. })
        ));
    }

    #[test]
    fn pose_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.txt");
        fs::write(&path, "1 0 0 0 0 1 0 0 0 0 1 0\n1 0 0 1 0 1 0 2 0 0 1 3\n\n1 0 0 0 0 1 0 0 0 0 1 5\n").unwrap();
        let t = read_pose_file(&path).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.poses()[0], Pose::identity());
        assert_eq!(*t.poses()[1].translation(), Vector3::new(1.0, 2.0, 3.0));

        fs::write(&path, "1 0 0 0 0 1 0 0 0 0 1\n").unwrap();
        assert!(matches!(read_pose_file(&path), Err(IoError::MalformedPose { line: 1, .. })));
        fs::write(&path, "2 0 0 0 0 1 0 0 0 0 1 0\n").unwrap();
        assert!(matches!(read_pose_file(&path), Err(IoError::MalformedPose { .. })));
    }

    #[test]
    fn slightly_off_rotation_is_repaired() {
        let v = [1.0 + 1e-5, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0];
        let m = motion_from_row_major(&v).unwrap();
        assert!(orthonormality_error(m.rotation()) < 1e-12);
    }

    #[test]
    fn identity_trajectory_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.txt");
        write_trajectory(&Trajectory::new(), &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert_eq!(read_pose_file(&path).unwrap(), Trajectory::new());
        assert!(matches!(
            write_trajectory(&Trajectory::from_poses(vec![]), &path),
            Err(IoError::EmptyTrajectory)
        ));
    }

    #[test]
    fn calibration_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("calib.txt");
        fs::write(&path, "P0: 1 0 0 0 0 1 0 0 0 0 1 0\nTr: 0 -1 0 0.1 0 0 -1 0.2 1 0 0 0.3\n").unwrap();
        let tr = read_calibration(&path).unwrap();
        assert_eq!(*tr.translation(), Vector3::new(0.1, 0.2, 0.3));
        assert_eq!(tr.rotation()[(2, 0)], 1.0);
    }

    #[test]
    fn ply_import() {
        let text = "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nproperty uchar red\nelement face 0\nproperty list uchar int vertex_indices\nend_header\n1 2 3 255\n-1 0.5 2 0\n";
        let cloud = parse_ply_ascii(text).unwrap();
        assert_eq!(cloud.points(), &[Point3::new(1.0, 2.0, 3.0), Point3::new(-1.0, 0.5, 2.0)]);
        assert!(parse_ply_ascii("ply\nformat binary_little_endian 1.0\nend_header\n").is_err());
    }

    #[test]
    fn axis_mapping_text() {
        assert_eq!(AxisMapping::KITTI_VELODYNE.to_string(), "-y,z,x");
        assert_eq!("-y,z,x".parse::<AxisMapping>().unwrap(), AxisMapping::KITTI_VELODYNE);
        assert!("x,x,z".parse::<AxisMapping>().is_err());
        assert!("x,y".parse::<AxisMapping>().is_err());
    }

    fn mapping_strategy() -> impl Strategy<Value = AxisMapping> {
        (Just([0usize, 1, 2]).prop_shuffle(), prop::array::uniform3(any::<bool>()))
            .prop_map(|(s, n)| AxisMapping::new([s[0], s[1], s[2]], n).unwrap())
    }

    proptest! {
        #[test]
        fn axis_mapping_inverse_is_exact(m in mapping_strategy(), p in prop::array::uniform3(-1e6f64..1e6)) {
            prop_assert_eq!(m.inverse().apply(&m.apply(&p)), p);
            prop_assert_eq!(m.apply(&m.inverse().apply(&p)), p);
        }

        #[test]
        fn scan_round_trip_is_bit_exact(
            m in mapping_strategy(),
            recs in prop::collection::vec(prop::array::uniform4(-100f32..100f32), 1..64),
        ) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("s.bin");
            let cloud = decode_velodyne(&encode(&recs), &m).unwrap();
            write_velodyne_scan(&cloud, &path, &m).unwrap();
            let back = read_velodyne_scan(&path, &m).unwrap();
            prop_assert_eq!(&back, &cloud);
            prop_assert_eq!(fs::read(&path).unwrap(), encode(&recs));
        }

        #[test]
        fn trajectory_round_trip(
            motions in prop::collection::vec(
                (prop::array::uniform3(-1.0f64..1.0), -3.0f64..3.0, prop::array::uniform3(-50.0f64..50.0)),
                1..20,
            )
        ) {
            let mut traj = Trajectory::new();
            for (axis, angle, t) in motions {
                let axis = Vector3::from(axis) + Vector3::new(1e-3, 0.0, 0.0);
                let m = RigidMotion::from_axis_angle(axis, angle, Vector3::from(t));
                let next = crate::types::compose_pose(traj.last().unwrap(), &m);
                traj.push(next);
            }
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("t.txt");
            write_trajectory(&traj, &path).unwrap();
            let back = read_pose_file(&path).unwrap();
            prop_assert_eq!(back.len(), traj.len());
            for (a, b) in traj.poses().iter().zip(back.poses()) {
                prop_assert!((a.to_homogeneous() - b.to_homogeneous()).abs().max() <= 1e-12);
            }
        }
    }
}
