use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

use super::{read_volume, Modality, Split, Volume};

/// One subject of a dataset manifest. Relative paths are resolved against
/// the manifest's directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub subject_id: String,
    pub t1_path: PathBuf,
    pub fa_path: PathBuf,
    pub split: Split,
}

impl ManifestRow {
    fn resolve(base: &Path, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    }

    /// Loads both channels and tags them with subject id and modality.
    pub fn load(&self, base: &Path) -> Result<(Volume, Volume)> {
        let mut t1 = read_volume(Self::resolve(base, &self.t1_path))?;
        let mut fa = read_volume(Self::resolve(base, &self.fa_path))?;
        if t1.shape() != fa.shape() {
            return Err(Error::ShapeMismatch {
                left: format!("{} t1 {:?}", self.subject_id, t1.shape()),
                right: format!("fa {:?}", fa.shape()),
            });
        }
        for (v, m) in [(&mut t1, Modality::T1Like), (&mut fa, Modality::FaLike)] {
            v.meta.subject_id = self.subject_id.clone();
            v.meta.modality = Some(m);
        }
        Ok((t1, fa))
    }
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestRow>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let rows = reader.deserialize().collect::<std::result::Result<Vec<ManifestRow>, _>>()?;
    let mut ids: Vec<&str> = rows.iter().map(|r| r.subject_id.as_str()).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::InvalidConfig(format!("{}: duplicate subject `{}`", path.display(), w[0])));
    }
    Ok(rows)
}

pub fn write_manifest(rows: &[ManifestRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = csv::Writer::from_writer(file);
    for r in rows {
        writer.serialize(r)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

/// Which channel is the condition `x1` and which the target `x0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    T1ToFa,
    FaToT1,
}

impl Direction {
    pub fn source(self) -> Modality {
        match self {
            Direction::T1ToFa => Modality::T1Like,
            Direction::FaToT1 => Modality::FaLike,
        }
    }

    pub fn target(self) -> Modality {
        match self {
            Direction::T1ToFa => Modality::FaLike,
            Direction::FaToT1 => Modality::T1Like,
        }
    }

    /// Orders a loaded `(t1, fa)` pair as `(target, source)`.
    pub fn orient(self, t1: Volume, fa: Volume) -> (Volume, Volume) {
        match self {
            Direction::T1ToFa => (fa, t1),
            Direction::FaToT1 => (t1, fa),
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::T1ToFa => "t1-to-fa",
            Direction::FaToT1 => "fa-to-t1",
        })
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "t1-to-fa" => Ok(Direction::T1ToFa),
            "fa-to-t1" => Ok(Direction::FaToT1),
            other => Err(Error::InvalidConfig(format!(
                "unknown direction `{other}` (expected t1-to-fa or fa-to-t1)"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::write_volume;

    #[test]
    fn manifest_round_trip_and_loading() {
        let dir = tempfile::tempdir().unwrap();
        let t1 = Volume::new([1, 1, 2], vec![0.0, 1.0]).unwrap();
        let fa = Volume::new([1, 1, 2], vec![1.0, 0.0]).unwrap();
        write_volume(&t1, dir.path().join("a_t1.bvol")).unwrap();
        write_volume(&fa, dir.path().join("a_fa.bvol")).unwrap();
        let rows = vec![ManifestRow {
            subject_id: "a".into(),
            t1_path: "a_t1.bvol".into(),
            fa_path: "a_fa.bvol".into(),
            split: Split::Test,
        }];
        let path = dir.path().join("manifest.csv");
        write_manifest(&rows, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("subject_id,t1_path,fa_path,split\n"));
        let back = read_manifest(&path).unwrap();
        assert_eq!(back, rows);
        let (a, b) = back[0].load(dir.path()).unwrap();
        assert_eq!(a.meta.modality, Some(Modality::T1Like));
        assert_eq!(b.meta.subject_id, "a");
        let (x0, x1) = Direction::T1ToFa.orient(a, b);
        assert_eq!(x0.meta.modality, Some(Modality::FaLike));
        assert_eq!(x1.meta.modality, Some(Modality::T1Like));
    }

    #[test]
    fn duplicate_subjects_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        std::fs::write(&path, "subject_id,t1_path,fa_path,split\na,x,y,train\na,x,y,test\n").unwrap();
        assert!(read_manifest(&path).is_err());
    }

    #[test]
    fn direction_names() {
        for d in [Direction::T1ToFa, Direction::FaToT1] {
            assert_eq!(d.to_string().parse::<Direction>().unwrap(), d);
            assert_ne!(d.source(), d.target());
        }
    }
}
