//! Content-addressed store of solved tubes.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use log::info;
use sha2::{Digest, Sha256};

use super::tubefile::{load_tube, write_tube};
use crate::dynamics::Dynamics;
use crate::error::Result;
use crate::hjsolver::SolverOptions;
use crate::statespace::{Grid, ValueTube};

/// Running SHA-256 over the inputs of a computation.
#[derive(Default, Clone)]
pub struct KeyBuilder(Sha256);

impl KeyBuilder {
    pub fn new(kind: &str) -> Self {
        let mut k = Self::default();
        k.bytes(kind.as_bytes());
        k
    }

    pub fn bytes(&mut self, b: &[u8]) -> &mut Self {
        self.0.update((b.len() as u64).to_le_bytes());
        self.0.update(b);
        self
    }

    pub fn f64s(&mut self, xs: &[f64]) -> &mut Self {
        let b: Vec<u8> = xs.iter().flat_map(|x| x.to_le_bytes()).collect();
        self.bytes(&b)
    }

    pub fn grid(&mut self, g: &Grid) -> &mut Self {
        let shape: Vec<u8> = g.shape().iter().flat_map(|n| (*n as u64).to_le_bytes()).collect();
        let periodic: Vec<u8> = g.periodic().iter().map(|p| *p as u8).collect();
        self.bytes(&shape).f64s(g.lo()).f64s(g.hi()).bytes(&periodic)
    }

    pub fn tube(&mut self, t: &ValueTube) -> &mut Self {
        self.grid(t.grid()).bytes(&[t.is_invariant() as u8]).f64s(t.times());
        for f in t.fields() {
            let b: Vec<u8> = f.values().iter().flat_map(|v| v.to_le_bytes()).collect();
            self.bytes(&b);
        }
        self
    }

    pub fn json<T: serde::Serialize>(&mut self, value: &T) -> &mut Self {
        let text = serde_json::to_vec(value).expect("plain data serializes");
        self.bytes(&text)
    }

    pub fn finish(&self) -> String {
        hex::encode(self.0.clone().finalize())
    }
}

/// Bumped whenever the numerical scheme changes the tubes it produces.
pub const SCHEME_REVISION: u32 = 3;

/// Key of an offline pass: model, grid, goal, constraint, horizon and
/// solver options.
pub fn offline_key<M: Dynamics>(model: &M, goal: &ValueTube, constraint: &ValueTube, t_span: (f64, f64), opts: &SolverOptions) -> String {
    KeyBuilder::new("offline")
        .bytes(&SCHEME_REVISION.to_le_bytes())
        .bytes(&model.fingerprint())
        .tube(goal)
        .tube(constraint)
        .f64s(&[t_span.0, t_span.1])
        .json(opts)
        .finish()
}

/// Directory of `<key>.vtub` files written atomically.
#[derive(Debug, Clone)]
pub struct TubeCache {
    dir: PathBuf,
}

impl TubeCache {
    pub fn open(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.vtub"))
    }

    pub fn get(&self, key: &str) -> Result<Option<ValueTube>> {
        let p = self.path(key);
        if !p.exists() {
            return Ok(None);
        }
        info!("cache hit: {}", p.display());
        load_tube(&p).map(Some)
    }

    /// Writes to a temporary sibling first and renames it into place.
    pub fn put(&self, key: &str, tube: &ValueTube) -> Result<PathBuf> {
        let target = self.path(key);
        let tmp = self.dir.join(format!(".{key}.{}.tmp", std::process::id()));
        let written = fs::File::create(&tmp).map_err(Into::into).and_then(|f| write_tube(tube, BufWriter::new(f)));
        if let Err(e) = written {
            let _ = fs::remove_file(&tmp);
            return Err(e);
        }
        fs::rename(&tmp, &target)?;
        Ok(target)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::DoubleIntegrator;
    use crate::statespace::ValueField;
    use std::sync::Arc;

    #[test]
    fn key_tracks_every_input() {
        let g = Arc::new(Grid::new(&[-1.0, -1.0], &[1.0, 1.0], &[5, 5], &[false, false]).unwrap());
        let m = DoubleIntegrator::new(-0.5, 0.5).unwrap();
        let goal = ValueTube::invariant(ValueField::from_fn(g.clone(), |z| z[0]));
        let c = ValueTube::invariant(ValueField::full(g.clone()));
        let o = SolverOptions::default();
        let base = offline_key(&m, &goal, &c, (0.0, 1.0), &o);
        assert_eq!(base, offline_key(&m, &goal, &c, (0.0, 1.0), &o));
        assert_ne!(base, offline_key(&DoubleIntegrator::new(-0.4, 0.5).unwrap(), &goal, &c, (0.0, 1.0), &o));
        assert_ne!(base, offline_key(&m, &c, &goal, (0.0, 1.0), &o));
        assert_ne!(base, offline_key(&m, &goal, &c, (0.0, 2.0), &o));
        assert_ne!(base, offline_key(&m, &goal, &c, (0.0, 1.0), &SolverOptions { cfl: 0.5, ..o }));
        assert_eq!(base.len(), 64);
    }
}
