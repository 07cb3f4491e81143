//! Object models and their on-disk format.
//!
//! A model file is a short text header, the AOG in its text format, and the
//! parameters as raw little-endian `f64`s:
//!
//! ```text
//! aogtrack-model 1
//! tau_g <f64 bits as hex>
//! template <grid w> <grid h> <unit w> <unit h> <part level offset>
//! features <cell size> <interval> <hog> <lbp> <color> <channels>
//! aog <byte length>
//! <AOG text>
//! params <count>
//! <count * 8 bytes>
//! ```

use std::path::Path;

use crate::aog::{Aog, KeptChildren};
use crate::config::FeatureConfig;
use crate::error::{Error, Result};
use crate::features::PyramidParams;
use crate::parser::{ModelParams, ParamLayout, TemplateGeometry};

const MAGIC: &str = "aogtrack-model 1";

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub aog: Aog,
    pub template: TemplateGeometry,
    pub params: ModelParams,
    /// Detection threshold on root scores.
    pub tau_g: f64,
    pub features: FeatureConfig,
}

impl Model {
    /// Model with zero templates and the minimal deformation penalty.
    pub fn new(
        aog: Aog,
        template: TemplateGeometry,
        channels: usize,
        features: FeatureConfig,
        def_floor: f64,
    ) -> Model {
        let layout = ParamLayout::new(&aog, &template, channels);
        Model {
            params: ModelParams::new(layout, def_floor),
            aog,
            template,
            tau_g: f64::NEG_INFINITY,
            features,
        }
    }

    pub fn verify(&self) -> Result<()> {
        self.aog.validate()?;
        if self.template.grid != self.aog.grid() {
            return Err(Error::Invariant("template grid differs from AOG grid".into()));
        }
        let off = self.template.part_level_offset;
        if off != 0 && off != self.features.interval {
            return Err(Error::Invariant(format!(
                "part level offset {off} is neither 0 nor the interval"
            )));
        }
        self.params.verify(&self.aog, &self.template)
    }

    /// Sub-model keeping only the listed Or-children, parameters carried
    /// over node by node.
    pub fn restrict(&self, kept: &KeptChildren) -> Result<Model> {
        let (aog, old_of_new) = self.aog.extract_subgraph(kept)?;
        let mut m = Model::new(aog, self.template, self.channels(), self.features.clone(), 0.0);
        for (new, old) in old_of_new.iter().enumerate() {
            let (Some(nb), Some(ob)) = (m.params.layout.blocks[new], self.params.layout.blocks[old.index()]) else {
                continue;
            };
            if nb.len != ob.len {
                return Err(Error::Invariant(format!("block size changed for node {old}")));
            }
            m.params.values[nb.offset..nb.offset + nb.len]
                .copy_from_slice(&self.params.values[ob.offset..ob.offset + ob.len]);
        }
        m.tau_g = self.tau_g;
        Ok(m)
    }

    /// The object template alone: the root keeps only its terminal branch.
    pub fn object_only(&self) -> Result<Model> {
        let obj = self
            .aog
            .object_terminal()
            .ok_or_else(|| Error::Invariant("AOG has no object terminal".into()))?;
        let root = self.aog.root();
        let wrapper = self
            .aog
            .root_children()
            .into_iter()
            .find(|&c| self.aog.node(c).child_ids().any(|g| g == obj))
            .ok_or_else(|| Error::Invariant("object terminal not below the root".into()))?;
        self.restrict(&[(root, [wrapper].into())].into())
    }

    pub fn channels(&self) -> usize {
        self.params.layout.channels
    }

    /// Pyramid sampling for this model: every kept level must hold the object
    /// window.
    pub fn pyramid_params(&self) -> PyramidParams {
        let mut p = PyramidParams::new(self.features.cell_size, self.features.interval, self.features.set());
        let (w, h) = self.template.object_cells();
        // fine part levels are larger than the object levels they serve
        p.min_cells = (w, h);
        p
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let t = &self.template;
        let f = &self.features;
        let aog = self.aog.to_text();
        let mut out = format!(
            "{MAGIC}\ntau_g {:016x}\ntemplate {} {} {} {} {}\nfeatures {} {} {} {} {} {}\naog {}\n",
            self.tau_g.to_bits(),
            t.grid.0,
            t.grid.1,
            t.unit.0,
            t.unit.1,
            t.part_level_offset,
            f.cell_size,
            f.interval,
            f.hog as u8,
            f.lbp as u8,
            f.color as u8,
            self.channels(),
            aog.len()
        )
        .into_bytes();
        out.extend_from_slice(aog.as_bytes());
        out.extend_from_slice(format!("params {}\n", self.params.values.len()).as_bytes());
        for v in &self.params.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Model> {
        let mut r = Reader { bytes, pos: 0 };
        if r.line()? != MAGIC {
            return Err(Error::Format("not a model file or unsupported version".into()));
        }
        let tau = r.fields("tau_g", 1)?;
        let tau_g = f64::from_bits(u64::from_str_radix(&tau[0], 16).map_err(|_| Error::Format("bad tau_g".into()))?);
        let tm = r.numbers("template", 5)?;
        let ft = r.numbers("features", 6)?;
        let aog_len = r.numbers("aog", 1)?[0];
        let aog_text = std::str::from_utf8(r.take(aog_len)?).map_err(|_| Error::Format("AOG text not UTF-8".into()))?;
        let aog = Aog::from_text(aog_text)?;
        let count = r.numbers("params", 1)?[0];
        let blob = r.take(count * 8)?;
        if r.pos != bytes.len() {
            return Err(Error::Format("trailing bytes after parameters".into()));
        }
        let values = blob
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let template = TemplateGeometry::new((tm[0] as u32, tm[1] as u32), (tm[2], tm[3]), tm[4]);
        let features = FeatureConfig {
            cell_size: ft[0],
            interval: ft[1],
            hog: ft[2] != 0,
            lbp: ft[3] != 0,
            color: ft[4] != 0,
        };
        let layout = ParamLayout::new(&aog, &template, ft[5]);
        let model = Model {
            aog,
            template,
            params: ModelParams { layout, values },
            tau_g,
            features,
        };
        model
            .verify()
            .map_err(|e| Error::Format(format!("inconsistent model: {e}")))?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Model> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Model::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn line(&mut self) -> Result<String> {
        let rest = &self.bytes[self.pos..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Format("truncated header".into()))?;
        self.pos += end + 1;
        String::from_utf8(rest[..end].to_vec()).map_err(|_| Error::Format("header not UTF-8".into()))
    }

    fn fields(&mut self, key: &str, n: usize) -> Result<Vec<String>> {
        let line = self.line()?;
        let mut it = line.split_whitespace();
        if it.next() != Some(key) {
            return Err(Error::Format(format!("expected `{key}` line, got `{line}`")));
        }
        let v: Vec<String> = it.map(str::to_string).collect();
        if v.len() != n {
            return Err(Error::Format(format!("`{key}` needs {n} fields")));
        }
        Ok(v)
    }

    fn numbers(&mut self, key: &str, n: usize) -> Result<Vec<usize>> {
        self.fields(key, n)?
            .iter()
            .map(|s| {
                s.parse()
                    .map_err(|_| Error::Format(format!("bad number `{s}` in `{key}`")))
            })
            .collect()
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format("truncated model file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Model {
        let aog = Aog::build_full((2, 2), (1, 1), 0.0).unwrap();
        let t = TemplateGeometry::new((2, 2), (2, 1), 0);
        let mut m = Model::new(aog, t, 3, FeatureConfig::default(), 0.01);
        for (i, v) in m.params.values.iter_mut().enumerate() {
            *v += (i as f64 * 0.37).sin() / 3.0;
        }
        m.tau_g = -0.123456789;
        m
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = sample();
        let back = Model::from_bytes(&m.to_bytes()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_bytes(), m.to_bytes());
    }

    #[test]
    fn rejects_corruption() {
        let bytes = sample().to_bytes();
        assert!(Model::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(Model::from_bytes(&extra).is_err());
        assert!(Model::from_bytes(b"hello\n").is_err());
    }
}
