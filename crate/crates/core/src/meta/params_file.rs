//! Neuron-type table: one CSV row per neuron type.
//!
//! Columns `kind,theta_a,theta_b,theta_c,theta_d,v_th,label`. Second-order
//! rows carry their four dynamic parameters. First-order rows store the
//! leak conductance in `theta_a` and the reset potential in `theta_c`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{DynamicParams, LifParams, NeuronKind, SecondOrderParams};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamsRecord {
    pub kind: String,
    pub theta_a: f64,
    pub theta_b: f64,
    pub theta_c: f64,
    pub theta_d: f64,
    pub v_th: f64,
    pub label: String,
}

impl ParamsRecord {
    pub fn new(params: &DynamicParams, label: &str) -> Result<Self> {
        let (a, b, c, d, v_th) = match params {
            DynamicParams::SecondOrder(p) => (p.theta_a, p.theta_b, p.theta_c, p.theta_d, p.v_th),
            DynamicParams::FirstOrder(p) => (p.g, 0.0, p.v_reset, 0.0, p.v_th),
            DynamicParams::Izhikevich(_) => {
                return Err(Error::Config("the reference neuron has no params-file form".into()))
            }
        };
        Ok(ParamsRecord {
            kind: params.kind().as_str().to_string(),
            theta_a: a,
            theta_b: b,
            theta_c: c,
            theta_d: d,
            v_th,
            label: label.to_string(),
        })
    }

    pub fn params(&self) -> Result<DynamicParams> {
        let p = match NeuronKind::parse(&self.kind) {
            Some(NeuronKind::SecondOrder) => DynamicParams::SecondOrder(SecondOrderParams {
                theta_a: self.theta_a,
                theta_b: self.theta_b,
                theta_c: self.theta_c,
                theta_d: self.theta_d,
                v_th: self.v_th,
            }),
            Some(NeuronKind::FirstOrder) => DynamicParams::FirstOrder(LifParams {
                g: self.theta_a,
                v_th: self.v_th,
                v_reset: self.theta_c,
            }),
            _ => return Err(Error::Config(format!("unsupported neuron kind '{}'", self.kind))),
        };
        p.validate()?;
        Ok(p)
    }
}

pub fn write_params_file(records: &[ParamsRecord], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_params_file(path: impl AsRef<Path>) -> Result<Vec<ParamsRecord>> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut r = csv::Reader::from_path(path)?;
    let records = r.deserialize().collect::<std::result::Result<Vec<ParamsRecord>, _>>()?;
    for rec in &records {
        rec.params()?;
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let recs = vec![
            ParamsRecord::new(&DynamicParams::SecondOrder(SecondOrderParams::SDS), "SDS").unwrap(),
            ParamsRecord::new(&DynamicParams::lif(), "LIF").unwrap(),
        ];
        write_params_file(&recs, &path).unwrap();
        let back = read_params_file(&path).unwrap();
        assert_eq!(back, recs);
        assert_eq!(back[0].params().unwrap(), DynamicParams::SecondOrder(SecondOrderParams::SDS));
        assert_eq!(back[1].params().unwrap(), DynamicParams::lif());
    }

    #[test]
    fn shipped_table_matches_presets() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../params/presets.csv");
        let recs = read_params_file(path).unwrap();
        let got: Vec<(String, DynamicParams)> = recs.iter().map(|r| (r.label.clone(), r.params().unwrap())).collect();
        for (label, p) in got {
            assert_eq!(DynamicParams::preset(&label), Some(p), "{label}");
        }
        assert_eq!(recs.len(), 4);
    }
}
