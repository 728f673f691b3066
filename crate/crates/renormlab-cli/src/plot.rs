//! Plot-ready CSV tables cut from the artifacts.
//!
//! | kind       | source          | columns                                        | order               |
//! |------------|-----------------|------------------------------------------------|---------------------|
//! | pieces     | pieces.jsonl    | word,depth,x0,x1,u0,u1                         | by word             |
//! | decay      | rigidity.json   | n,sup_dh,sup_ddh,ratio,flag                    | by n                |
//! | dimension  | cantor.json     | depth,eps,N,log_inv_eps,logN                   | by depth            |
//! | cascade    | cascade.json    | n,a_n,width,ratio                              | by n                |
//! | geometry   | cascade.json    | k,z,x_left,x_right,width,twist,lambda,mu       | by k                |
//! | spectrum   | spectrum.json   | index,re,im,modulus                            | by decreasing modulus |
//! | distortion | distortion.json | lemma,samples,K_est,safety,max_ratio,violations,seed | by lemma      |
//!
//! Missing optional values are empty fields. Floats print in shortest
//! round-trip form, so the CSV reproduces the artifact values exactly.

use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use renormlab::cantor::Piece;
use renormlab::rigidity::DecayFlag;
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::pipeline::{CantorArtifact, CascadeArtifact, DistortionArtifact, RigidityArtifact, SpectrumArtifact};
use crate::store;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    Pieces,
    Decay,
    Dimension,
    Cascade,
    Geometry,
    Spectrum,
    Distortion,
}

impl PlotKind {
    pub const ALL: [PlotKind; 7] = [
        PlotKind::Pieces,
        PlotKind::Decay,
        PlotKind::Dimension,
        PlotKind::Cascade,
        PlotKind::Geometry,
        PlotKind::Spectrum,
        PlotKind::Distortion,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PlotKind::Pieces => "pieces",
            PlotKind::Decay => "decay",
            PlotKind::Dimension => "dimension",
            PlotKind::Cascade => "cascade",
            PlotKind::Geometry => "geometry",
            PlotKind::Spectrum => "spectrum",
            PlotKind::Distortion => "distortion",
        }
    }
}

impl FromStr for PlotKind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        PlotKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| CliError::UnknownKind(s.to_string()))
    }
}

#[derive(Serialize)]
struct PieceRow {
    word: String,
    depth: usize,
    x0: f64,
    x1: f64,
    u0: f64,
    u1: f64,
}

#[derive(Serialize)]
struct DecayCsv {
    n: usize,
    sup_dh: f64,
    sup_ddh: f64,
    ratio: Option<f64>,
    flag: DecayFlag,
}

#[derive(Serialize)]
struct SpectrumCsv {
    index: usize,
    re: f64,
    im: f64,
    modulus: f64,
}

fn rows<W: Write, T: Serialize>(mut out: W, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::io("buffering csv", e.into_error()))?;
    match out.write_all(&bytes).and_then(|_| out.flush()) {
        // A closed pipe (`| head`) is not a failure of the table.
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::io("writing csv", e)),
        _ => Ok(()),
    }
}

/// Writes the table of `kind` read from the artifacts in `dir`. `depth`
/// selects the piece depth and is ignored by the other kinds.
pub fn emit<W: Write>(dir: &Path, kind: PlotKind, depth: usize, out: W) -> Result<()> {
    match kind {
        PlotKind::Pieces => {
            let all: Vec<Piece> = store::read_jsonl(dir, store::PIECES)?;
            let mut sel: Vec<PieceRow> = all
                .into_iter()
                .filter(|p| p.depth == depth)
                .map(|p| PieceRow {
                    word: p.word.to_string(),
                    depth: p.depth,
                    x0: p.hull.x_lo,
                    x1: p.hull.x_hi,
                    u0: p.hull.u_lo,
                    u1: p.hull.u_hi,
                })
                .collect();
            if sel.is_empty() {
                return Err(CliError::ConfigInvalid(format!("no pieces of depth {depth} in {}", store::PIECES)));
            }
            sel.sort_by(|a, b| a.word.cmp(&b.word));
            rows(out, sel)
        }
        PlotKind::Decay => {
            let a: RigidityArtifact = store::read_json(dir, store::RIGIDITY)?;
            rows(
                out,
                a.decay.rows.into_iter().map(|r| DecayCsv {
                    n: r.n,
                    sup_dh: r.sup_dh,
                    sup_ddh: r.sup_ddh,
                    ratio: r.ratio,
                    flag: r.flag,
                }),
            )
        }
        PlotKind::Dimension => {
            let a: CantorArtifact = store::read_json(dir, store::CANTOR)?;
            rows(out, a.dimension.rows)
        }
        PlotKind::Cascade => {
            let a: CascadeArtifact = store::read_json(dir, store::CASCADE)?;
            rows(out, a.table.levels)
        }
        PlotKind::Geometry => {
            let a: CascadeArtifact = store::read_json(dir, store::CASCADE)?;
            rows(out, a.geometry)
        }
        PlotKind::Spectrum => {
            let a: SpectrumArtifact = store::read_json(dir, store::SPECTRUM)?;
            rows(
                out,
                a.spectrum.eigenvalues.iter().enumerate().map(|(index, e)| SpectrumCsv {
                    index,
                    re: e.0,
                    im: e.1,
                    modulus: e.0.hypot(e.1),
                }),
            )
        }
        PlotKind::Distortion => {
            let a: DistortionArtifact = store::read_json(dir, store::DISTORTION)?;
            rows(out, a.reports)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_parse_by_name() {
        for k in PlotKind::ALL {
            assert_eq!(k.name().parse::<PlotKind>().unwrap(), k);
        }
        assert!(matches!("histogram".parse::<PlotKind>(), Err(CliError::UnknownKind(_))));
    }

    #[test]
    fn missing_artifact_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let err = emit(dir.path(), PlotKind::Cascade, 0, Vec::new()).unwrap_err();
        assert!(matches!(err, CliError::MissingArtifact { .. }));
    }
}
