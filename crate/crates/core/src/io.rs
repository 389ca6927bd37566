//! JSON forms of matrices, dichotomies, channels and Gibbs specifications.
//!
//! A complex entry is `[re, im]`, a matrix an array of rows. Entries are
//! written with the shortest representation that parses back to the same
//! `f64`, so files round-trip exactly.

use serde::{Deserialize, Serialize};

use crate::channels::{GeneralChannel, TestAndPrepareChannel};
use crate::error::{Error, Result};
use crate::linalg::{c64, CMatrix, HermitianMatrix};
use crate::oneshot::Effect;
use crate::resource::GibbsSpec;
use crate::states::{DensityMatrix, Dichotomy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MatrixJson(pub Vec<Vec<[f64; 2]>>);

impl MatrixJson {
    pub fn from_matrix(m: &CMatrix) -> Self {
        Self(
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
                .collect(),
        )
    }

    pub fn from_hermitian(h: &HermitianMatrix) -> Self {
        Self::from_matrix(h.as_matrix())
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        let rows = self.0.len();
        let cols = self.0.first().map_or(0, Vec::len);
        if rows == 0 || cols == 0 {
            return Err(Error::arg("matrix", "empty matrix"));
        }
        if let Some(bad) = self.0.iter().find(|r| r.len() != cols) {
            return Err(Error::arg(
                "matrix",
                format!("ragged rows: expected {cols} entries, found {}", bad.len()),
            ));
        }
        if self.0.iter().flatten().flatten().any(|v| !v.is_finite()) {
            return Err(Error::arg("matrix", "entries must be finite"));
        }
        Ok(CMatrix::from_fn(rows, cols, |i, j| c64(self.0[i][j][0], self.0[i][j][1])))
    }

    pub fn to_hermitian(&self) -> Result<HermitianMatrix> {
        HermitianMatrix::new(self.to_matrix()?)
    }

    pub fn to_state(&self) -> Result<DensityMatrix> {
        DensityMatrix::from_matrix(self.to_matrix()?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DichotomyJson {
    pub rho: MatrixJson,
    pub sigma: MatrixJson,
}

impl DichotomyJson {
    pub fn from_dichotomy(d: &Dichotomy) -> Self {
        Self {
            rho: MatrixJson::from_hermitian(d.rho.as_hermitian()),
            sigma: MatrixJson::from_hermitian(d.sigma.as_hermitian()),
        }
    }

    pub fn to_dichotomy(&self) -> Result<Dichotomy> {
        Dichotomy::new(self.rho.to_state()?, self.sigma.to_state()?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum ChannelJson {
    TestAndPrepare {
        effect: MatrixJson,
        prep_accept: MatrixJson,
        prep_reject: MatrixJson,
    },
    Kraus {
        kraus: Vec<MatrixJson>,
    },
}

/// A channel read back from JSON.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyChannel {
    TestAndPrepare(TestAndPrepareChannel),
    General(GeneralChannel),
}

impl ChannelJson {
    pub fn from_test_and_prepare(ch: &TestAndPrepareChannel) -> Self {
        Self::TestAndPrepare {
            effect: MatrixJson::from_hermitian(ch.effect().as_hermitian()),
            prep_accept: MatrixJson::from_hermitian(ch.prep_accept().as_hermitian()),
            prep_reject: MatrixJson::from_hermitian(ch.prep_reject().as_hermitian()),
        }
    }

    pub fn from_general(ch: &GeneralChannel) -> Self {
        Self::Kraus {
            kraus: ch.kraus().iter().map(MatrixJson::from_matrix).collect(),
        }
    }

    pub fn to_channel(&self) -> Result<AnyChannel> {
        match self {
            Self::TestAndPrepare {
                effect,
                prep_accept,
                prep_reject,
            } => Ok(AnyChannel::TestAndPrepare(TestAndPrepareChannel::new(
                Effect::new(effect.to_hermitian()?)?,
                prep_accept.to_state()?,
                prep_reject.to_state()?,
            )?)),
            Self::Kraus { kraus } => Ok(AnyChannel::General(GeneralChannel::new(
                kraus.iter().map(MatrixJson::to_matrix).collect::<Result<_>>()?,
            )?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GibbsJson {
    pub hamiltonian: MatrixJson,
    pub beta: f64,
}

impl GibbsJson {
    pub fn from_spec(g: &GibbsSpec) -> Self {
        Self {
            hamiltonian: MatrixJson::from_hermitian(g.hamiltonian()),
            beta: g.beta(),
        }
    }

    pub fn to_spec(&self) -> Result<GibbsSpec> {
        GibbsSpec::new(self.hamiltonian.to_hermitian()?, self.beta)
    }
}

/// Rounds to 9 significant digits, the precision of reported scalars.
/// Non-finite values pass through.
pub fn round_sig9(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}
