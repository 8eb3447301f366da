use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::{matrix_from_rows, rows_of, StateSpaceModel};

/// A strictly causal feedback law producing `f(k)` from information
/// available before the current excitation, noise and output are drawn.
///
/// During simulation the loop calls [`FeedbackLaw::feedback`] with the true
/// state `x(k)` (which depends only on signals up to `k − 1`), then forms
/// `u(k) = f(k) + c(k)`, measures `y(k)`, and finally hands `y(k)` to
/// [`FeedbackLaw::observe`].
pub trait FeedbackLaw {
    fn feedback(&mut self, x: &DVector<f64>) -> DVector<f64>;
    fn observe(&mut self, _y: &DVector<f64>) {}
}

/// Linear controllers understood by the simulator and the diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub enum Controller {
    /// Open loop, `f ≡ 0`.
    Zero,
    /// `f(k) = −K x(k)` on the true plant state.
    StateFeedback { k: DMatrix<f64> },
    /// `x_c(k+1) = A_c x_c(k) + B_c y(k)`, `f(k) = C_c x_c(k)`, `x_c(0) = 0`.
    OutputFeedback {
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
    },
}

impl Controller {
    pub fn state_feedback(k: DMatrix<f64>) -> Self {
        Controller::StateFeedback { k }
    }

    /// Checks the controller dimensions against a plant.
    pub fn validate(&self, model: &StateSpaceModel) -> Result<()> {
        let (n, p, m) = (model.n(), model.p(), model.m());
        match self {
            Controller::Zero => Ok(()),
            Controller::StateFeedback { k } => {
                if k.shape() != (p, n) {
                    return Err(Error::Dimension(format!(
                        "state-feedback gain must be {p}x{n}, got {}x{}",
                        k.nrows(),
                        k.ncols()
                    )));
                }
                Ok(())
            }
            Controller::OutputFeedback { a, b, c } => {
                let nc = a.nrows();
                if a.ncols() != nc || b.shape() != (nc, m) || c.shape() != (p, nc) {
                    return Err(Error::Dimension(format!(
                        "output-feedback controller must have A_c {nc}x{nc}, B_c {nc}x{m}, C_c {p}x{nc}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// A fresh runtime instance of the law with zero internal state.
    pub fn law(&self, model: &StateSpaceModel) -> Result<Box<dyn FeedbackLaw>> {
        self.validate(model)?;
        Ok(match self {
            Controller::Zero => Box::new(ZeroLaw { p: model.p() }),
            Controller::StateFeedback { k } => Box::new(StateFeedbackLaw { k: k.clone() }),
            Controller::OutputFeedback { a, b, c } => Box::new(OutputFeedbackLaw {
                a: a.clone(),
                b: b.clone(),
                c: c.clone(),
                xc: DVector::zeros(a.nrows()),
            }),
        })
    }

    pub fn to_json(&self) -> ControllerJson {
        match self {
            Controller::Zero => ControllerJson::Zero,
            Controller::StateFeedback { k } => ControllerJson::StateFeedback { k: rows_of(k) },
            Controller::OutputFeedback { a, b, c } => ControllerJson::OutputFeedback {
                a: rows_of(a),
                b: rows_of(b),
                c: rows_of(c),
            },
        }
    }

    pub fn from_json(doc: &ControllerJson) -> Result<Self> {
        Ok(match doc {
            ControllerJson::Zero => Controller::Zero,
            ControllerJson::StateFeedback { k } => Controller::StateFeedback {
                k: matrix_from_rows(k, "K")?,
            },
            ControllerJson::OutputFeedback { a, b, c } => Controller::OutputFeedback {
                a: matrix_from_rows(a, "A_c")?,
                b: matrix_from_rows(b, "B_c")?,
                c: matrix_from_rows(c, "C_c")?,
            },
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let doc: ControllerJson = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Self::from_json(&doc)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(&self.to_json())?)?;
        Ok(())
    }
}

/// JSON persistence, e.g. `{"type": "state_feedback", "K": [[…]]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControllerJson {
    Zero,
    StateFeedback {
        #[serde(rename = "K")]
        k: Vec<Vec<f64>>,
    },
    OutputFeedback {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        #[serde(rename = "B")]
        b: Vec<Vec<f64>>,
        #[serde(rename = "C")]
        c: Vec<Vec<f64>>,
    },
}

struct ZeroLaw {
    p: usize,
}

impl FeedbackLaw for ZeroLaw {
    fn feedback(&mut self, _x: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(self.p)
    }
}

struct StateFeedbackLaw {
    k: DMatrix<f64>,
}

impl FeedbackLaw for StateFeedbackLaw {
    fn feedback(&mut self, x: &DVector<f64>) -> DVector<f64> {
        -(&self.k * x)
    }
}

struct OutputFeedbackLaw {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    xc: DVector<f64>,
}

impl FeedbackLaw for OutputFeedbackLaw {
    fn feedback(&mut self, _x: &DVector<f64>) -> DVector<f64> {
        &self.c * &self.xc
    }
    fn observe(&mut self, y: &DVector<f64>) {
        self.xc = &self.a * &self.xc + &self.b * y;
    }
}
