//! A model bundled with the emission channel being observed.

use crate::atomic::{attach_detector, build_hyperfine_model, DetectorAttachment, HalfInt, HyperfineSpec};
use crate::error::{Error, Result};
use crate::liouville::LindbladModel;
use crate::models::{attach_detector_mode, build_lambda_emitter, lambda_lowering, DetectorParams, LambdaParams};
use crate::qops::Operator;

/// Which emitter transition is observed in a hyperfine model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    /// `|F_g, m_g⟩⟨F_e, m_e|`.
    Transition { m_g: HalfInt, m_e: HalfInt },
    /// All decays emitting polarization `q`.
    Polarization(i32),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub model: LindbladModel,
    /// Lowering operator of the observed transition, on the full layout.
    pub lowering: Operator,
    /// Subsystem index of the detector mode, when one is attached.
    pub detector_slot: Option<usize>,
}

impl Scenario {
    pub fn lambda(p: &LambdaParams, detector: Option<&DetectorParams>) -> Result<Self> {
        let bare = build_lambda_emitter(p)?;
        let lowering = lambda_lowering();
        match detector {
            None => Ok(Self { model: bare, lowering, detector_slot: None }),
            Some(d) => {
                let model = attach_detector_mode(&bare, &lowering, d)?;
                Ok(Self::with_detector(model, &lowering, d.n_max))
            }
        }
    }

    pub fn hyperfine(spec: &HyperfineSpec, channel: Channel, detector: Option<&DetectorParams>) -> Result<Self> {
        let bare = build_hyperfine_model(spec)?;
        let lowering = match channel {
            Channel::Transition { m_g, m_e } => spec.transition_lowering(m_g, m_e)?,
            Channel::Polarization(q) => {
                if !(-1..=1).contains(&q) {
                    return Err(Error::param("channel", "polarization must be -1, 0 or 1"));
                }
                spec.decay_operator(q)?
            }
        };
        match detector {
            None => Ok(Self { model: bare, lowering, detector_slot: None }),
            Some(d) => {
                let Channel::Transition { m_g, m_e } = channel else {
                    return Err(Error::param("channel", "a detector needs a single transition"));
                };
                let model = attach_detector(&bare, spec, &DetectorAttachment { m_g, m_e, detector: *d })?;
                Ok(Self::with_detector(model, &lowering, d.n_max))
            }
        }
    }

    fn with_detector(model: LindbladModel, emitter_lowering: &Operator, n_max: usize) -> Self {
        let slot = model.layout().num_subsystems() - 1;
        let id = Operator::identity(&crate::qops::SpaceLayout::single(n_max + 1).expect("n_max validated"));
        Self { lowering: emitter_lowering.kron(&id), model, detector_slot: Some(slot) }
    }
}
