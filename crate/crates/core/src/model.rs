//! A trained stack bundled with the input encoding it was trained on.

use image::RgbImage;

use crate::dbn::DbnStack;
use crate::decision::{encode_input, infer_decision, DecisionConfig, DecisionOutput};
use crate::error::{Error, Result};
use crate::graph::{Point, RoadGraph};
use crate::search::DecisionFn;

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub stack: DbnStack,
    pub decision: DecisionConfig,
}

impl Model {
    /// Fails unless the stack's input and head fit the encoding.
    pub fn new(stack: DbnStack, decision: DecisionConfig) -> Result<Self> {
        decision.validate()?;
        stack.validate()?;
        if stack.n_inputs() != decision.input_len() {
            return Err(Error::Structure(format!(
                "stack takes {} inputs, window {} needs {}",
                stack.n_inputs(),
                decision.window,
                decision.input_len()
            )));
        }
        if let Some(h) = stack.head() {
            if h.angle_bins() != decision.angle_bins {
                return Err(Error::Structure("head angle bins differ from the encoding".into()));
            }
        }
        Ok(Self { stack, decision })
    }

    pub fn decide_at(&self, graph: &RoadGraph, position: Point, image: &RgbImage) -> Result<DecisionOutput> {
        let input = encode_input(image, graph, position, &self.decision)?;
        infer_decision(&self.stack, &input)
    }
}

impl DecisionFn for Model {
    fn decide(&mut self, graph: &RoadGraph, position: Point, image: &RgbImage) -> Result<DecisionOutput> {
        self.decide_at(graph, position, image)
    }
}
