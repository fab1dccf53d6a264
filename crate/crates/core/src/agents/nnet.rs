use super::{Agent, AgentRanking, PickContext};
use crate::error::{Error, Result};
use crate::nn::{Matrix, Network};
use crate::rng::StreamRng;

/// Trained network mapping a collection count vector to one logit per card.
#[derive(Debug, Clone, PartialEq)]
pub struct NNetModel {
    pub set_code: String,
    pub network: Network<f32>,
}

impl NNetModel {
    pub fn new(set_code: impl Into<String>, network: Network<f32>) -> Self {
        NNetModel {
            set_code: set_code.into(),
            network,
        }
    }

    pub fn set_size(&self) -> usize {
        self.network.outputs()
    }

    /// Inference-mode output over the whole set.
    pub fn predict(&self, counts: &[u32]) -> Result<Vec<f32>> {
        let x = Matrix::from_vec(1, counts.len(), counts.iter().map(|&c| c as f32).collect());
        Ok(self.network.forward_infer(&x)?.data)
    }

    /// Network outputs restricted to the pack: only pack cards are eligible.
    pub fn scores(&self, ctx: &PickContext<'_>) -> Result<Vec<f64>> {
        let s = self.set_size();
        if ctx.collection.set_size() != s {
            return Err(Error::Shape(format!(
                "collection over {} cards, model over {s}",
                ctx.collection.set_size()
            )));
        }
        if let Some(&bad) = ctx.pack.iter().find(|&&c| c >= s) {
            return Err(Error::Shape(format!("pack card {bad} outside model of {s} cards")));
        }
        let y = self.predict(ctx.collection.counts())?;
        Ok(ctx.pack.iter().map(|&c| y[c] as f64).collect())
    }
}

impl Agent for NNetModel {
    fn name(&self) -> String {
        "NNetBot".into()
    }

    fn set_code(&self) -> Option<&str> {
        Some(&self.set_code)
    }

    fn rank(&self, ctx: &PickContext<'_>, _rng: &mut StreamRng) -> Result<AgentRanking> {
        AgentRanking::from_scores(ctx.pack, self.scores(ctx)?)
    }
}
