use super::AgentMemory;
use crate::sim::World;
use crate::trace::Stage;

/// One planner query. Scripted backends may read the world; remote ones see only the prompt.
pub struct ModelRequest<'a> {
    pub stage: Stage,
    pub prompt: &'a str,
    /// Textual camera summary, also embedded in the prompt.
    pub observation: &'a str,
    pub world: &'a World,
    pub memory: &'a AgentMemory,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelReply {
    pub text: String,
    /// Seconds charged to the episode clock.
    pub latency: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("backend timed out")]
    Timeout,
}

pub trait ModelBackend {
    fn query(&mut self, req: &ModelRequest<'_>) -> Result<ModelReply, BackendError>;
}

impl<B: ModelBackend + ?Sized> ModelBackend for Box<B> {
    fn query(&mut self, req: &ModelRequest<'_>) -> Result<ModelReply, BackendError> {
        (**self).query(req)
    }
}
