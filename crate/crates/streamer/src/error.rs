use blockfield_core::scene::BlockId;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid LOD thresholds: {0}")]
    InvalidThresholds(String),
    #[error("block {0} is not in the manifest")]
    UnknownBlock(BlockId),
    #[error("block {id} needs {bytes} bytes, more than the {budget}-byte budget")]
    AssetTooLarge { id: BlockId, bytes: u64, budget: u64 },
    #[error("fetching block {id} failed: {reason}")]
    Fetch { id: BlockId, reason: String },
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Core(#[from] blockfield_core::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
