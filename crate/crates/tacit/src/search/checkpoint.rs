//! Round-boundary checkpoints tying the search state to the vote log.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hashing::file_digest;

/// Written after every completed round; a resume must find the vote log in
/// exactly the state the checkpoint describes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    /// Last fully completed round.
    pub round: u32,
    pub vote_log_digest: String,
    /// Digest of the search configuration and pair population.
    pub config_digest: String,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, serde_json::to_string_pretty(self)?)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Check the vote log on disk matches what this checkpoint recorded.
    pub fn verify_vote_log(&self, vote_log: &Path) -> Result<()> {
        let digest = file_digest(vote_log)?;
        if digest != self.vote_log_digest {
            return Err(Error::CheckpointMismatch(format!(
                "vote log digest {digest} != checkpoint {}",
                self.vote_log_digest
            )));
        }
        Ok(())
    }
}
