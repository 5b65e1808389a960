//! Wire messages. One JSON object per WebSocket text frame.

use serde::{Deserialize, Serialize};
use textmerge::{ClientId, DiffSeq};

/// Every message either side can send, tagged by `"t"`.
///
/// Client to server: `join`, `put`, `get`. Server to client: `doc`, `diffs`,
/// `err`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "t", rename_all = "lowercase", deny_unknown_fields)]
pub enum WireMsg {
    Join {
        client: ClientId,
    },
    Put {
        diffs: DiffSeq,
        /// Highest batch serial the client had applied when it made `diffs`.
        seen: u64,
    },
    Get,
    Doc {
        text: String,
        serial: u64,
    },
    Diffs {
        diffs: DiffSeq,
        serial: u64,
    },
    Err {
        msg: String,
    },
}

impl WireMsg {
    pub fn encode(&self) -> String {
        serde_json::to_string(self).expect("wire messages always serialize")
    }

    pub fn decode(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn err(msg: impl std::fmt::Display) -> Self {
        WireMsg::Err { msg: msg.to_string() }
    }
}
