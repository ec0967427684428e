// SPDX-License-Identifier: Apache-2.0

//! `length u32 BE || UTF-8 JSON body`.

use std::io::{self, Read, Write};

use thiserror::Error;

use crate::message::Message;

/// Upper bound on a frame body.
pub const MAX_FRAME: usize = 1 << 20;

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("frame of {0} bytes exceeds limit")]
    TooLarge(usize),
    #[error("bad message: {0}")]
    Json(#[from] serde_json::Error),
}

pub fn write_frame<W: Write>(w: &mut W, body: &[u8]) -> Result<(), FrameError> {
    if body.len() > MAX_FRAME {
        return Err(FrameError::TooLarge(body.len()));
    }
    w.write_all(&(body.len() as u32).to_be_bytes())?;
    w.write_all(body)?;
    w.flush()?;
    Ok(())
}

pub fn read_frame<R: Read>(r: &mut R) -> Result<Vec<u8>, FrameError> {
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let len = u32::from_be_bytes(len) as usize;
    if len > MAX_FRAME {
        return Err(FrameError::TooLarge(len));
    }
    let mut body = vec![0u8; len];
    r.read_exact(&mut body)?;
    Ok(body)
}

pub fn write_message<W: Write>(w: &mut W, msg: &Message) -> Result<(), FrameError> {
    write_frame(w, &serde_json::to_vec(msg)?)
}

pub fn read_message<R: Read>(r: &mut R) -> Result<Message, FrameError> {
    Ok(serde_json::from_slice(&read_frame(r)?)?)
}
