use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use carbid_core::Block;

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("block log {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("block log {path} line {line}: {reason}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        reason: String,
    },
}

/// Append-only JSON-lines file of blocks in insertion order.
#[derive(Debug)]
pub struct BlockLog {
    path: PathBuf,
    file: File,
}

impl BlockLog {
    /// Opens (creating if needed) and reads back every stored block.
    ///
    /// A final line without a trailing newline is a torn write from a crash;
    /// it is discarded and the file truncated to the last complete record.
    pub fn open(path: impl AsRef<Path>) -> Result<(BlockLog, Vec<Block>), LogError> {
        let path = path.as_ref().to_path_buf();
        let io = |source| LogError::Io {
            path: path.clone(),
            source,
        };
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&path)
            .map_err(io)?;

        let mut blocks = Vec::new();
        let mut good_len = 0u64;
        let mut reader = BufReader::new(&file);
        let mut line = String::new();
        let mut lineno = 0;
        loop {
            line.clear();
            let n = reader.read_line(&mut line).map_err(io)?;
            if n == 0 {
                break;
            }
            lineno += 1;
            if !line.ends_with('\n') {
                break;
            }
            if !line.trim().is_empty() {
                let block = serde_json::from_str(&line).map_err(|e| LogError::Corrupt {
                    path: path.clone(),
                    line: lineno,
                    reason: e.to_string(),
                })?;
                blocks.push(block);
            }
            good_len += n as u64;
        }
        drop(reader);
        if file.metadata().map_err(io)?.len() != good_len {
            file.set_len(good_len).map_err(io)?;
            file.seek(SeekFrom::End(0)).map_err(io)?;
        }
        Ok((BlockLog { path, file }, blocks))
    }

    pub fn append(&mut self, block: &Block) -> Result<(), LogError> {
        let mut line = serde_json::to_string(block).expect("block serializes");
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .and_then(|_| self.file.sync_data())
            .map_err(|source| LogError::Io {
                path: self.path.clone(),
                source,
            })
    }
}
