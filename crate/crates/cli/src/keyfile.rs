use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;

use carbid_core::{Address, Keypair};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Keyfile {
    pub secret_key: String,
    pub public_key: String,
    pub address: Address,
}

impl Keyfile {
    pub fn from_keypair(k: &Keypair) -> Self {
        Keyfile {
            secret_key: hex::encode(k.secret_bytes()),
            public_key: k.public_key().to_string(),
            address: k.address(),
        }
    }

    /// Loads and checks that the stored public key and address are the ones
    /// the secret derives.
    pub fn load(path: &Path) -> Result<Keypair, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("reading key {}: {e}", path.display())))?;
        let file: Keyfile = serde_json::from_str(&text)
            .map_err(|e| CliError::Input(format!("parsing key {}: {e}", path.display())))?;
        let key = Keypair::from_secret_hex(&file.secret_key)
            .map_err(|e| CliError::Input(format!("key {}: {e}", path.display())))?;
        if Keyfile::from_keypair(&key) != file {
            return Err(CliError::Input(format!(
                "key {}: public key or address does not match the secret",
                path.display()
            )));
        }
        Ok(key)
    }

    /// Writes owner-readable only. Refuses to replace an existing file unless `force`.
    pub fn write(&self, path: &Path, force: bool) -> Result<(), CliError> {
        let mut opts = OpenOptions::new();
        opts.write(true);
        if force {
            opts.create(true).truncate(true);
        } else {
            opts.create_new(true);
        }
        #[cfg(unix)]
        {
            use std::os::unix::fs::OpenOptionsExt;
            opts.mode(0o600);
        }
        let mut f = opts
            .open(path)
            .map_err(|e| CliError::Input(format!("writing key {}: {e}", path.display())))?;
        #[cfg(unix)]
        {
            use std::os::unix::fs::PermissionsExt;
            let _ = f.set_permissions(std::fs::Permissions::from_mode(0o600));
        }
        let text = serde_json::to_string_pretty(self).expect("keyfile serializes") + "\n";
        f.write_all(text.as_bytes())
            .map_err(|e| CliError::Input(format!("writing key {}: {e}", path.display())))
    }
}
