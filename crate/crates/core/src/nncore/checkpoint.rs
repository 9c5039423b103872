//! Network checkpoint file format.
//!
//! Layout:
//!   - one ASCII header line: `irlab-net v1 <s0,s1,...,sk>\n` where the
//!     comma-separated integers are the layer sizes;
//!   - the flat parameter array as little-endian 64-bit IEEE floats, layer
//!     by layer, weights first (row-major, shape `(out_dim, in_dim)`) then
//!     biases.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::Network;
use crate::error::{Error, Result};

const MAGIC: &str = "irlab-net";
const VERSION: &str = "v1";

pub fn save_network(net: &Network, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut w = BufWriter::new(File::create(path)?);
    let sizes: Vec<String> = net.layer_sizes().iter().map(|s| s.to_string()).collect();
    writeln!(w, "{MAGIC} {VERSION} {}", sizes.join(","))?;
    for p in net.to_flat() {
        w.write_all(&p.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_network(path: &Path) -> Result<Network> {
    let mut r = BufReader::new(File::open(path)?);
    let mut header = Vec::new();
    // Read up to the first newline by hand; the rest of the file is binary.
    let mut byte = [0u8; 1];
    loop {
        let n = r.read(&mut byte)?;
        if n == 0 {
            return Err(Error::Parse { line: 1, message: "missing header line".into() });
        }
        if byte[0] == b'\n' {
            break;
        }
        header.push(byte[0]);
        if header.len() > 4096 {
            return Err(Error::Parse { line: 1, message: "header line too long".into() });
        }
    }
    let header = String::from_utf8(header)
        .map_err(|_| Error::Parse { line: 1, message: "header is not UTF-8".into() })?;
    let mut parts = header.split_whitespace();
    let magic = parts.next().unwrap_or("");
    let version = parts.next().unwrap_or("");
    if magic != MAGIC {
        return Err(Error::Parse { line: 1, message: format!("bad magic '{magic}'") });
    }
    if version != VERSION {
        return Err(Error::Version { expected: VERSION.into(), found: version.into() });
    }
    let sizes_str = parts
        .next()
        .ok_or_else(|| Error::Parse { line: 1, message: "missing layer sizes".into() })?;
    let layer_sizes: Vec<usize> = sizes_str
        .split(',')
        .map(|s| {
            s.parse::<usize>()
                .map_err(|_| Error::Parse { line: 1, message: format!("bad layer size '{s}'") })
        })
        .collect::<Result<_>>()?;

    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Parse {
            line: 2,
            message: format!("parameter payload truncated ({} bytes)", bytes.len()),
        });
    }
    let flat: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let net = Network::from_flat(&layer_sizes, &flat).map_err(|_| Error::Parse {
        line: 2,
        message: format!(
            "expected {} parameters for sizes {:?}, found {}",
            layer_sizes.windows(2).map(|p| (p[0] + 1) * p[1]).sum::<usize>(),
            layer_sizes,
            flat.len()
        ),
    })?;
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::init_network;

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.bin");
        let net = init_network(&[3, 16, 2], 4).unwrap();
        save_network(&net, &path).unwrap();
        let back = load_network(&path).unwrap();
        assert_eq!(back.layer_sizes(), net.layer_sizes());
        assert_eq!(back.to_flat(), net.to_flat());
    }

    #[test]
    fn truncated_file_is_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.bin");
        let net = init_network(&[2, 2], 0).unwrap();
        save_network(&net, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(load_network(&path), Err(Error::Parse { .. })));
    }

    #[test]
    fn version_mismatch_is_version_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.bin");
        std::fs::write(&path, b"irlab-net v9 2,2\n").unwrap();
        assert!(matches!(load_network(&path), Err(Error::Version { .. })));
    }
}
