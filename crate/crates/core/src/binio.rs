//! Little-endian helpers shared by the model, checkpoint and result files.

use std::io::{self, Read, Write};

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use crate::game::GameConfig;

pub(crate) fn write_header<W: Write>(w: &mut W, magic: &[u8; 8], version: u32) -> io::Result<()> {
    w.write_all(magic)?;
    w.write_u32::<LE>(version)
}

/// Reads the magic and version, returning the version.
pub(crate) fn read_header<R: Read>(r: &mut R, magic: &[u8; 8]) -> Result<u32, String> {
    let mut m = [0u8; 8];
    r.read_exact(&mut m).map_err(|e| e.to_string())?;
    if &m != magic {
        return Err(format!(
            "expected {:?} file",
            String::from_utf8_lossy(magic).trim_end_matches('\0')
        ));
    }
    r.read_u32::<LE>().map_err(|e| e.to_string())
}

pub(crate) fn write_str<W: Write>(w: &mut W, s: &str) -> io::Result<()> {
    w.write_u32::<LE>(s.len() as u32)?;
    w.write_all(s.as_bytes())
}

pub(crate) fn read_str<R: Read>(r: &mut R) -> io::Result<String> {
    let n = r.read_u32::<LE>()? as usize;
    if n > 1 << 20 {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            "string too long",
        ));
    }
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}

pub(crate) fn read_hash<R: Read>(r: &mut R) -> io::Result<[u8; 32]> {
    let mut h = [0u8; 32];
    r.read_exact(&mut h)?;
    Ok(h)
}

pub(crate) fn write_config<W: Write>(w: &mut W, config: &GameConfig) -> io::Result<()> {
    write_str(w, &config.id().to_string())
}

pub(crate) fn read_config<R: Read>(r: &mut R) -> Result<GameConfig, String> {
    let id = read_str(r).map_err(|e| e.to_string())?;
    id.parse().map_err(|e| format!("config {id:?}: {e}"))
}
