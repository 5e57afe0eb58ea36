//! Dataset files: `object_id,t,value` text rows and a binary form.
//!
//! Binary layout (little-endian): magic `TRNK`, version u16, kind byte 0,
//! one pad byte, `m` u64, `N` u64, `T` f64, then for each object in id order
//! its vertex count u64 followed by `(t, v)` f64 pairs.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use trank_core::storage::MAGIC;
use trank_core::{Dataset, ObjectId, Polyline, Vertex};

use crate::{Error, Result};

pub const DATASET_VERSION: u16 = 1;
const HEADER_LEN: usize = 32;

pub fn write_dataset(ds: &Dataset, w: &mut impl Write) -> Result<()> {
    let mut head = [0u8; HEADER_LEN];
    head[..4].copy_from_slice(&MAGIC);
    head[4..6].copy_from_slice(&DATASET_VERSION.to_le_bytes());
    head[8..16].copy_from_slice(&(ds.m() as u64).to_le_bytes());
    head[16..24].copy_from_slice(&(ds.n() as u64).to_le_bytes());
    head[24..32].copy_from_slice(&ds.t_end().to_le_bytes());
    w.write_all(&head)?;
    for p in ds.polylines() {
        w.write_all(&(p.vertices().len() as u64).to_le_bytes())?;
        for v in p.vertices() {
            w.write_all(&v.t.to_le_bytes())?;
            w.write_all(&v.v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_dataset(r: &mut impl Read) -> Result<Dataset> {
    let mut head = [0u8; HEADER_LEN];
    r.read_exact(&mut head)?;
    if head[..4] != MAGIC || head[6] != 0 {
        return Err(Error::Format("not a trank dataset file".into()));
    }
    let version = u16::from_le_bytes([head[4], head[5]]);
    if version != DATASET_VERSION {
        return Err(Error::Format(format!("unsupported dataset version {version}")));
    }
    let m = u64::from_le_bytes(head[8..16].try_into().unwrap());
    let n = u64::from_le_bytes(head[16..24].try_into().unwrap());
    let t_end = f64::from_le_bytes(head[24..32].try_into().unwrap());
    let mut polys = Vec::with_capacity(m.min(1 << 20) as usize);
    let mut word = [0u8; 8];
    let mut f64_of = |r: &mut dyn Read| -> Result<f64> {
        r.read_exact(&mut word)?;
        Ok(f64::from_le_bytes(word))
    };
    for i in 0..m as usize {
        let mut cnt = [0u8; 8];
        r.read_exact(&mut cnt)?;
        let len = u64::from_le_bytes(cnt);
        if len > n + 1 {
            return Err(Error::Format(format!("object {} claims {len} vertices", i + 1)));
        }
        let mut vs = Vec::with_capacity(len as usize);
        for _ in 0..len {
            let t = f64_of(r)?;
            vs.push(Vertex::new(t, f64_of(r)?));
        }
        polys.push(Polyline::new(ObjectId::from_index(i), vs)?);
    }
    let ds = Dataset::with_domain(polys, t_end)?;
    if ds.n() as u64 != n {
        return Err(Error::Format(format!("header says N = {n}, file holds {}", ds.n())));
    }
    Ok(ds)
}

pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_dataset(ds, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Loads a binary dataset, or parses text rows if the file lacks the magic.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    let is_binary = r.read_exact(&mut magic).is_ok() && magic == MAGIC;
    if is_binary {
        let mut r = BufReader::new(File::open(path)?);
        return read_dataset(&mut r);
    }
    Ok(read_csv(File::open(path)?)?.0)
}

/// Parses `object_id,t,value` rows. A first row that does not parse is taken
/// as a header. Object ids may be any non-negative integers; they are
/// renumbered `1..=m` in ascending order and the original ids returned
/// alongside (position `i` holds the id now called `i + 1`).
pub fn read_csv(r: impl Read) -> Result<(Dataset, Vec<u64>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).comment(Some(b'#')).from_reader(r);
    let mut objects: BTreeMap<u64, Vec<Vertex>> = BTreeMap::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != 3 {
            return Err(Error::Format(format!("row {}: expected 3 fields, found {}", line + 1, rec.len())));
        }
        let parsed = (rec[0].parse::<u64>(), rec[1].parse::<f64>(), rec[2].parse::<f64>());
        let (id, t, v) = match parsed {
            (Ok(id), Ok(t), Ok(v)) => (id, t, v),
            _ if line == 0 => continue,
            _ => return Err(Error::Format(format!("row {}: cannot parse {:?}", line + 1, rec.iter().collect::<Vec<_>>()))),
        };
        if !(t.is_finite() && v.is_finite()) || t < 0.0 {
            return Err(Error::Format(format!("row {}: time must be finite and non-negative, value finite", line + 1)));
        }
        let vs = objects.entry(id).or_default();
        if let Some(last) = vs.last() {
            if t <= last.t {
                return Err(Error::Format(format!("row {}: object {id} times must strictly increase", line + 1)));
            }
        }
        vs.push(Vertex::new(t, v));
    }
    if objects.is_empty() {
        return Err(Error::Format("no rows".into()));
    }
    let ids = objects.keys().copied().collect();
    let polys = objects
        .into_values()
        .enumerate()
        .map(|(i, vs)| Polyline::new(ObjectId::from_index(i), vs))
        .collect::<trank_core::Result<Vec<_>>>()?;
    Ok((Dataset::new(polys)?, ids))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::synth::{SynthProfile, ValueModel};

    #[test]
    fn binary_round_trip() {
        let ds = SynthProfile::new(ValueModel::RandomWalkMixed, 15, 9, 4).generate();
        let mut buf = Vec::new();
        write_dataset(&ds, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"TRNK");
        assert_eq!(read_dataset(&mut buf.as_slice()).unwrap(), ds);
        buf[6] = 3;
        assert!(read_dataset(&mut buf.as_slice()).is_err());
        assert!(read_dataset(&mut &buf[..20]).is_err());
    }

    #[test]
    fn csv_rows() {
        let text = "object_id,t,value\n7,0,2\n3,0,0\n7,10,2\n3,10,10\n";
        let (ds, ids) = read_csv(text.as_bytes()).unwrap();
        assert_eq!(ids, vec![3, 7]);
        assert_eq!(ds.m(), 2);
        assert_eq!(ds.n(), 2);
        assert_eq!(ds.t_end(), 10.0);
        assert_eq!(ds.polyline(ObjectId(2)).unwrap().total(), 20.0);
    }

    #[test]
    fn csv_rejects_bad_rows() {
        for bad in ["1,0,1\n1,0,2\n", "1,0,1\n1,x,2\n", "1,0\n", "1,5,1\n", "", "1,-1,0\n1,2,0\n"] {
            assert!(read_csv(bad.as_bytes()).is_err(), "{bad:?}");
        }
    }
}
