//! Binary checkpoint format.
//!
//! ```text
//! "LWPT"            4 bytes magic
//! version           u16 LE
//! count             u32 LE
//! count × {
//!     name_len      u32 LE
//!     name          UTF-8 bytes
//!     rank          u8
//!     dims          rank × u32 LE
//!     values        prod(dims) × f64 LE
//! }
//! ```

use std::io::{Read, Write};

use super::{AdError, Tensor};

pub const MAGIC: &[u8; 4] = b"LWPT";
pub const VERSION: u16 = 1;

pub fn write_tensors<W: Write>(mut w: W, tensors: &[(String, Tensor)]) -> Result<(), AdError> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for (name, t) in tensors {
        if t.rank() > u8::MAX as usize {
            return Err(AdError::Checkpoint(format!("tensor {name} has rank {}", t.rank())));
        }
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&[t.rank() as u8])?;
        for &d in t.shape() {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        for &v in t.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_array<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N], AdError> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

pub fn read_tensors<R: Read>(mut r: R) -> Result<Vec<(String, Tensor)>, AdError> {
    let magic: [u8; 4] = read_array(&mut r)?;
    if &magic != MAGIC {
        return Err(AdError::Checkpoint(format!("bad magic {magic:?}")));
    }
    let version = u16::from_le_bytes(read_array(&mut r)?);
    if version != VERSION {
        return Err(AdError::Checkpoint(format!("unsupported checkpoint version {version}")));
    }
    let count = u32::from_le_bytes(read_array(&mut r)?);
    let mut out = Vec::with_capacity(count.min(4096) as usize);
    for _ in 0..count {
        let len = u32::from_le_bytes(read_array(&mut r)?) as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|e| AdError::Checkpoint(format!("tensor name: {e}")))?;
        let [rank] = read_array::<_, 1>(&mut r)?;
        let mut shape = Vec::with_capacity(rank as usize);
        for _ in 0..rank {
            shape.push(u32::from_le_bytes(read_array(&mut r)?) as usize);
        }
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(f64::from_le_bytes(read_array(&mut r)?));
        }
        out.push((name, Tensor::new(shape, data)?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            vals in prop::collection::vec(any::<f64>(), 0..24),
            name in "[a-z0-9_./]{0,16}",
        ) {
            let t = Tensor::vector(vals.clone());
            let m = Tensor::new(vec![1, vals.len()], vals).unwrap();
            let tensors = vec![(name.clone(), t), (format!("{name}/m"), m), ("s".into(), Tensor::scalar(-0.0))];
            let mut buf = Vec::new();
            write_tensors(&mut buf, &tensors).unwrap();
            let back = read_tensors(buf.as_slice()).unwrap();
            prop_assert_eq!(back.len(), tensors.len());
            for ((n1, t1), (n2, t2)) in tensors.iter().zip(&back) {
                prop_assert_eq!(n1, n2);
                prop_assert_eq!(t1.shape(), t2.shape());
                let b1: Vec<u64> = t1.data().iter().map(|v| v.to_bits()).collect();
                let b2: Vec<u64> = t2.data().iter().map(|v| v.to_bits()).collect();
                prop_assert_eq!(b1, b2);
            }
        }
    }

    #[test]
    fn header_layout() {
        let mut buf = Vec::new();
        write_tensors(&mut buf, &[("ab".into(), Tensor::new(vec![2, 1], vec![1.0, 2.0]).unwrap())]).unwrap();
        assert_eq!(&buf[..4], b"LWPT");
        assert_eq!(&buf[4..6], &1u16.to_le_bytes());
        assert_eq!(&buf[6..10], &1u32.to_le_bytes());
        assert_eq!(&buf[10..14], &2u32.to_le_bytes());
        assert_eq!(&buf[14..16], b"ab");
        assert_eq!(buf[16], 2);
        assert_eq!(buf.len(), 16 + 1 + 8 + 16);
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_tensors(&b"NOPE\x01\x00"[..]).is_err());
        let mut buf = Vec::new();
        write_tensors(&mut buf, &[("x".into(), Tensor::vector(vec![1.0; 4]))]).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(read_tensors(buf.as_slice()).is_err());
    }
}
