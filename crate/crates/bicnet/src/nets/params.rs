//! Ordered, named parameter sets with soft target tracking and a bit-exact
//! byte format (text manifest + little-endian f64 payload).

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::autodiff::Tensor;

#[derive(Debug, Error, PartialEq)]
pub enum ParamsError {
    #[error("duplicate parameter name {0}")]
    DuplicateName(String),
    #[error("parameter {name}: expected shape {expected:?}, got {got:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("parameter sets differ at entry {index}: {left} vs {right}")]
    EntryMismatch {
        index: usize,
        left: String,
        right: String,
    },
    #[error("tau must lie in [0, 1], got {0}")]
    BadTau(f64),
    #[error("bad header: {0}")]
    BadHeader(String),
    #[error("manifest entry {0} is malformed: {1}")]
    BadManifestEntry(usize, String),
    #[error("payload truncated: expected {expected} bytes, got {got}")]
    Truncated { expected: usize, got: usize },
    #[error("trailing {0} unexpected bytes after payload")]
    TrailingBytes(usize),
}

/// Named tensors in a fixed order. The order defines the flat layout used by
/// the optimizer, soft updates, and the byte format.
#[derive(Debug, Clone, Default)]
pub struct ParamSet {
    names: Vec<String>,
    tensors: Vec<Tensor>,
    index: HashMap<String, usize>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) -> Result<(), ParamsError> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(ParamsError::DuplicateName(name));
        }
        self.index.insert(name.clone(), self.tensors.len());
        self.names.push(name);
        self.tensors.push(t);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total number of scalar entries across all tensors.
    pub fn flat_len(&self) -> usize {
        self.tensors.iter().map(|t| t.numel()).sum()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.index.get(name).map(|&i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.index.get(name).copied().map(move |i| &mut self.tensors[i])
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(self.tensors.iter())
    }

    /// Shape signature, used to validate checkpoints against a config.
    pub fn template(&self) -> Vec<(String, Vec<usize>)> {
        self.iter().map(|(n, t)| (n.to_string(), t.shape().to_vec())).collect()
    }

    /// `target <- tau * online + (1 - tau) * target`, entrywise.
    pub fn soft_update_from(&mut self, online: &ParamSet, tau: f64) -> Result<(), ParamsError> {
        if !(0.0..=1.0).contains(&tau) {
            return Err(ParamsError::BadTau(tau));
        }
        check_same_layout(self, online)?;
        for (t, o) in self.tensors.iter_mut().zip(&online.tensors) {
            for (tv, &ov) in t.data_mut().iter_mut().zip(o.data()) {
                *tv = tau * ov + (1.0 - tau) * *tv;
            }
        }
        Ok(())
    }

    /// Byte image: a text manifest (one `name dims` line per tensor) followed
    /// by every tensor's entries as little-endian f64 in manifest order.
    pub fn serialize(&self) -> Vec<u8> {
        let mut header = String::new();
        let _ = writeln!(header, "params v1 {}", self.len());
        for (name, t) in self.iter() {
            let dims: Vec<String> = t.shape().iter().map(|d| d.to_string()).collect();
            let _ = writeln!(header, "{} {}", name, dims.join("x"));
        }
        header.push_str("data\n");
        let mut out = header.into_bytes();
        for t in &self.tensors {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// Parse a byte image produced by [`ParamSet::serialize`].
    pub fn deserialize(bytes: &[u8]) -> Result<ParamSet, ParamsError> {
        let data_tag = b"data\n";
        let split = find_subslice(bytes, data_tag)
            .ok_or_else(|| ParamsError::BadHeader("missing data marker".into()))?;
        let header = std::str::from_utf8(&bytes[..split])
            .map_err(|e| ParamsError::BadHeader(e.to_string()))?;
        let payload = &bytes[split + data_tag.len()..];

        let mut lines = header.lines();
        let first = lines.next().unwrap_or_default();
        let mut parts = first.split_whitespace();
        let (magic, version) = (parts.next(), parts.next());
        if magic != Some("params") || version != Some("v1") {
            return Err(ParamsError::BadHeader(format!("unrecognized header {first:?}")));
        }
        let count: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| ParamsError::BadHeader("missing entry count".into()))?;

        let mut set = ParamSet::new();
        let mut shapes = Vec::with_capacity(count);
        for i in 0..count {
            let line = lines
                .next()
                .ok_or_else(|| ParamsError::BadManifestEntry(i, "missing line".into()))?;
            let (name, dims) = line
                .split_once(' ')
                .ok_or_else(|| ParamsError::BadManifestEntry(i, line.to_string()))?;
            let shape: Vec<usize> = dims
                .split('x')
                .map(|d| d.parse::<usize>())
                .collect::<Result<_, _>>()
                .map_err(|e| ParamsError::BadManifestEntry(i, e.to_string()))?;
            shapes.push((name.to_string(), shape));
        }

        let expected_values: usize = shapes.iter().map(|(_, s)| s.iter().product::<usize>()).sum();
        let expected_bytes = expected_values * 8;
        if payload.len() < expected_bytes {
            return Err(ParamsError::Truncated {
                expected: expected_bytes,
                got: payload.len(),
            });
        }
        if payload.len() > expected_bytes {
            return Err(ParamsError::TrailingBytes(payload.len() - expected_bytes));
        }

        let mut offset = 0usize;
        for (name, shape) in shapes {
            let n: usize = shape.iter().product();
            let mut data = Vec::with_capacity(n);
            for _ in 0..n {
                let mut buf = [0u8; 8];
                buf.copy_from_slice(&payload[offset..offset + 8]);
                data.push(f64::from_le_bytes(buf));
                offset += 8;
            }
            let t = Tensor::new(shape.clone(), data).map_err(|_| ParamsError::ShapeMismatch {
                name: name.clone(),
                expected: shape.clone(),
                got: shape,
            })?;
            set.insert(name, t)?;
        }
        Ok(set)
    }

    /// Check this set against a `(name, shape)` template, naming the first
    /// differing entry.
    pub fn validate_template(&self, template: &[(String, Vec<usize>)]) -> Result<(), ParamsError> {
        let n = self.len().min(template.len());
        for i in 0..n {
            let (name, shape) = &template[i];
            if &self.names[i] != name {
                return Err(ParamsError::EntryMismatch {
                    index: i,
                    left: self.names[i].clone(),
                    right: name.clone(),
                });
            }
            if self.tensors[i].shape() != shape.as_slice() {
                return Err(ParamsError::ShapeMismatch {
                    name: name.clone(),
                    expected: shape.clone(),
                    got: self.tensors[i].shape().to_vec(),
                });
            }
        }
        if self.len() != template.len() {
            return Err(ParamsError::EntryMismatch {
                index: n,
                left: self.names.get(n).cloned().unwrap_or_else(|| "<end>".into()),
                right: template
                    .get(n)
                    .map(|(s, _)| s.clone())
                    .unwrap_or_else(|| "<end>".into()),
            });
        }
        Ok(())
    }
}

fn check_same_layout(a: &ParamSet, b: &ParamSet) -> Result<(), ParamsError> {
    if a.len() != b.len() {
        return Err(ParamsError::EntryMismatch {
            index: a.len().min(b.len()),
            left: format!("{} entries", a.len()),
            right: format!("{} entries", b.len()),
        });
    }
    for i in 0..a.len() {
        if a.names[i] != b.names[i] {
            return Err(ParamsError::EntryMismatch {
                index: i,
                left: a.names[i].clone(),
                right: b.names[i].clone(),
            });
        }
        if a.tensors[i].shape() != b.tensors[i].shape() {
            return Err(ParamsError::ShapeMismatch {
                name: a.names[i].clone(),
                expected: a.tensors[i].shape().to_vec(),
                got: b.tensors[i].shape().to_vec(),
            });
        }
    }
    Ok(())
}

fn find_subslice(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    haystack.windows(needle.len()).position(|w| w == needle)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ParamSet {
        let mut set = ParamSet::new();
        set.insert("a.w", Tensor::matrix(2, 3, vec![1.0, -2.5, 3.25, 0.0, 1e-300, -7.0]).unwrap())
            .unwrap();
        set.insert("a.b", Tensor::new(vec![1, 3], vec![0.5, 0.25, -0.125]).unwrap())
            .unwrap();
        set
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let set = sample();
        let bytes = set.serialize();
        let back = ParamSet::deserialize(&bytes).unwrap();
        assert_eq!(bytes, back.serialize());
        for ((n1, t1), (n2, t2)) in set.iter().zip(back.iter()) {
            assert_eq!(n1, n2);
            for (a, b) in t1.data().iter().zip(t2.data()) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn truncated_image_rejected() {
        let bytes = sample().serialize();
        let err = ParamSet::deserialize(&bytes[..bytes.len() - 3]).unwrap_err();
        assert!(matches!(err, ParamsError::Truncated { .. }));
    }

    #[test]
    fn wrong_shape_named() {
        let set = sample();
        let mut template = set.template();
        template[1].1 = vec![1, 4];
        let err = set.validate_template(&template).unwrap_err();
        match err {
            ParamsError::ShapeMismatch { name, .. } => assert_eq!(name, "a.b"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn soft_update_blends() {
        let mut online = ParamSet::new();
        online.insert("w", Tensor::vector(vec![1.0, 1.0])).unwrap();
        let mut target = ParamSet::new();
        target.insert("w", Tensor::vector(vec![0.0, 0.0])).unwrap();

        let mut t1 = target.clone();
        t1.soft_update_from(&online, 1.0).unwrap();
        assert_eq!(t1.get("w").unwrap().data(), online.get("w").unwrap().data());

        let mut t0 = target.clone();
        t0.soft_update_from(&online, 0.0).unwrap();
        assert_eq!(t0.get("w").unwrap().data(), &[0.0, 0.0]);

        target.soft_update_from(&online, 0.01).unwrap();
        assert_eq!(target.get("w").unwrap().data(), &[0.01, 0.01]);
    }

    #[test]
    fn soft_update_rejects_bad_tau_and_layout() {
        let mut online = ParamSet::new();
        online.insert("w", Tensor::vector(vec![1.0])).unwrap();
        let mut target = online.clone();
        assert_eq!(
            target.soft_update_from(&online, 1.5).unwrap_err(),
            ParamsError::BadTau(1.5)
        );
        let mut other = ParamSet::new();
        other.insert("w", Tensor::vector(vec![1.0, 2.0])).unwrap();
        assert!(matches!(
            other.soft_update_from(&online, 0.5).unwrap_err(),
            ParamsError::ShapeMismatch { .. }
        ));
    }
}
