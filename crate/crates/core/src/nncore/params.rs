use super::{Matrix, NnError};

/// A trainable tensor with its gradient and momentum slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamTensor {
    pub value: Matrix,
    pub grad: Matrix,
    pub velocity: Matrix,
    /// Buffers (batch-norm running statistics) are stored and checkpointed
    /// alongside parameters but never touched by the optimizer.
    pub trainable: bool,
}

impl ParamTensor {
    pub fn new(value: Matrix, trainable: bool) -> Self {
        let (r, c) = value.shape();
        Self { value, grad: Matrix::zeros(r, c), velocity: Matrix::zeros(r, c), trainable }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

/// Flat, ordered arena of named tensors. Insertion order is the model
/// topology order and fixes the checkpoint layout.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<ParamTensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// # Panics
    /// If `name` is already registered.
    pub fn add(&mut self, name: impl Into<String>, value: Matrix, trainable: bool) -> ParamId {
        let name = name.into();
        assert!(!self.names.contains(&name), "duplicate parameter name {name}");
        self.names.push(name);
        self.tensors.push(ParamTensor::new(value, trainable));
        ParamId(self.tensors.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn value(&self, id: ParamId) -> &Matrix {
        &self.tensors[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.tensors[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &Matrix {
        &self.tensors[id.0].grad
    }

    pub fn accumulate_grad(&mut self, id: ParamId, g: &Matrix) {
        self.tensors[id.0].grad.add_assign(g);
    }

    pub fn tensor(&self, id: ParamId) -> &ParamTensor {
        &self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &ParamTensor)> {
        self.names
            .iter()
            .zip(&self.tensors)
            .enumerate()
            .map(|(i, (n, t))| (ParamId(i), n.as_str(), t))
    }

    pub fn trainable_ids(&self) -> Vec<ParamId> {
        self.iter().filter(|(_, _, t)| t.trainable).map(|(id, _, _)| id).collect()
    }

    pub fn zero_grad(&mut self) {
        self.tensors.iter_mut().for_each(|t| t.grad.fill(0.0));
    }

    pub fn scale_grads(&mut self, s: f64) {
        self.tensors.iter_mut().for_each(|t| t.grad.scale_in_place(s));
    }

    /// Checkpoint bytes: `"CKPT" | u32 count` then per tensor
    /// `u16 name_len | name | u32 rows | u32 cols | rows·cols × f64`, all
    /// little-endian, in topology order.
    pub fn to_checkpoint(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(b"CKPT");
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        for (_, name, t) in self.iter() {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.value.rows() as u32).to_le_bytes());
            out.extend_from_slice(&(t.value.cols() as u32).to_le_bytes());
            for v in t.value.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// Overwrite values from checkpoint bytes; names, order and shapes must
    /// match this store exactly.
    pub fn load_checkpoint(&mut self, bytes: &[u8]) -> Result<(), NnError> {
        let records = read_checkpoint(bytes)?;
        if records.len() != self.len() {
            return Err(NnError::Checkpoint(format!("{} records, model has {}", records.len(), self.len())));
        }
        for (i, (name, m)) in records.into_iter().enumerate() {
            if name != self.names[i] || m.shape() != self.tensors[i].value.shape() {
                return Err(NnError::Checkpoint(format!(
                    "record {i} is {name} {:?}, model expects {} {:?}",
                    m.shape(),
                    self.names[i],
                    self.tensors[i].value.shape()
                )));
            }
            self.tensors[i].value = m;
        }
        Ok(())
    }
}

/// Parse checkpoint bytes into ordered `(name, value)` records.
pub fn read_checkpoint(bytes: &[u8]) -> Result<Vec<(String, Matrix)>, NnError> {
    let bad = |what: &str| NnError::Checkpoint(what.to_owned());
    let mut pos = 0usize;
    let mut take = |n: usize| -> Result<&[u8], NnError> {
        let s = bytes.get(pos..pos + n).ok_or_else(|| bad("truncated checkpoint"))?;
        pos += n;
        Ok(s)
    };
    if take(4)? != b"CKPT" {
        return Err(bad("bad checkpoint magic"));
    }
    let count = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let len = u16::from_le_bytes(take(2)?.try_into().unwrap()) as usize;
        let name = String::from_utf8(take(len)?.to_vec()).map_err(|_| bad("non UTF-8 name"))?;
        let rows = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let cols = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let raw = take(rows * cols * 8)?;
        let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        out.push((name, Matrix::from_vec(rows, cols, data)));
    }
    if pos != bytes.len() {
        return Err(bad("trailing bytes after checkpoint"));
    }
    Ok(out)
}

/// SGD with momentum over every trainable tensor:
/// `v ← momentum·v + g; θ ← θ − lr·v`, then gradients are zeroed.
pub fn sgd_step(store: &mut ParamStore, lr: f64, momentum: f64) {
    for t in store.tensors.iter_mut().filter(|t| t.trainable) {
        t.velocity.scale_in_place(momentum);
        t.velocity.add_assign(&t.grad);
        t.value.axpy(-lr, &t.velocity);
    }
    store.zero_grad();
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_store(v: f64) -> (ParamStore, ParamId) {
        let mut s = ParamStore::new();
        let id = s.add("theta", Matrix::filled(1, 1, v), true);
        (s, id)
    }

    #[test]
    fn zero_grad_zero_velocity_is_noop() {
        let (mut s, id) = scalar_store(3.0);
        sgd_step(&mut s, 1e-3, 0.9);
        assert_eq!(s.value(id).get(0, 0), 3.0);
    }

    #[test]
    fn two_momentum_steps() {
        let (mut s, id) = scalar_store(0.0);
        let g = Matrix::filled(1, 1, 1.0);
        s.accumulate_grad(id, &g);
        sgd_step(&mut s, 1e-3, 0.9);
        assert!((s.value(id).get(0, 0) - (-1e-3)).abs() < 1e-15);
        s.accumulate_grad(id, &g);
        sgd_step(&mut s, 1e-3, 0.9);
        // v = 0.9·1 + 1 = 1.9
        assert!((s.value(id).get(0, 0) - (-1e-3 - 1.9e-3)).abs() < 1e-15);
        assert_eq!(s.grad(id).get(0, 0), 0.0);
    }

    #[test]
    fn zero_momentum_is_plain_descent() {
        let (mut s, id) = scalar_store(1.0);
        for _ in 0..3 {
            s.accumulate_grad(id, &Matrix::filled(1, 1, 2.0));
            sgd_step(&mut s, 0.1, 0.0);
        }
        assert!((s.value(id).get(0, 0) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn buffers_untouched_by_optimizer() {
        let mut s = ParamStore::new();
        let b = s.add("running_mean", Matrix::filled(1, 2, 5.0), false);
        s.accumulate_grad(b, &Matrix::filled(1, 2, 1.0));
        sgd_step(&mut s, 1.0, 0.9);
        assert_eq!(s.value(b), &Matrix::filled(1, 2, 5.0));
    }

    #[test]
    fn checkpoint_round_trip_and_mismatch() {
        let mut s = ParamStore::new();
        s.add("a", Matrix::from_rows(&[[1.0, -2.5], [3.0, 1e-300]]), true);
        s.add("b", Matrix::filled(1, 3, 0.1), false);
        let bytes = s.to_checkpoint();
        let mut t = s.clone();
        t.value_mut(t.id("a").unwrap()).fill(0.0);
        t.load_checkpoint(&bytes).unwrap();
        assert_eq!(t, s);
        let mut other = ParamStore::new();
        other.add("a", Matrix::zeros(2, 2), true);
        assert!(other.load_checkpoint(&bytes).is_err());
        assert!(read_checkpoint(&bytes[..bytes.len() - 3]).is_err());
    }
}
