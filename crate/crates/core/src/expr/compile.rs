//! Flat, value-numbered evaluation programs.
//!
//! Compiling binds parameters, resolves coordinates to slot indices, folds
//! constant subtrees and shares structurally identical subexpressions across
//! every output. A program is then a straight-line list of operations over a
//! scratch buffer, which is what the grid samplers run hundreds of thousands
//! of times.

use super::eval::{binary_value, checked_pow, unary_value};
use super::{BinaryOp, EvalError, Node, ParamBinding, ScalarExpr, UnaryOp};
use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Const(f64),
    Coord(usize),
    Unary(UnaryOp, u32),
    Binary(BinaryOp, u32, u32),
    PowI(u32, i32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Key {
    Const(u64),
    Coord(usize),
    Unary(UnaryOp, u32),
    Binary(BinaryOp, u32, u32),
    PowI(u32, i32),
}

impl Op {
    fn key(&self) -> Key {
        match *self {
            Op::Const(v) => Key::Const(v.to_bits()),
            Op::Coord(i) => Key::Coord(i),
            Op::Unary(o, a) => Key::Unary(o, a),
            Op::Binary(o, a, b) => Key::Binary(o, a, b),
            Op::PowI(a, k) => Key::PowI(a, k),
        }
    }
}

/// A compiled batch of expressions sharing one scratch buffer.
#[derive(Debug, Clone)]
pub struct Program {
    ops: Vec<Op>,
    /// Indices of non-constant ops, in evaluation order.
    live: Vec<u32>,
    outputs: Vec<u32>,
    dim: usize,
}

struct Builder<'a> {
    coords: &'a [String],
    binding: &'a ParamBinding,
    ops: Vec<Op>,
    interned: HashMap<Key, u32>,
    by_ptr: HashMap<usize, u32>,
}

impl Builder<'_> {
    fn push(&mut self, op: Op) -> u32 {
        let key = op.key();
        if let Some(&id) = self.interned.get(&key) {
            return id;
        }
        let id = self.ops.len() as u32;
        self.ops.push(op);
        self.interned.insert(key, id);
        id
    }

    fn constant_of(&self, id: u32) -> Option<f64> {
        match self.ops[id as usize] {
            Op::Const(v) => Some(v),
            _ => None,
        }
    }

    fn lower(&mut self, e: &ScalarExpr) -> Result<u32, EvalError> {
        if let Some(&id) = self.by_ptr.get(&e.ptr_id()) {
            return Ok(id);
        }
        let id = match e.node() {
            Node::Const(v) => self.push(Op::Const(*v)),
            Node::Symbol(s) => {
                if let Some(i) = self.coords.iter().position(|c| c == &**s) {
                    self.push(Op::Coord(i))
                } else if let Some(v) = self.binding.get(s) {
                    self.push(Op::Const(v))
                } else {
                    return Err(EvalError::Unbound(s.to_string()));
                }
            }
            Node::Unary(op, a) => {
                let a = self.lower(a)?;
                match self.constant_of(a).map(|x| unary_value(*op, x)) {
                    Some(Ok(v)) => self.push(Op::Const(v)),
                    _ => self.push(Op::Unary(*op, a)),
                }
            }
            Node::Binary(op, a, b) => {
                let a = self.lower(a)?;
                let b = self.lower(b)?;
                match (self.constant_of(a), self.constant_of(b)) {
                    (Some(x), Some(y)) => match binary_value(*op, x, y) {
                        Ok(v) => self.push(Op::Const(v)),
                        Err(_) => self.push(Op::Binary(*op, a, b)),
                    },
                    (_, Some(y)) if *op == BinaryOp::Pow && y.fract() == 0.0 && y.abs() < 1024.0 => {
                        self.push(Op::PowI(a, y as i32))
                    }
                    _ => self.push(Op::Binary(*op, a, b)),
                }
            }
        };
        self.by_ptr.insert(e.ptr_id(), id);
        Ok(id)
    }
}

impl Program {
    /// Compiles `exprs` against the ordered coordinate names, with every other
    /// symbol taken from `binding`.
    pub fn compile(exprs: &[ScalarExpr], coords: &[String], binding: &ParamBinding) -> Result<Program, EvalError> {
        let mut b = Builder {
            coords,
            binding,
            ops: Vec::new(),
            interned: HashMap::new(),
            by_ptr: HashMap::new(),
        };
        let outputs = exprs.iter().map(|e| b.lower(e)).collect::<Result<Vec<_>, _>>()?;
        let live = b
            .ops
            .iter()
            .enumerate()
            .filter(|(_, op)| !matches!(op, Op::Const(_)))
            .map(|(i, _)| i as u32)
            .collect();
        Ok(Program {
            ops: b.ops,
            live,
            outputs,
            dim: coords.len(),
        })
    }

    pub fn output_count(&self) -> usize {
        self.outputs.len()
    }

    /// The value of output `i` if it does not depend on the point.
    pub fn constant_output(&self, i: usize) -> Option<f64> {
        match self.ops[self.outputs[i] as usize] {
            Op::Const(v) => Some(v),
            _ => None,
        }
    }

    /// Allocates a scratch buffer with constant slots pre-filled.
    pub fn scratch(&self) -> Vec<f64> {
        self.ops
            .iter()
            .map(|op| match op {
                Op::Const(v) => *v,
                _ => 0.0,
            })
            .collect()
    }

    /// Evaluates every output at `point`. `scratch` must come from
    /// [`Program::scratch`] on this program.
    pub fn eval_into(&self, point: &[f64], scratch: &mut [f64], out: &mut [f64]) -> Result<(), EvalError> {
        debug_assert_eq!(point.len(), self.dim);
        debug_assert_eq!(scratch.len(), self.ops.len());
        for &i in &self.live {
            let v = match self.ops[i as usize] {
                Op::Const(v) => v,
                Op::Coord(c) => point[c],
                Op::Unary(op, a) => unary_value(op, scratch[a as usize])?,
                Op::Binary(op, a, b) => binary_value(op, scratch[a as usize], scratch[b as usize])?,
                Op::PowI(a, k) => {
                    let x = scratch[a as usize];
                    if k >= 0 && k <= 4 {
                        let v = match k {
                            0 => 1.0,
                            1 => x,
                            2 => x * x,
                            3 => x * x * x,
                            _ => (x * x) * (x * x),
                        };
                        super::eval::finite(v)?
                    } else {
                        checked_pow(x, f64::from(k))?
                    }
                }
            };
            scratch[i as usize] = v;
        }
        for (o, &id) in out.iter_mut().zip(&self.outputs) {
            *o = scratch[id as usize];
        }
        Ok(())
    }

    /// Convenience single-point evaluation.
    pub fn eval(&self, point: &[f64]) -> Result<Vec<f64>, EvalError> {
        let mut scratch = self.scratch();
        let mut out = vec![0.0; self.outputs.len()];
        self.eval_into(point, &mut scratch, &mut out)?;
        Ok(out)
    }
}
