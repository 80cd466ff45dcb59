//! Exact statevector simulation of the 4-qubit defuzzifier circuit.
//!
//! Basis index bit `q - 1` holds qubit `q`, so qubit 1 is the least
//! significant bit of `|q4 q3 q2 q1>`.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const QUBITS: usize = 4;
pub const DIM: usize = 1 << QUBITS;
pub const LAYERS: usize = 3;
pub const ANGLES: usize = LAYERS * QUBITS;

/// Entangling ring applied after the rotation layers: `(control, control, target)`.
pub const CCNOT_RING: [(usize, usize, usize); 4] = [(1, 2, 3), (2, 3, 4), (3, 4, 1), (4, 1, 2)];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// Axis of each rotation layer.
pub const LAYER_AXES: [Axis; LAYERS] = [Axis::Y, Axis::X, Axis::Y];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector<T = f64> {
    pub amplitudes: [Complex<T>; DIM],
}

impl<T: Scalar> StateVector<T> {
    /// `|0000>`
    pub fn ground() -> Self {
        let mut amplitudes = [Complex::new(T::zero(), T::zero()); DIM];
        amplitudes[0] = Complex::new(T::one(), T::zero());
        Self { amplitudes }
    }

    pub fn basis(index: usize) -> Result<Self> {
        if index >= DIM {
            return Err(Error::Argument(format!("basis index {index} out of range 0..{DIM}")));
        }
        let mut s = Self { amplitudes: [Complex::new(T::zero(), T::zero()); DIM] };
        s.amplitudes[index] = Complex::new(T::one(), T::zero());
        Ok(s)
    }

    pub fn norm_sqr(&self) -> T {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> [T; DIM] {
        let mut p = [T::zero(); DIM];
        for (pi, a) in p.iter_mut().zip(&self.amplitudes) {
            *pi = a.norm_sqr();
        }
        p
    }

    /// Probability of measuring `qubit` in state 1.
    pub fn prob_one(&self, qubit: usize) -> Result<T> {
        let bit = bit_of(qubit)?;
        Ok(self
            .amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| i & bit != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    /// `|<self|other>|^2`
    pub fn fidelity(&self, other: &Self) -> T {
        let inner: Complex<T> = self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .fold(Complex::new(T::zero(), T::zero()), |acc, v| acc + v);
        inner.norm_sqr()
    }
}

fn bit_of(qubit: usize) -> Result<usize> {
    if !(1..=QUBITS).contains(&qubit) {
        return Err(Error::Argument(format!("qubit index {qubit} must be in 1..={QUBITS}")));
    }
    Ok(1 << (qubit - 1))
}

fn rotate_in_place<T: Scalar>(amps: &mut [Complex<T>; DIM], bit: usize, axis: Axis, theta: T) {
    let half = theta * T::of(0.5);
    let (s, c) = half.sin_cos();
    for i in 0..DIM {
        if i & bit != 0 {
            continue;
        }
        let (a0, a1) = (amps[i], amps[i | bit]);
        let (n0, n1) = match axis {
            Axis::Y => (a0 * c - a1 * s, a0 * s + a1 * c),
            Axis::X => {
                let mis = Complex::new(T::zero(), -s);
                (a0 * c + a1 * mis, a0 * mis + a1 * c)
            }
        };
        amps[i] = n0;
        amps[i | bit] = n1;
    }
}

fn ccnot_in_place<T: Scalar>(amps: &mut [Complex<T>; DIM], c1: usize, c2: usize, target: usize) {
    let controls = c1 | c2;
    for i in 0..DIM {
        if i & controls == controls && i & target == 0 {
            amps.swap(i, i | target);
        }
    }
}

/// `exp(-i theta A / 2)` on one qubit, `A` in {X, Y}.
pub fn apply_rotation<T: Scalar>(s: &StateVector<T>, qubit: usize, axis: Axis, theta: T) -> Result<StateVector<T>> {
    let bit = bit_of(qubit)?;
    let mut out = *s;
    rotate_in_place(&mut out.amplitudes, bit, axis, theta);
    Ok(out)
}

/// Toffoli gate: flips `target` where both controls are 1.
pub fn apply_ccnot<T: Scalar>(s: &StateVector<T>, controls: (usize, usize), target: usize) -> Result<StateVector<T>> {
    let (a, b) = controls;
    if a == b || a == target || b == target {
        return Err(Error::Argument(format!(
            "CCNOT needs three distinct qubits, got controls ({a}, {b}) and target {target}"
        )));
    }
    let mut out = *s;
    ccnot_in_place(&mut out.amplitudes, bit_of(a)?, bit_of(b)?, bit_of(target)?);
    Ok(out)
}

pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Encoding angle `pi * sigmoid(f)`.
pub fn encoding_angle<T: Scalar>(f: T) -> T {
    T::of(std::f64::consts::PI) * sigmoid(f)
}

/// Product state `R_Y(pi sigmoid(f_q)) |0>` on every qubit.
pub fn encode_features<T: Scalar>(f: &[T; QUBITS]) -> StateVector<T> {
    let mut angles = [T::zero(); QUBITS];
    for (a, &v) in angles.iter_mut().zip(f) {
        *a = encoding_angle(v);
    }
    encode_angles(&angles)
}

/// Product state from explicit encoding angles.
pub fn encode_angles<T: Scalar>(angles: &[T; QUBITS]) -> StateVector<T> {
    let mut s = StateVector::ground();
    for (q, &theta) in angles.iter().enumerate() {
        rotate_in_place(&mut s.amplitudes, 1 << q, Axis::Y, theta);
    }
    s
}

/// Shared rotation angles plus the readout affine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircuitParams<T = f64> {
    /// `angles[layer * 4 + (qubit - 1)]`
    pub angles: [T; ANGLES],
    pub scale: T,
    pub offset: T,
}

impl<T: Scalar> Default for CircuitParams<T> {
    fn default() -> Self {
        Self {
            angles: [T::zero(); ANGLES],
            scale: T::one(),
            offset: T::zero(),
        }
    }
}

/// Rotation layers then the CCNOT ring, in place.
fn evolve<T: Scalar>(amps: &mut [Complex<T>; DIM], angles: &[T; ANGLES]) {
    for (layer, &axis) in LAYER_AXES.iter().enumerate() {
        for q in 0..QUBITS {
            rotate_in_place(amps, 1 << q, axis, angles[layer * QUBITS + q]);
        }
    }
    for &(a, b, t) in &CCNOT_RING {
        ccnot_in_place(amps, 1 << (a - 1), 1 << (b - 1), 1 << (t - 1));
    }
}

/// Circuit output state for explicit encoding angles.
pub fn circuit_state<T: Scalar>(encoding: &[T; QUBITS], angles: &[T; ANGLES]) -> StateVector<T> {
    let mut s = encode_angles(encoding);
    evolve(&mut s.amplitudes, angles);
    s
}

/// `P(qubit 1 = 1)` after the full circuit.
pub fn readout_probability<T: Scalar>(encoding: &[T; QUBITS], angles: &[T; ANGLES]) -> T {
    let s = circuit_state(encoding, angles);
    s.amplitudes
        .iter()
        .enumerate()
        .filter(|(i, _)| i & 1 == 1)
        .map(|(_, a)| a.norm_sqr())
        .sum::<T>()
        .min(T::one())
}

/// `sigmoid(scale (2P - 1) + offset)`
pub fn readout<T: Scalar>(prob: T, p: &CircuitParams<T>) -> T {
    sigmoid(p.scale * (T::of(2.0) * prob - T::one()) + p.offset)
}

/// Encode `f`, evolve, measure qubit 1 and apply the readout sigmoid.
pub fn run_circuit<T: Scalar>(f: &[T; QUBITS], p: &CircuitParams<T>) -> T {
    readout(circuit_probability(f, p), p)
}

/// Raw `P(qubit 1 = 1)` for features `f`.
pub fn circuit_probability<T: Scalar>(f: &[T; QUBITS], p: &CircuitParams<T>) -> T {
    let mut enc = [T::zero(); QUBITS];
    for (e, &v) in enc.iter_mut().zip(f) {
        *e = encoding_angle(v);
    }
    readout_probability(&enc, &p.angles)
}

/// A circuit angle that the shift rule can differentiate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftParam {
    /// Shared rotation angle, `0..12`.
    Layer(usize),
    /// Encoding angle of a qubit, `1..=4`.
    Encoding(usize),
}

/// `dP/dtheta = [P(theta + pi/2) - P(theta - pi/2)] / 2`, with `P` the raw
/// qubit-1 probability.
pub fn parameter_shift_grad<T: Scalar>(f: &[T; QUBITS], p: &CircuitParams<T>, param: ShiftParam) -> Result<T> {
    let mut enc = [T::zero(); QUBITS];
    for (e, &v) in enc.iter_mut().zip(f) {
        *e = encoding_angle(v);
    }
    shift_grad_angles(&enc, &p.angles, param)
}

/// Shift-rule derivative for explicit encoding angles.
pub fn shift_grad_angles<T: Scalar>(encoding: &[T; QUBITS], angles: &[T; ANGLES], param: ShiftParam) -> Result<T> {
    let shift = T::of(std::f64::consts::FRAC_PI_2);
    let (mut enc_p, mut ang_p) = (*encoding, *angles);
    let (mut enc_m, mut ang_m) = (*encoding, *angles);
    match param {
        ShiftParam::Layer(k) if k < ANGLES => {
            ang_p[k] += shift;
            ang_m[k] -= shift;
        }
        ShiftParam::Encoding(q) if (1..=QUBITS).contains(&q) => {
            enc_p[q - 1] += shift;
            enc_m[q - 1] -= shift;
        }
        other => return Err(Error::Argument(format!("no circuit parameter {other:?}"))),
    }
    let plus = readout_probability(&enc_p, &ang_p);
    let minus = readout_probability(&enc_m, &ang_m);
    Ok((plus - minus) * T::of(0.5))
}

/// Probability and its gradient with respect to all 12 shared angles and
/// the 4 encoding angles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircuitGradient<T = f64> {
    pub probability: T,
    pub d_angles: [T; ANGLES],
    pub d_encoding: [T; QUBITS],
}

/// All derivatives by the shift rule: 32 extra circuit runs.
pub fn circuit_gradient_shift<T: Scalar>(encoding: &[T; QUBITS], angles: &[T; ANGLES]) -> CircuitGradient<T> {
    let mut d_angles = [T::zero(); ANGLES];
    for (k, d) in d_angles.iter_mut().enumerate() {
        *d = shift_grad_angles(encoding, angles, ShiftParam::Layer(k)).expect("index in range");
    }
    let mut d_encoding = [T::zero(); QUBITS];
    for (q, d) in d_encoding.iter_mut().enumerate() {
        *d = shift_grad_angles(encoding, angles, ShiftParam::Encoding(q + 1)).expect("index in range");
    }
    CircuitGradient {
        probability: readout_probability(encoding, angles),
        d_angles,
        d_encoding,
    }
}

/// `Im <lambda| A |phi>` for the Pauli `A` on one qubit.
fn pauli_overlap_im<T: Scalar>(lambda: &[Complex<T>; DIM], phi: &[Complex<T>; DIM], bit: usize, axis: Axis) -> T {
    let i = Complex::new(T::zero(), T::one());
    let mut acc = Complex::new(T::zero(), T::zero());
    for k in 0..DIM {
        let partner = phi[k ^ bit];
        let a_phi = match axis {
            Axis::X => partner,
            // Y|0> = i|1>, Y|1> = -i|0>
            Axis::Y if k & bit == 0 => -i * partner,
            Axis::Y => i * partner,
        };
        acc += lambda[k].conj() * a_phi;
    }
    acc.im
}

/// Same values as [`circuit_gradient_shift`], from one forward and one
/// reverse sweep over the statevector (adjoint differentiation).
pub fn circuit_gradient<T: Scalar>(encoding: &[T; QUBITS], angles: &[T; ANGLES]) -> CircuitGradient<T> {
    let mut phi = circuit_state(encoding, angles).amplitudes;
    let mut lambda = phi;
    for (k, l) in lambda.iter_mut().enumerate() {
        if k & 1 == 0 {
            *l = Complex::new(T::zero(), T::zero());
        }
    }
    let probability = lambda.iter().map(|a| a.norm_sqr()).sum::<T>().min(T::one());
    for &(a, b, t) in CCNOT_RING.iter().rev() {
        let (ba, bb, bt) = (1 << (a - 1), 1 << (b - 1), 1 << (t - 1));
        ccnot_in_place(&mut phi, ba, bb, bt);
        ccnot_in_place(&mut lambda, ba, bb, bt);
    }
    let mut d_angles = [T::zero(); ANGLES];
    for (layer, &axis) in LAYER_AXES.iter().enumerate().rev() {
        for q in (0..QUBITS).rev() {
            let k = layer * QUBITS + q;
            d_angles[k] = pauli_overlap_im(&lambda, &phi, 1 << q, axis);
            rotate_in_place(&mut phi, 1 << q, axis, -angles[k]);
            rotate_in_place(&mut lambda, 1 << q, axis, -angles[k]);
        }
    }
    let mut d_encoding = [T::zero(); QUBITS];
    for q in (0..QUBITS).rev() {
        d_encoding[q] = pauli_overlap_im(&lambda, &phi, 1 << q, Axis::Y);
        rotate_in_place(&mut phi, 1 << q, Axis::Y, -encoding[q]);
        rotate_in_place(&mut lambda, 1 << q, Axis::Y, -encoding[q]);
    }
    CircuitGradient {
        probability,
        d_angles,
        d_encoding,
    }
}
