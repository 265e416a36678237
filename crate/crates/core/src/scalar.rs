// SPDX-License-Identifier: Apache-2.0

//! Scalar abstraction shared by the prediction and tuning math.

use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Real scalar usable by the predictor and the tuner: `f32` or `f64`.
pub trait Real: Float + FromPrimitive + NumAssign + Sum + Debug + Default + Send + Sync + 'static {
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    fn from_count(v: u64) -> Self {
        Self::from_u64(v).expect("count representable in scalar type")
    }
}

impl Real for f32 {}
impl Real for f64 {}
