use crate::scalar::Scalar;
pub struct EncoderParams<S: Scalar> { pub _marker: std::marker::PhantomData<S> }
